#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

namespace subdiff {

// Relative singular-value cutoff below which directions are treated as zero.
// Trained mixing matrices may be numerically rank-deficient.
inline constexpr double kRankTolerance = 1e-8;

// A matrix with orthonormal columns spanning a k-dimensional subspace of R^d.
struct Basis {
    Eigen::MatrixXd columns;  // d x k, columns^T * columns = I_k

    int ambient_dim() const { return static_cast<int>(columns.rows()); }
    int subspace_dim() const { return static_cast<int>(columns.cols()); }
};

// Validates orthonormality (1e-10 elementwise) and 1 <= k <= d.
Basis make_basis(Eigen::MatrixXd columns);

// Splits a seeded random orthogonal d_x-matrix into complementary bases of
// dimension d_z and d_x - d_z. Deterministic in the seed.
std::pair<Basis, Basis> orthonormal_subspace_pair(int d_x, int d_z, std::uint64_t seed);

// Orthogonal projector onto the column space of M (rank decided by
// kRankTolerance). Throws on an all-zero M.
Eigen::MatrixXd projection(const Eigen::MatrixXd& m);

// Orthonormal basis of the column space of M, one column per retained
// singular direction.
Eigen::MatrixXd column_space_basis(const Eigen::MatrixXd& m);

// (1/2d_X)(|P_U - P_{A_Z}|_F^2 + |P_V - P_{A_G}|_F^2), normalized to [0,1].
double subspace_recovery_error(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                               const Basis& a_z, const Basis& a_g);

}  // namespace subdiff
