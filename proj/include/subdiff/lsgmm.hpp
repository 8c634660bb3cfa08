#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "subdiff/rng.hpp"
#include "subdiff/schedule.hpp"
#include "subdiff/subspaces.hpp"

namespace subdiff {

// Isotropic Gaussian mixture over one latent subspace.
struct SubspaceMixture {
    Eigen::MatrixXd means;    // n_components x k, one mean per row
    Eigen::VectorXd weights;  // simplex vector
    double variance = 0.01;   // sigma_0^2, shared isotropic component variance

    int dim() const { return static_cast<int>(means.cols()); }
    int components() const { return static_cast<int>(means.rows()); }
    void validate() const;
};

// Ground-truth generative model X = A_Z Z + A_G G with independent
// per-subspace Gaussian mixtures.
struct LatentSubspaceGMM {
    Basis a_z;
    Basis a_g;
    SubspaceMixture content;  // dim d_Z
    SubspaceMixture style;    // dim d_G

    int d_x() const { return a_z.ambient_dim(); }
    int d_z() const { return a_z.subspace_dim(); }
    int d_g() const { return a_g.subspace_dim(); }
    void validate() const;
};

// d_X = 10, d_Z = d_G = 5, two components per subspace, sigma_0 = 0.1, equal
// weights. Component means drawn i.i.d. uniform on [-1, 1]^k from the seed.
LatentSubspaceGMM default_paper_model(std::uint64_t seed);

struct SampleSet {
    Eigen::MatrixXd x;  // n x d_X
    Eigen::MatrixXd z;  // n x d_Z
    Eigen::MatrixXd g;  // n x d_G
    int size() const { return static_cast<int>(x.rows()); }
};

SampleSet sample(const LatentSubspaceGMM& model, int n, std::uint64_t seed);

// The known style function g(x) = A_G^T x.
Eigen::VectorXd style_of(const LatentSubspaceGMM& model, const Eigen::VectorXd& x);

// Log density of one noised subspace mixture at time t: components have mean
// alpha * mu_k and isotropic variance alpha^2 sigma_0^2 + sigma^2.
double mixture_noisy_log_density(const SubspaceMixture& mix, const Eigen::VectorXd& coords,
                                 double alpha, double sigma2);
Eigen::VectorXd mixture_noisy_score(const SubspaceMixture& mix, const Eigen::VectorXd& coords,
                                    double alpha, double sigma2);

// Exact log p_t(x), using the factorization across the two subspaces.
double noisy_log_density(const LatentSubspaceGMM& model, const NoiseSchedule& sched,
                         const Eigen::VectorXd& x, double t);

struct ScoreParts {
    Eigen::VectorXd full;     // dim d_X
    Eigen::VectorXd content;  // s*_Z(A_Z^T x, t), dim d_Z
    Eigen::VectorXd style;    // s*_G(A_G^T x, t), dim d_G
};

// Analytic score grad_x log p_t(x) = A_Z s*_Z + A_G s*_G, with the two
// subspace parts exposed separately.
ScoreParts oracle_score(const LatentSubspaceGMM& model, const NoiseSchedule& sched,
                        const Eigen::VectorXd& x, double t);

// Batch version used by the training loop: rows of x_t are noised samples,
// one time per row. Writes s* rows (d_X), and the subspace parts.
void oracle_score_batch(const LatentSubspaceGMM& model, const NoiseSchedule& sched,
                        const Eigen::MatrixXd& x_t, const Eigen::VectorXd& t,
                        Eigen::MatrixXd& s_full, Eigen::MatrixXd& s_content,
                        Eigen::MatrixXd& s_style);

}  // namespace subdiff
