#include "subdiff/subspaces.hpp"

#include <Eigen/SVD>
#include <stdexcept>

#include "subdiff/rng.hpp"

namespace subdiff {

Basis make_basis(Eigen::MatrixXd columns) {
    const auto d = columns.rows();
    const auto k = columns.cols();
    if (k < 1 || k > d) throw std::invalid_argument("basis: need 1 <= k <= d");
    Eigen::MatrixXd gram = columns.transpose() * columns;
    gram.diagonal().array() -= 1.0;
    if (gram.cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("basis: columns are not orthonormal");
    return Basis{std::move(columns)};
}

std::pair<Basis, Basis> orthonormal_subspace_pair(int d_x, int d_z, std::uint64_t seed) {
    if (d_z < 1 || d_z >= d_x)
        throw std::invalid_argument("orthonormal_subspace_pair: need 1 <= d_z < d_x");
    Rng rng = make_rng(seed, "subspace-pair");
    std::normal_distribution<double> normal;
    Eigen::MatrixXd a(d_x, d_x);
    for (int j = 0; j < d_x; ++j)
        for (int i = 0; i < d_x; ++i) a(i, j) = normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    // Sign correction keeps the distribution rotation-invariant and the
    // output deterministic across repeated calls.
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d_x; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return {make_basis(q.leftCols(d_z)), make_basis(q.rightCols(d_x - d_z))};
}

Eigen::MatrixXd column_space_basis(const Eigen::MatrixXd& m) {
    if (m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0)
        throw std::invalid_argument("zero matrix has no column space");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU);
    const double cutoff = kRankTolerance * svd.singularValues()(0);
    int rank = 0;
    while (rank < svd.singularValues().size() && svd.singularValues()(rank) > cutoff) ++rank;
    return svd.matrixU().leftCols(rank);
}

Eigen::MatrixXd projection(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd q = column_space_basis(m);
    return q * q.transpose();
}

double subspace_recovery_error(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                               const Basis& a_z, const Basis& a_g) {
    const auto d_x = a_z.ambient_dim();
    if (u.rows() != d_x || v.rows() != d_x || a_g.ambient_dim() != d_x)
        throw std::invalid_argument("subspace_recovery_error: row dimension mismatch");
    const Eigen::MatrixXd p_u = projection(u);
    const Eigen::MatrixXd p_v = projection(v);
    const Eigen::MatrixXd p_z = a_z.columns * a_z.columns.transpose();
    const Eigen::MatrixXd p_g = a_g.columns * a_g.columns.transpose();
    return ((p_u - p_z).squaredNorm() + (p_v - p_g).squaredNorm()) / (2.0 * d_x);
}

}  // namespace subdiff
