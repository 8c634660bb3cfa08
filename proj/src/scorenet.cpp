#include "subdiff/scorenet.hpp"

#include <cmath>
#include <stdexcept>

#include "subdiff/rng.hpp"

namespace subdiff {

Eigen::VectorXd FourierTimeEmbedding::operator()(double t) const {
    const int d_t = static_cast<int>(omega.size());
    Eigen::VectorXd pe(2 * d_t);
    for (int i = 0; i < d_t; ++i) {
        const double a = 2.0 * M_PI * omega(i) * t;
        pe(i) = std::sin(a);
        pe(d_t + i) = std::cos(a);
    }
    return pe;
}

double TwoLayerBranch::scale() const { return 1.0 / std::sqrt(static_cast<double>(d_hidden())); }

Eigen::VectorXd TwoLayerBranch::forward(const Eigen::VectorXd& u) const {
    if (u.size() != d_in()) throw std::invalid_argument("branch: input dimension mismatch");
    return scale() * (w2 * (w1.transpose() * u).cwiseMax(0.0));
}

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, double stddev, Rng& rng) {
    std::normal_distribution<double> normal(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

}  // namespace

DualScoreNet init_net(const NetDims& dims, std::uint64_t seed) {
    if (dims.d_x < 1 || dims.d_z < 1 || dims.d_g < 1 || dims.d_h < 1 || dims.d_t < 1)
        throw std::invalid_argument("init_net: all dims must be >= 1");
    DualScoreNet net;
    net.dims = dims;
    Rng rng = make_rng(seed, "net-init");
    const int pe_dim = 2 * dims.d_t;
    net.branch_z.w1 = gaussian_matrix(dims.d_x + pe_dim, dims.d_h, 1.0, rng);
    net.branch_z.w2 = gaussian_matrix(dims.d_z, dims.d_h, 1.0, rng);
    net.branch_g.w1 = gaussian_matrix(dims.d_g + pe_dim, dims.d_h, 1.0, rng);
    net.branch_g.w2 = gaussian_matrix(dims.d_g, dims.d_h, 1.0, rng);
    // Mixing-matrix scale 1/sqrt(d_X) keeps initial score magnitudes O(1).
    net.u = gaussian_matrix(dims.d_x, dims.d_z, 1.0 / std::sqrt(dims.d_x), rng);
    net.v = gaussian_matrix(dims.d_x, dims.d_g, 1.0 / std::sqrt(dims.d_x), rng);
    net.emb.omega = gaussian_matrix(dims.d_t, 1, std::sqrt(9000.0), rng).col(0);
    return net;
}

Eigen::MatrixXd score_batch(const DualScoreNet& net, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& g, const Eigen::VectorXd& t,
                            ForwardCache& cache) {
    const int n = static_cast<int>(x.cols());
    const auto& d = net.dims;
    if (x.rows() != d.d_x || g.rows() != d.d_g || g.cols() != n || t.size() != n)
        throw std::invalid_argument("score: dimension mismatch");
    const int pe_dim = 2 * d.d_t;
    cache.in_z.resize(d.d_x + pe_dim, n);
    cache.in_g.resize(d.d_g + pe_dim, n);
    cache.in_z.topRows(d.d_x) = x;
    cache.in_g.topRows(d.d_g) = g;
    // Vectorized Fourier embedding: one phase matrix, sin/cos in bulk.
    const Eigen::MatrixXd phase = (2.0 * M_PI) * (net.emb.omega * t.transpose());
    cache.in_z.middleRows(d.d_x, d.d_t) = phase.array().sin().matrix();
    cache.in_z.bottomRows(d.d_t) = phase.array().cos().matrix();
    cache.in_g.middleRows(d.d_g, d.d_t) = cache.in_z.middleRows(d.d_x, d.d_t);
    cache.in_g.bottomRows(d.d_t) = cache.in_z.bottomRows(d.d_t);
    cache.act_z.noalias() = net.branch_z.w1.transpose() * cache.in_z;
    cache.act_g.noalias() = net.branch_g.w1.transpose() * cache.in_g;
    cache.act_z = cache.act_z.cwiseMax(0.0);
    cache.act_g = cache.act_g.cwiseMax(0.0);
    cache.out_z.noalias() = net.branch_z.scale() * (net.branch_z.w2 * cache.act_z);
    cache.out_g.noalias() = net.branch_g.scale() * (net.branch_g.w2 * cache.act_g);
    return net.u * cache.out_z + net.v * cache.out_g;
}

void Gradients::resize_zero(const DualScoreNet& net) {
    du = Eigen::MatrixXd::Zero(net.u.rows(), net.u.cols());
    dv = Eigen::MatrixXd::Zero(net.v.rows(), net.v.cols());
    dw1z = Eigen::MatrixXd::Zero(net.branch_z.w1.rows(), net.branch_z.w1.cols());
    dw2z = Eigen::MatrixXd::Zero(net.branch_z.w2.rows(), net.branch_z.w2.cols());
    dw1g = Eigen::MatrixXd::Zero(net.branch_g.w1.rows(), net.branch_g.w1.cols());
    dw2g = Eigen::MatrixXd::Zero(net.branch_g.w2.rows(), net.branch_g.w2.cols());
}

namespace {

void branch_backward(const TwoLayerBranch& br, const Eigen::MatrixXd& in,
                     const Eigen::MatrixXd& act, const Eigen::MatrixXd& d_out,
                     Eigen::MatrixXd& dw1, Eigen::MatrixXd& dw2) {
    const double c = br.scale();
    dw2.noalias() = c * (d_out * act.transpose());
    // ReLU mask from the cached activation; subgradient at exactly 0 is 0.
    Eigen::MatrixXd d_pre(act.rows(), act.cols());
    d_pre.noalias() = br.w2.transpose() * d_out;
    d_pre.array() *= c * (act.array() > 0.0).cast<double>();
    dw1.noalias() = in * d_pre.transpose();
}

}  // namespace

void backward_batch(const DualScoreNet& net, const ForwardCache& cache,
                    const Eigen::MatrixXd& upstream, const Eigen::MatrixXd& d_out_z_extra,
                    const Eigen::MatrixXd& d_out_g_extra, Gradients& grads) {
    const int n = cache.n();
    if (upstream.rows() != net.dims.d_x || upstream.cols() != n ||
        cache.out_z.rows() != net.dims.d_z)
        throw std::invalid_argument("backward: cache does not match forward call");
    grads.du.noalias() = upstream * cache.out_z.transpose();
    grads.dv.noalias() = upstream * cache.out_g.transpose();
    Eigen::MatrixXd d_out_z = net.u.transpose() * upstream;
    Eigen::MatrixXd d_out_g = net.v.transpose() * upstream;
    if (d_out_z_extra.size() > 0) d_out_z += d_out_z_extra;
    if (d_out_g_extra.size() > 0) d_out_g += d_out_g_extra;
    branch_backward(net.branch_z, cache.in_z, cache.act_z, d_out_z, grads.dw1z, grads.dw2z);
    branch_backward(net.branch_g, cache.in_g, cache.act_g, d_out_g, grads.dw1g, grads.dw2g);
}

ScoreResult score(const DualScoreNet& net, const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                  double t) {
    ScoreResult res;
    Eigen::MatrixXd s = score_batch(net, x, g, Eigen::VectorXd::Constant(1, t), res.cache);
    res.s = s.col(0);
    res.s_z = res.cache.out_z.col(0);
    res.s_g = res.cache.out_g.col(0);
    return res;
}

Gradients backward(const DualScoreNet& net, const ForwardCache& cache,
                   const Eigen::VectorXd& upstream) {
    Gradients grads;
    grads.resize_zero(net);
    backward_batch(net, cache, upstream, Eigen::MatrixXd(), Eigen::MatrixXd(), grads);
    return grads;
}

}  // namespace subdiff
