#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace subdiff {

// Fixed random-frequency sinusoidal time embedding:
// PE(t) = [sin(2 pi Omega t); cos(2 pi Omega t)], Omega ~ N(0, 9000 I).
// Never trained.
struct FourierTimeEmbedding {
    Eigen::VectorXd omega;  // d_T frequencies

    int out_dim() const { return 2 * static_cast<int>(omega.size()); }
    Eigen::VectorXd operator()(double t) const;
};

// Two-layer ReLU net with NTK output scaling:
// out = (1/sqrt(d_H)) * w2 * relu(w1^T u).
struct TwoLayerBranch {
    Eigen::MatrixXd w1;  // d_in x d_H
    Eigen::MatrixXd w2;  // d_out x d_H

    int d_in() const { return static_cast<int>(w1.rows()); }
    int d_hidden() const { return static_cast<int>(w1.cols()); }
    int d_out() const { return static_cast<int>(w2.rows()); }
    double scale() const;
    Eigen::VectorXd forward(const Eigen::VectorXd& u) const;
};

struct NetDims {
    int d_x, d_z, d_g, d_h, d_t;
    bool operator==(const NetDims&) const = default;
};

// Dual encoder score network: s(x,t) = U NN([x;PE(t)]) + V NN([g;PE(t)]).
struct DualScoreNet {
    NetDims dims{};
    Eigen::MatrixXd u;  // d_X x d_Z
    Eigen::MatrixXd v;  // d_X x d_G
    TwoLayerBranch branch_z;  // input d_X + 2 d_T, output d_Z
    TwoLayerBranch branch_g;  // input d_G + 2 d_T, output d_G
    FourierTimeEmbedding emb;
};

// Branch weights i.i.d. N(0,1); omega i.i.d. N(0, 9000); U, V i.i.d.
// N(0, 1/d_X). Deterministic in seed.
DualScoreNet init_net(const NetDims& dims, std::uint64_t seed);

// Cached forward state for a batch; single-use, consumed by the backward pass.
struct ForwardCache {
    Eigen::MatrixXd in_z;   // (d_X + 2 d_T) x n
    Eigen::MatrixXd in_g;   // (d_G + 2 d_T) x n
    Eigen::MatrixXd act_z;  // d_H x n, ReLU activations
    Eigen::MatrixXd act_g;
    Eigen::MatrixXd out_z;  // d_Z x n, branch outputs s_Z
    Eigen::MatrixXd out_g;  // d_G x n, branch outputs s_G
    int n() const { return static_cast<int>(in_z.cols()); }
};

// Forward pass for a batch: columns of x are samples, one time per column.
// Returns the combined scores s = U s_Z + V s_G as columns; branch outputs
// live in the cache.
Eigen::MatrixXd score_batch(const DualScoreNet& net, const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& g, const Eigen::VectorXd& t,
                            ForwardCache& cache);

struct Gradients {
    Eigen::MatrixXd du, dv, dw1z, dw2z, dw1g, dw2g;
    void resize_zero(const DualScoreNet& net);
};

// Gradients of sum_i <upstream_i, s_i> w.r.t. every trainable parameter,
// given extra direct upstreams on the branch outputs (may be empty).
// ReLU subgradient at 0 is taken as 0.
void backward_batch(const DualScoreNet& net, const ForwardCache& cache,
                    const Eigen::MatrixXd& upstream, const Eigen::MatrixXd& d_out_z_extra,
                    const Eigen::MatrixXd& d_out_g_extra, Gradients& grads);

// Single-point convenience wrappers matching the library surface.
struct ScoreResult {
    Eigen::VectorXd s;    // dim d_X
    Eigen::VectorXd s_z;  // dim d_Z
    Eigen::VectorXd s_g;  // dim d_G
    ForwardCache cache;
};
ScoreResult score(const DualScoreNet& net, const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                  double t);
Gradients backward(const DualScoreNet& net, const ForwardCache& cache,
                   const Eigen::VectorXd& upstream);

}  // namespace subdiff
