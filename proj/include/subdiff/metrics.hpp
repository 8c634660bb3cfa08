#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "subdiff/lsgmm.hpp"

namespace subdiff {

// Kraskov-Stoegbauer-Grassberger k-NN mutual information estimate in nats.
// Rows of a and b are paired samples. Warns on heavy duplication (>10%).
double mi_knn(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int k);

// Histogram total variation (1/2) sum |p_hat - q_hat| on a shared bin grid
// spanning the pooled range. Dimension must be <= 3.
double tv_histogram(const Eigen::MatrixXd& p_samples, const Eigen::MatrixXd& q_samples,
                    int bins_per_dim);

struct DisentanglementReport {
    double mi_zg = 0.0;            // nats, truncated at >= 0
    double recovery_error = 1.0;   // [0, 1]
    double editability_tv = -1.0;  // [0, 1]; negative when not evaluated
    double reconstruction_gap = 0.0;  // |P_U + P_V - I|_F invertibility proxy
    int n_eval = 0;
    bool has_editability() const { return editability_tv >= 0.0; }
};

struct EvalConfig {
    int knn_k = 5;
    bool with_editability = false;
    double edit_delta = 0.1;
    int edit_steps = 200;
    int edit_sources = 1000;
    int content_bins = 10;
    int tv_bins = 30;
    std::uint64_t seed = 0;
};

// Evaluates learned mixing matrices (or explicit projecting bases) against a
// ground-truth model on held-out data: MI between content coordinates of
// P_U x and the known style g(x), subspace recovery error, and optionally the
// editing TV score.
DisentanglementReport evaluate(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                               const LatentSubspaceGMM& model, const SampleSet& eval_data,
                               const EvalConfig& cfg);

struct Example1Result {
    double mi_hat = 0.0;
    double flip_rate = 0.0;
    double tv_hat = 0.0;
};

// Numerical simulation of the sign-flip construction: encodings that are
// statistically independent yet fail style editing. Z, G ~ N(0,1),
// Zhat = Z sgn(G), Ghat = G, decoder restores the sign with a fresh style.
Example1Result example1_simulation(int n, std::uint64_t seed);

}  // namespace subdiff
