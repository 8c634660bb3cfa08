#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "subdiff/lsgmm.hpp"
#include "subdiff/schedule.hpp"
#include "subdiff/scorenet.hpp"

namespace subdiff {

enum class TargetMode { Oracle, Denoising };
enum class OptimizerKind { GD, Adam };

struct TrainConfig {
    double lambda_r = 3.0;
    double lr = 1e-5;
    int steps = 10000;
    int batch = 0;  // 0 = full batch
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    TargetMode target_mode = TargetMode::Oracle;
    int pretrain_style_steps = 2000;
    int t_samples_per_point = 1;
    std::uint64_t seed = 0;
    std::string schedule_name = "ou";

    void validate() const;
};

struct HistoryRecord {
    int step;
    double total, l0, lr, lb, subspace_error;
};

struct TrainHistory {
    std::vector<HistoryRecord> records;
};

struct LossTerms {
    double l0 = 0.0, lr = 0.0, lb = 0.0;
    double total(double lambda_r) const { return 2.0 * l0 + 2.0 * lambda_r * lr + 0.5 * lb; }
};

// Loss assembly and mixing-matrix gradients given branch outputs, usable both
// with the real network and with oracle branch substitutes in tests.
// out_z: d_Z x n, out_g: d_G x n, target: d_X x n columns of s*.
// Fills gradients of the total objective w.r.t. U, V and the upstream
// derivatives w.r.t. the branch outputs.
struct MixingGrads {
    Eigen::MatrixXd du, dv;         // objective gradients
    Eigen::MatrixXd d_out_z;        // d_Z x n
    Eigen::MatrixXd d_out_g;        // d_G x n
    Eigen::MatrixXd upstream;       // d_X x n, derivative through s = U s_Z + V s_G
};
LossTerms mixing_loss_terms(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                            const Eigen::MatrixXd& out_z, const Eigen::MatrixXd& out_g,
                            const Eigen::MatrixXd& target, double lambda_r,
                            MixingGrads* grads = nullptr);

// One Monte-Carlo evaluation of Eq-style objective on a batch of clean data
// points: draws one t per point, perturbs, evaluates targets per mode, and
// returns loss terms plus exact gradients for all parameters.
struct LossEval {
    LossTerms terms;
    Gradients grads;
};
LossEval loss_terms(const DualScoreNet& net, const Eigen::MatrixXd& data_x,
                    const LatentSubspaceGMM* model, const NoiseSchedule& sched,
                    const TrainConfig& cfg, Rng& rng, bool want_grads = true);

// Standard bias-corrected elementwise Adam.
struct AdamState {
    Eigen::MatrixXd m, v;
    long step = 0;
};
void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps);

struct TrainResult {
    TrainHistory history;
    bool ok = true;
    std::string message;
};

// Optimizes the network in place: optional style-branch pretraining phase,
// then joint optimization of the full objective. Deterministic in
// (cfg.seed, initial net).
TrainResult train(const LatentSubspaceGMM& model, const Eigen::MatrixXd& data_x,
                  DualScoreNet& net, const TrainConfig& cfg);

struct SweepRow {
    std::string schedule;
    double lambda_r;
    int n;
    int trial;
    std::uint64_t seed;
    int steps;
    double final_l0 = 0, final_lr = 0, final_lb = 0, final_error = 1.0;
    std::string status = "ok";
};

struct SweepReport {
    std::vector<SweepRow> rows;
};

// Seed derivation shared by sweep() and the CLI, exposed so a single cell can
// be reproduced by a direct train() call.
std::uint64_t sweep_cell_seed(std::uint64_t base, std::string_view schedule, double lambda_r,
                              int n, int trial);
std::uint64_t sweep_data_seed(std::uint64_t base, int n, int trial);

// Trains one net per (schedule, lambda_r, n, trial); per-cell failures are
// recorded as flagged rows. Rows sorted by (schedule, lambda_r, n, trial).
SweepReport sweep(const LatentSubspaceGMM& model, const std::vector<std::string>& schedules,
                  const std::vector<double>& lambdas, const std::vector<int>& ns, int trials,
                  const TrainConfig& base_cfg, const NetDims& dims, int jobs = 1);

}  // namespace subdiff
