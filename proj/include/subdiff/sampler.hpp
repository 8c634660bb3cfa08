#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>

#include "subdiff/schedule.hpp"

namespace subdiff {

enum class SamplerMode { SDE, ODE };

struct SamplerConfig {
    int n_steps = 500;
    int n_samples = 1;
    std::uint64_t seed = 0;
    SamplerMode mode = SamplerMode::SDE;

    void validate() const;
};

using ScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)>;

// Euler-Maruyama integration of the generalized reverse SDE
//   dX = [-f(tau) X + g^2(tau) s(X, tau)] dt + g(tau) dB
// on a uniform grid from t_max down to t_min, score frozen within each step.
// Initial law: N(0, I) for OU (its stationary law); N(0, sigma^2(t_max) I)
// otherwise, with a warning when alpha(t_max) > 0.05.
// Returns n_samples x d_x. Throws on NaN state with the step index.
Eigen::MatrixXd reverse_sde_sample(const ScoreFn& score, const NoiseSchedule& sched,
                                   const SamplerConfig& cfg, int d_x);

// Probability-flow ODE dX/dtau = f X - (1/2) g^2 s(X, tau), integrated
// backward; deterministic given the initial draw.
Eigen::MatrixXd probability_flow_sample(const ScoreFn& score, const NoiseSchedule& sched,
                                        const SamplerConfig& cfg, int d_x);

// Conditional editing sampler (OU only): integrates the reverse SDE with the
// linear conditional score
//   s(x, z, g, t) = (e^{-t} (P_U z + P_V g) - x) / sigma(t)^2
// down to t_stop. z_hat and g_new live in R^{d_X}; the projectors are applied
// inside the score.
Eigen::MatrixXd edit_sample(const Eigen::MatrixXd& p_u, const Eigen::MatrixXd& p_v,
                            const Eigen::VectorXd& z_hat, const Eigen::VectorXd& g_new,
                            const NoiseSchedule& sched, const SamplerConfig& cfg, double t_stop);

// Noise-level mapping used by editing: t0 = -log(1-delta^2)^(1/2),
// t1 = -log(1-delta)^(1/2).
double edit_t0(double delta);
double edit_t1(double delta);

}  // namespace subdiff
