#include "subdiff/sampler.hpp"

#include <cmath>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "subdiff/rng.hpp"

namespace subdiff {

void SamplerConfig::validate() const {
    if (n_steps < 1) throw std::invalid_argument("sampler: n_steps must be >= 1");
    if (n_samples < 1) throw std::invalid_argument("sampler: n_samples must be >= 1");
}

namespace {

Eigen::MatrixXd initial_draw(const NoiseSchedule& sched, int n, int d_x, Rng& rng) {
    std::normal_distribution<double> normal;
    double std0 = 1.0;
    if (sched.kind != ScheduleKind::OU) {
        if (sched.alpha(sched.t_max) > 0.05)
            std::cerr << "warning: schedule '" << sched.name()
                      << "' has alpha(t_max) > 0.05; N(0, sigma^2(t_max) I) initial law is "
                         "approximate\n";
        std0 = std::sqrt(sched.sigma2(sched.t_max));
    }
    Eigen::MatrixXd x(n, d_x);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d_x; ++j) x(i, j) = std0 * normal(rng);
    return x;
}

void check_finite(const Eigen::MatrixXd& x, int step) {
    if (!x.allFinite()) {
        std::ostringstream msg;
        msg << "sampler: NaN state at step " << step;
        throw std::runtime_error(msg.str());
    }
}

Eigen::MatrixXd integrate(const ScoreFn& score, const NoiseSchedule& sched,
                          const SamplerConfig& cfg, int d_x, double t_stop, bool stochastic) {
    cfg.validate();
    const double eta = (sched.t_max - t_stop) / cfg.n_steps;
    Rng rng = make_rng(cfg.seed, "sampler");
    Eigen::MatrixXd x = initial_draw(sched, cfg.n_samples, d_x, rng);
    std::normal_distribution<double> normal;
    for (int k = 0; k < cfg.n_steps; ++k) {
        const double tau = sched.t_max - k * eta;
        const auto [f, g2] = sched.sde_coeffs(tau);
        const double g = std::sqrt(g2);
        const double sqrt_eta = std::sqrt(eta);
        for (int i = 0; i < cfg.n_samples; ++i) {
            const Eigen::VectorXd xi = x.row(i).transpose();
            const Eigen::VectorXd s = score(xi, tau);
            Eigen::VectorXd drift =
                stochastic ? (-f * xi + g2 * s).eval() : (-f * xi + 0.5 * g2 * s).eval();
            Eigen::VectorXd next = xi + eta * drift;
            if (stochastic)
                for (int j = 0; j < d_x; ++j) next(j) += g * sqrt_eta * normal(rng);
            x.row(i) = next.transpose();
        }
        check_finite(x, k);
    }
    return x;
}

}  // namespace

Eigen::MatrixXd reverse_sde_sample(const ScoreFn& score, const NoiseSchedule& sched,
                                   const SamplerConfig& cfg, int d_x) {
    return integrate(score, sched, cfg, d_x, sched.t_min, true);
}

Eigen::MatrixXd probability_flow_sample(const ScoreFn& score, const NoiseSchedule& sched,
                                        const SamplerConfig& cfg, int d_x) {
    return integrate(score, sched, cfg, d_x, sched.t_min, false);
}

Eigen::MatrixXd edit_sample(const Eigen::MatrixXd& p_u, const Eigen::MatrixXd& p_v,
                            const Eigen::VectorXd& z_hat, const Eigen::VectorXd& g_new,
                            const NoiseSchedule& sched, const SamplerConfig& cfg, double t_stop) {
    if (sched.kind != ScheduleKind::OU)
        throw std::invalid_argument("edit_sample: the conditional score is OU-specific");
    if (t_stop < sched.t_min || sched.sigma2(t_stop) <= 0.0)
        throw std::invalid_argument("edit_sample: need sigma(t_stop) > 0");
    const Eigen::VectorXd mean = p_u * z_hat + p_v * g_new;
    const int d_x = static_cast<int>(mean.size());
    ScoreFn score = [&](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd {
        return (std::exp(-t) * mean - x) / sched.sigma2(t);
    };
    return integrate(score, sched, cfg, d_x, t_stop, true);
}

double edit_t0(double delta) { return -0.5 * std::log(1.0 - delta * delta); }
double edit_t1(double delta) { return -0.5 * std::log(1.0 - delta); }

}  // namespace subdiff
