#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <utility>

namespace subdiff {

enum class ScheduleKind { OU, VE, VP, SUBVP, COSVP };

// Closed-form noise schedule: the forward process is
//   X_t = alpha(t) X_0 + sigma(t) N,  N ~ N(0, I),
// with SDE drift f(t) = alpha'(t)/alpha(t) and diffusion
// g^2(t) = (sigma^2)'(t) - 2 f(t) sigma^2(t).
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::OU;
    double t_min = 1e-5;
    double t_max = 1.0;

    double alpha(double t) const;
    double sigma2(double t) const;
    double alpha_prime(double t) const;
    double sigma2_prime(double t) const;

    // (alpha, sigma); t must lie in [t_min, t_max].
    std::pair<double, double> coeffs(double t) const;
    // (f, g^2); throws if the schedule yields g^2 < -1e-10.
    std::pair<double, double> sde_coeffs(double t) const;

    std::string name() const;
};

NoiseSchedule make_schedule(std::string_view name);

// x_t = alpha(t) x0 + sigma(t) noise; target = -noise / sigma(t), which equals
// the conditional score grad log p_{t|0}(x_t | x0).
std::pair<Eigen::VectorXd, Eigen::VectorXd> perturb(const NoiseSchedule& sched,
                                                    const Eigen::VectorXd& x0, double t,
                                                    const Eigen::VectorXd& noise);

}  // namespace subdiff
