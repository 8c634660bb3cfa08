#include "subdiff/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace subdiff {

namespace {

const double kLog25 = std::log(25.0);

void check_range(const NoiseSchedule& s, double t) {
    if (t < s.t_min - 1e-12 || t > s.t_max + 1e-12)
        throw std::invalid_argument("schedule: t outside [t_min, t_max]");
}

// VP/sub-VP exponent and cosine-VP exponent.
double beta_vp(double t) { return 0.1 * t + 9.95 * t * t; }
double beta_vp_prime(double t) { return 0.1 + 19.9 * t; }
double gamma_cos(double t) { return t + (2.0 / M_PI) * std::sin(0.5 * t); }
double gamma_cos_prime(double t) { return 1.0 + (1.0 / M_PI) * std::cos(0.5 * t); }

}  // namespace

double NoiseSchedule::alpha(double t) const {
    switch (kind) {
        case ScheduleKind::OU: return std::exp(-t);
        case ScheduleKind::VE: return 1.0;
        case ScheduleKind::VP:
        case ScheduleKind::SUBVP: return std::exp(-0.5 * beta_vp(t));
        case ScheduleKind::COSVP: return std::exp(-0.5 * gamma_cos(t));
    }
    throw std::logic_error("unreachable");
}

double NoiseSchedule::sigma2(double t) const {
    switch (kind) {
        case ScheduleKind::OU: return 1.0 - std::exp(-2.0 * t);
        case ScheduleKind::VE: return (std::pow(25.0, 2.0 * t) - 1.0) / (2.0 * kLog25);
        case ScheduleKind::VP: return 1.0 - std::exp(-beta_vp(t));
        case ScheduleKind::SUBVP: {
            const double v = 1.0 - std::exp(-beta_vp(t));
            return v * v;
        }
        case ScheduleKind::COSVP: return 1.0 - std::exp(-gamma_cos(t));
    }
    throw std::logic_error("unreachable");
}

double NoiseSchedule::alpha_prime(double t) const {
    switch (kind) {
        case ScheduleKind::OU: return -std::exp(-t);
        case ScheduleKind::VE: return 0.0;
        case ScheduleKind::VP:
        case ScheduleKind::SUBVP: return -0.5 * beta_vp_prime(t) * alpha(t);
        case ScheduleKind::COSVP: return -0.5 * gamma_cos_prime(t) * alpha(t);
    }
    throw std::logic_error("unreachable");
}

double NoiseSchedule::sigma2_prime(double t) const {
    switch (kind) {
        case ScheduleKind::OU: return 2.0 * std::exp(-2.0 * t);
        case ScheduleKind::VE: return std::pow(25.0, 2.0 * t);
        case ScheduleKind::VP: return beta_vp_prime(t) * std::exp(-beta_vp(t));
        case ScheduleKind::SUBVP:
            return 2.0 * (1.0 - std::exp(-beta_vp(t))) * beta_vp_prime(t) * std::exp(-beta_vp(t));
        case ScheduleKind::COSVP: return gamma_cos_prime(t) * std::exp(-gamma_cos(t));
    }
    throw std::logic_error("unreachable");
}

std::pair<double, double> NoiseSchedule::coeffs(double t) const {
    check_range(*this, t);
    return {alpha(t), std::sqrt(sigma2(t))};
}

std::pair<double, double> NoiseSchedule::sde_coeffs(double t) const {
    check_range(*this, t);
    const double f = alpha_prime(t) / alpha(t);
    double g2 = sigma2_prime(t) - 2.0 * f * sigma2(t);
    if (g2 < -1e-10) throw std::runtime_error("schedule: negative diffusion coefficient");
    if (g2 < 0.0) g2 = 0.0;
    return {f, g2};
}

std::string NoiseSchedule::name() const {
    switch (kind) {
        case ScheduleKind::OU: return "ou";
        case ScheduleKind::VE: return "ve";
        case ScheduleKind::VP: return "vp";
        case ScheduleKind::SUBVP: return "subvp";
        case ScheduleKind::COSVP: return "cosvp";
    }
    throw std::logic_error("unreachable");
}

NoiseSchedule make_schedule(std::string_view name) {
    NoiseSchedule s;
    if (name == "ou") s.kind = ScheduleKind::OU;
    else if (name == "ve") s.kind = ScheduleKind::VE;
    else if (name == "vp") s.kind = ScheduleKind::VP;
    else if (name == "subvp") s.kind = ScheduleKind::SUBVP;
    else if (name == "cosvp") s.kind = ScheduleKind::COSVP;
    else throw std::invalid_argument("unknown schedule: " + std::string(name));
    return s;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> perturb(const NoiseSchedule& sched,
                                                    const Eigen::VectorXd& x0, double t,
                                                    const Eigen::VectorXd& noise) {
    if (sched.sigma2(t) <= 0.0)
        throw std::invalid_argument("denoising target undefined at t=0");
    const auto [a, s] = sched.coeffs(t);
    return {a * x0 + s * noise, -noise / s};
}

}  // namespace subdiff
