#include <doctest.h>

#include <cmath>
#include <vector>

#include "subdiff/schedule.hpp"

using namespace subdiff;

namespace {
const std::vector<std::string> kNames{"ou", "ve", "vp", "subvp", "cosvp"};
}

TEST_CASE("ou approaches the identity at small times") {
    const NoiseSchedule sched = make_schedule("ou");
    const auto [alpha, sigma] = sched.coeffs(sched.t_min);
    CHECK(alpha == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(sigma < 0.01);
}

TEST_CASE("ve sigma^2 at t=1 matches the closed form") {
    const NoiseSchedule sched = make_schedule("ve");
    CHECK(sched.sigma2(1.0) == doctest::Approx(624.0 / (2.0 * std::log(25.0))).epsilon(1e-12));
}

TEST_CASE("vp is exactly variance preserving") {
    const NoiseSchedule sched = make_schedule("vp");
    for (int i = 0; i <= 100; ++i) {
        const double t = sched.t_min + (sched.t_max - sched.t_min) * i / 100.0;
        const auto [alpha, sigma] = sched.coeffs(t);
        CHECK(alpha * alpha + sigma * sigma == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("ou variance preserving identity") {
    const NoiseSchedule sched = make_schedule("ou");
    for (double t : {1e-5, 0.1, 0.5, 1.0})
        CHECK(sched.alpha(t) * sched.alpha(t) + sched.sigma2(t) == doctest::Approx(1.0));
}

TEST_CASE("coeffs rejects out-of-range times") {
    const NoiseSchedule sched = make_schedule("ou");
    CHECK_THROWS(sched.coeffs(-0.1));
    CHECK_THROWS(sched.coeffs(1.5));
    CHECK_THROWS(sched.sde_coeffs(2.0));
}

TEST_CASE("ou sde coefficients are (-1, 2)") {
    const NoiseSchedule sched = make_schedule("ou");
    for (double t : {1e-5, 0.25, 0.9}) {
        const auto [f, g2] = sched.sde_coeffs(t);
        CHECK(f == doctest::Approx(-1.0).epsilon(1e-12));
        CHECK(g2 == doctest::Approx(2.0).epsilon(1e-12));
    }
}

TEST_CASE("vp diffusion coefficient is 0.1 + 19.9 t") {
    const NoiseSchedule sched = make_schedule("vp");
    for (double t : {1e-5, 0.2, 0.5, 1.0}) {
        const auto [f, g2] = sched.sde_coeffs(t);
        CHECK(g2 == doctest::Approx(0.1 + 19.9 * t).epsilon(1e-10));
        CHECK(f == doctest::Approx(-(0.05 + 9.95 * t)).epsilon(1e-10));
    }
}

TEST_CASE("ve is drift free with g^2 = 25^(2t)") {
    const NoiseSchedule sched = make_schedule("ve");
    for (double t : {1e-5, 0.3, 1.0}) {
        const auto [f, g2] = sched.sde_coeffs(t);
        CHECK(f == doctest::Approx(0.0));
        CHECK(g2 == doctest::Approx(std::pow(25.0, 2.0 * t)).epsilon(1e-10));
    }
}

TEST_CASE("closed-form derivatives match finite differences") {
    const double h = 1e-6;
    for (const auto& name : kNames) {
        const NoiseSchedule sched = make_schedule(name);
        for (int i = 1; i < 50; ++i) {
            const double t = 0.02 * i;
            const double da = (sched.alpha(t + h) - sched.alpha(t - h)) / (2.0 * h);
            const double ds = (sched.sigma2(t + h) - sched.sigma2(t - h)) / (2.0 * h);
            CHECK(sched.alpha_prime(t) ==
                  doctest::Approx(da).epsilon(1e-6).scale(std::abs(da) + 1.0));
            CHECK(sched.sigma2_prime(t) ==
                  doctest::Approx(ds).epsilon(1e-6).scale(std::abs(ds) + 1.0));
        }
    }
}

TEST_CASE("sigma^2 is strictly increasing for every schedule") {
    for (const auto& name : kNames) {
        const NoiseSchedule sched = make_schedule(name);
        double prev = sched.sigma2(sched.t_min);
        for (int i = 1; i <= 1000; ++i) {
            const double t = sched.t_min + (sched.t_max - sched.t_min) * i / 1000.0;
            const double cur = sched.sigma2(t);
            CHECK(cur > prev);
            prev = cur;
        }
        CHECK(sched.alpha(sched.t_min) > 0.0);
        CHECK(sched.alpha(sched.t_max) > 0.0);
    }
}

TEST_CASE("sub-vp variance is the square of the vp variance") {
    const NoiseSchedule vp = make_schedule("vp");
    const NoiseSchedule subvp = make_schedule("subvp");
    for (int i = 0; i <= 100; ++i) {
        const double t = vp.t_min + (vp.t_max - vp.t_min) * i / 100.0;
        CHECK(subvp.sigma2(t) == doctest::Approx(vp.sigma2(t) * vp.sigma2(t)).epsilon(1e-12));
    }
}

TEST_CASE("perturb implements the conditional score target") {
    const NoiseSchedule sched = make_schedule("ou");
    Eigen::VectorXd x0(3);
    x0 << 1.0, -2.0, 0.5;

    SUBCASE("zero noise gives the scaled mean and zero target") {
        const auto [x_t, target] = perturb(sched, x0, 0.3, Eigen::VectorXd::Zero(3));
        CHECK((x_t - sched.alpha(0.3) * x0).cwiseAbs().maxCoeff() < 1e-14);
        CHECK(target.cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("large time drives the sample to pure noise") {
        NoiseSchedule wide = sched;
        wide.t_max = 20.0;
        Eigen::VectorXd noise(3);
        noise << 0.2, -0.7, 1.1;
        const auto [x_t, target] = perturb(wide, x0, 15.0, noise);
        CHECK((x_t - noise).cwiseAbs().maxCoeff() < 1e-5);
    }

    SUBCASE("target equals the analytic conditional score") {
        Eigen::VectorXd noise(3);
        noise << 0.3, 0.1, -0.9;
        for (double t : {0.05, 0.4, 1.0}) {
            const auto [x_t, target] = perturb(sched, x0, t, noise);
            const Eigen::VectorXd analytic =
                -(x_t - sched.alpha(t) * x0) / sched.sigma2(t);
            CHECK((target - analytic).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("zero sigma is rejected") {
        CHECK_THROWS_WITH(perturb(sched, x0, 0.0, Eigen::VectorXd::Zero(3)),
                          doctest::Contains("undefined at t=0"));
    }
}

TEST_CASE("make_schedule accepts the five names and rejects others") {
    for (const auto& name : kNames) CHECK(make_schedule(name).name() == name);
    CHECK_THROWS(make_schedule("linear"));
}
