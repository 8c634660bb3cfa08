#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "subdiff/lsgmm.hpp"
#include "subdiff/metrics.hpp"
#include "subdiff/rng.hpp"
#include "subdiff/subspaces.hpp"

using namespace subdiff;

namespace {

Eigen::MatrixXd normal_samples(int n, int d, std::uint64_t seed) {
    Rng rng = make_rng(seed, "metric-samples");
    std::normal_distribution<double> normal;
    Eigen::MatrixXd m(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = normal(rng);
    return m;
}

}  // namespace

TEST_CASE("mi estimate vanishes for independent normals") {
    const Eigen::MatrixXd a = normal_samples(5000, 1, 1);
    const Eigen::MatrixXd b = normal_samples(5000, 1, 2);
    CHECK(std::abs(mi_knn(a, b, 5)) < 0.03);
}

TEST_CASE("mi estimate matches the Gaussian closed form at rho 0.9") {
    const double rho = 0.9;
    const Eigen::MatrixXd a = normal_samples(5000, 1, 3);
    const Eigen::MatrixXd noise = normal_samples(5000, 1, 4);
    const Eigen::MatrixXd b = rho * a + std::sqrt(1.0 - rho * rho) * noise;
    const double truth = -0.5 * std::log(1.0 - rho * rho);  // 0.8304 nats
    CHECK(mi_knn(a, b, 5) == doctest::Approx(truth).epsilon(0.06));
}

TEST_CASE("self mutual information diverges with n") {
    const Eigen::MatrixXd a = normal_samples(5000, 1, 5);
    CHECK(mi_knn(a, a, 5) > 2.0);
}

TEST_CASE("mi estimate is invariant to joint permutation and monotone transforms") {
    const int n = 2000;
    const Eigen::MatrixXd a = normal_samples(n, 1, 6);
    const Eigen::MatrixXd b = 0.7 * a + 0.7 * normal_samples(n, 1, 7);
    const double base = mi_knn(a, b, 5);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng = make_rng(8, "perm");
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd ap(n, 1), bp(n, 1);
    for (int i = 0; i < n; ++i) ap(i, 0) = a(perm[i], 0), bp(i, 0) = b(perm[i], 0);
    CHECK(mi_knn(ap, bp, 5) == doctest::Approx(base).epsilon(1e-12));

    const Eigen::MatrixXd a_exp = a.array().exp().matrix();
    CHECK(std::abs(mi_knn(a_exp, b, 5) - base) < 0.05);
}

TEST_CASE("scalar fast path agrees with a brute-force reference") {
    const int n = 300, k = 4;
    const Eigen::MatrixXd a = normal_samples(n, 1, 9);
    const Eigen::MatrixXd b = 0.5 * a + normal_samples(n, 1, 10);
    // Reference KSG-1 implementation, O(n^2).
    auto digamma = [](double x) {
        double r = 0.0;
        while (x < 6.0) r -= 1.0 / x, x += 1.0;
        const double inv = 1.0 / x, inv2 = inv * inv;
        return r + std::log(x) - 0.5 * inv -
               inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
    };
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> dist;
        for (int j = 0; j < n; ++j)
            if (j != i)
                dist.push_back(std::max(std::abs(a(j, 0) - a(i, 0)), std::abs(b(j, 0) - b(i, 0))));
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        const double eps = dist[k - 1];
        int na = 0, nb = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (std::abs(a(j, 0) - a(i, 0)) < eps) ++na;
            if (std::abs(b(j, 0) - b(i, 0)) < eps) ++nb;
        }
        acc += digamma(na + 1) + digamma(nb + 1);
    }
    const double reference = digamma(k) + digamma(n) - acc / n;
    CHECK(mi_knn(a, b, k) == doctest::Approx(reference).epsilon(1e-10));
}

TEST_CASE("mi rejects degenerate sample counts") {
    const Eigen::MatrixXd a = normal_samples(4, 1, 11);
    CHECK_THROWS(mi_knn(a, a, 5));
    CHECK_THROWS(mi_knn(a, normal_samples(5, 1, 12), 2));
}

TEST_CASE("tv histogram endpoints") {
    const Eigen::MatrixXd p = normal_samples(1000, 2, 13);
    CHECK(tv_histogram(p, p, 20) == doctest::Approx(0.0));
    const Eigen::MatrixXd q = p.array() + 100.0;
    CHECK(tv_histogram(p, q, 50) == doctest::Approx(1.0));
}

TEST_CASE("tv histogram matches the Gaussian closed form") {
    const Eigen::MatrixXd p = normal_samples(100000, 1, 14);
    const Eigen::MatrixXd q = normal_samples(100000, 1, 15).array() + 1.0;
    const double truth = std::erf(0.5 / std::sqrt(2.0));  // 2 Phi(1/2) - 1 = 0.3829
    CHECK(tv_histogram(p, q, 100) == doctest::Approx(truth).epsilon(0.03));
    CHECK(std::abs(tv_histogram(p, q, 100) - truth) < 0.01);
}

TEST_CASE("tv histogram is symmetric and satisfies the triangle inequality") {
    const Eigen::MatrixXd a = normal_samples(5000, 1, 16);
    const Eigen::MatrixXd b = normal_samples(5000, 1, 17).array() + 0.5;
    const Eigen::MatrixXd c = normal_samples(5000, 1, 18).array() * 1.5;
    CHECK(tv_histogram(a, b, 40) == doctest::Approx(tv_histogram(b, a, 40)).epsilon(1e-12));
    CHECK(tv_histogram(a, c, 40) <= tv_histogram(a, b, 40) + tv_histogram(b, c, 40) + 0.01);
}

TEST_CASE("tv histogram rejects unsupported shapes") {
    const Eigen::MatrixXd wide = normal_samples(100, 4, 19);
    CHECK_THROWS_WITH(tv_histogram(wide, wide, 10), doctest::Contains("project"));
    CHECK_THROWS(tv_histogram(normal_samples(10, 1, 20), normal_samples(10, 2, 21), 10));
    CHECK_THROWS(tv_histogram(normal_samples(10, 1, 20), normal_samples(10, 1, 21), 0));
}

TEST_CASE("evaluate with perfect projectors reports independence and zero error") {
    const LatentSubspaceGMM model = default_paper_model(0);
    const SampleSet data = sample(model, 2000, 30);
    EvalConfig cfg;
    const DisentanglementReport report =
        evaluate(model.a_z.columns, model.a_g.columns, model, data, cfg);
    CHECK(report.mi_zg < 0.05);
    CHECK(report.recovery_error == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(report.reconstruction_gap < 1e-10);
    CHECK(report.n_eval == 2000);
    CHECK_FALSE(report.has_editability());
}

TEST_CASE("mixed subspaces leak information relative to perfect projectors") {
    const LatentSubspaceGMM model = default_paper_model(0);
    const SampleSet data = sample(model, 2000, 30);
    EvalConfig cfg;
    const double perfect =
        evaluate(model.a_z.columns, model.a_g.columns, model, data, cfg).mi_zg;
    Eigen::MatrixXd mixed(10, 5);
    mixed << model.a_z.columns.leftCols(3), model.a_g.columns.leftCols(2);
    const double leaky = evaluate(mixed, model.a_g.columns, model, data, cfg).mi_zg;
    CHECK(leaky > perfect);
    CHECK(leaky > 0.1);
}

TEST_CASE("evaluate demands enough samples for the knn estimator") {
    const LatentSubspaceGMM model = default_paper_model(0);
    const SampleSet data = sample(model, 20, 1);
    EvalConfig cfg;
    cfg.knn_k = 5;
    CHECK_THROWS(evaluate(model.a_z.columns, model.a_g.columns, model, data, cfg));
}

TEST_CASE("editability evaluation with true projectors yields a small tv") {
    const LatentSubspaceGMM model = default_paper_model(0);
    const SampleSet data = sample(model, 1200, 31);
    EvalConfig cfg;
    cfg.with_editability = true;
    cfg.edit_sources = 300;
    cfg.edit_steps = 120;
    cfg.tv_bins = 20;
    const DisentanglementReport report =
        evaluate(model.a_z.columns, model.a_g.columns, model, data, cfg);
    CHECK(report.has_editability());
    CHECK(report.editability_tv >= 0.0);
    CHECK(report.editability_tv <= 1.0);
    CHECK(report.editability_tv < 0.5);
}

TEST_CASE("example 1 exhibits independence without editability") {
    const Example1Result small = example1_simulation(5000, 0);
    CHECK(small.mi_hat < 0.03);
    CHECK(small.flip_rate == doctest::Approx(0.5).epsilon(0.08));
    const Example1Result big = example1_simulation(100000, 1);
    CHECK(big.flip_rate == doctest::Approx(0.5).epsilon(0.04));
    CHECK(big.tv_hat > 0.3);
    CHECK_THROWS(example1_simulation(100, 0));
}
