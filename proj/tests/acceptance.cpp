// Acceptance harness: each criterion prints one PASS/FAIL line with the
// measured values. Run with no arguments for all criteria, or with a single
// criterion number. Exit code 0 iff every executed criterion passes.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "subdiff/lsgmm.hpp"
#include "subdiff/metrics.hpp"
#include "subdiff/rng.hpp"
#include "subdiff/sampler.hpp"
#include "subdiff/training.hpp"

using namespace subdiff;

namespace {

constexpr std::uint64_t kMasterSeed = 2026;
constexpr int kHidden = 512;
constexpr int kTimeDim = 8;
constexpr int kSteps = 10000;
constexpr int kPretrain = 0;

struct RunOutcome {
    double error = 1.0;
    double l0 = 0.0, lr = 0.0, lb = 0.0, total = 0.0;
    double used_lr = 1e-5;
    bool ok = false;
    std::string note;
};

// Monte-Carlo estimate of the oracle-mode total-loss floor at the optimum:
// L0 -> 0, Lb -> 0, Lr -> E|s*_Z|^2, so total -> 2 lambda_r E|s*_Z|^2.
double loss_floor(const LatentSubspaceGMM& model, const NoiseSchedule& sched, double lambda_r,
                  std::uint64_t seed) {
    const SampleSet data = sample(model, 2000, stream_seed(seed, "floor-data"));
    Rng rng = make_rng(seed, "floor-times");
    std::uniform_real_distribution<double> unif(sched.t_min, sched.t_max);
    std::normal_distribution<double> normal;
    double acc = 0.0;
    for (int i = 0; i < data.size(); ++i) {
        const double t = unif(rng);
        const auto [a, s] = sched.coeffs(t);
        Eigen::VectorXd x = a * data.x.row(i).transpose();
        for (int j = 0; j < x.size(); ++j) x(j) += s * normal(rng);
        acc += oracle_score(model, sched, x, t).content.squaredNorm();
    }
    return 2.0 * lambda_r * acc / data.size();
}

constexpr int kProbeSteps = 2000;
const char* kCacheDir = "acceptance_cache";
const char* kCacheTag = "v1";  // bump to invalidate cached protocol runs

// The protocol learning rate is decided per (schedule, lambda_r): a
// truncated run at the reference lr 1e-5; if its loss is still above twice
// the theoretical floor after the probe, the fallback lr 1e-4 is used for
// that setting (logged). The plateau test is only certifiable when the
// floor is positive, so lambda_r = 0 always keeps the reference lr.
// Deterministic, and cached on disk so criteria that revisit a setting
// agree on the choice.
double protocol_lr(const LatentSubspaceGMM& model, const std::string& schedule, double lambda_r,
                   std::uint64_t base_seed) {
    if (lambda_r <= 0.0) return 1e-5;
    static std::map<std::pair<std::string, double>, double> memo;
    if (auto it = memo.find({schedule, lambda_r}); it != memo.end()) return it->second;
    std::filesystem::create_directories(kCacheDir);
    std::ostringstream name;
    name << kCacheDir << "/lr_" << schedule << "_lam" << lambda_r << "_" << kCacheTag << ".txt";
    const std::string file = name.str();
    if (std::ifstream in(file); in) {
        double lr = 0.0;
        if (in >> lr && (lr == 1e-5 || lr == 1e-4)) {
            memo[{schedule, lambda_r}] = lr;
            return lr;
        }
    }
    const std::uint64_t cell = sweep_cell_seed(base_seed, schedule, lambda_r, 4000, 0);
    const SampleSet data = sample(model, 4000, sweep_data_seed(base_seed, 4000, 0));
    const NoiseSchedule sched = make_schedule(schedule);
    const double floor = loss_floor(model, sched, lambda_r, cell);
    TrainConfig cfg;
    cfg.lambda_r = lambda_r;
    cfg.lr = 1e-5;
    cfg.steps = kProbeSteps;
    cfg.pretrain_style_steps = kPretrain;
    cfg.schedule_name = schedule;
    cfg.seed = stream_seed(cell, "train");
    DualScoreNet net = init_net(
        NetDims{model.d_x(), model.d_z(), model.d_g(), kHidden, kTimeDim},
        stream_seed(cell, "net"));
    const TrainResult result = train(model, data.x, net, cfg);
    double lr = 1e-5;
    if (!result.ok || result.history.records.back().total > 2.0 * floor) {
        lr = 1e-4;
        std::cout << "  note: " << schedule << " lambda_r=" << lambda_r
                  << " lr 1e-5 probe plateaued above 2x loss floor ("
                  << (result.ok ? result.history.records.back().total : -1.0) << " vs floor "
                  << floor << "); protocol continues at lr 1e-4\n";
    }
    std::ofstream(file) << std::setprecision(17) << lr << '\n';
    memo[{schedule, lambda_r}] = lr;
    return lr;
}

// One reference-protocol training run at the schedule's chosen learning rate.
// Outcomes are deterministic, so they are cached on disk and shared between
// criteria that revisit the same (schedule, lambda_r, n, trial) cell.
RunOutcome run_protocol(const LatentSubspaceGMM& model, const std::string& schedule,
                        double lambda_r, int n, int trial, std::uint64_t base_seed) {
    std::filesystem::create_directories(kCacheDir);
    std::ostringstream key;
    key << kCacheDir << "/run_" << schedule << "_lam" << lambda_r << "_n" << n << "_t" << trial
        << "_" << kCacheTag << ".txt";
    RunOutcome out;
    if (std::ifstream in(key.str()); in) {
        int ok = 0;
        if (in >> ok >> out.error >> out.l0 >> out.lr >> out.lb >> out.total >> out.used_lr) {
            out.ok = ok != 0;
            return out;
        }
    }
    const std::uint64_t cell = sweep_cell_seed(base_seed, schedule, lambda_r, n, trial);
    const SampleSet data = sample(model, n, sweep_data_seed(base_seed, n, trial));
    TrainConfig cfg;
    cfg.lambda_r = lambda_r;
    cfg.lr = protocol_lr(model, schedule, lambda_r, base_seed);
    cfg.steps = kSteps;
    cfg.pretrain_style_steps = kPretrain;
    cfg.schedule_name = schedule;
    cfg.seed = stream_seed(cell, "train");
    DualScoreNet net = init_net(
        NetDims{model.d_x(), model.d_z(), model.d_g(), kHidden, kTimeDim},
        stream_seed(cell, "net"));
    const TrainResult result = train(model, data.x, net, cfg);
    if (!result.ok) {
        out.note = result.message;
    } else {
        const HistoryRecord& last = result.history.records.back();
        out.error = last.subspace_error;
        out.l0 = last.l0;
        out.lr = last.lr;
        out.lb = last.lb;
        out.total = last.total;
        out.used_lr = cfg.lr;
        out.ok = true;
    }
    std::ofstream(key.str()) << std::setprecision(17) << (out.ok ? 1 : 0) << ' ' << out.error
                             << ' ' << out.l0 << ' ' << out.lr << ' ' << out.lb << ' '
                             << out.total << ' ' << out.used_lr << '\n';
    return out;
}

bool criterion1() {
    const LatentSubspaceGMM model = default_paper_model(kMasterSeed);
    bool pass = true;
    std::ostringstream detail;
    for (int trial = 0; trial < 4; ++trial) {
        const RunOutcome out = run_protocol(model, "ou", 3.0, 4000, trial, kMasterSeed);
        detail << (trial ? ", " : "") << "trial " << trial << ": error="
               << std::setprecision(4) << out.error << " (lr=" << out.used_lr << ")";
        if (!out.note.empty()) std::cout << "  note: " << out.note << "\n";
        pass = pass && out.ok && out.error < 0.1;
    }
    std::cout << "  " << detail.str() << "\n";
    return pass;
}

bool criterion2() {
    const LatentSubspaceGMM model = default_paper_model(kMasterSeed);
    const std::vector<double> lambdas{0.0, 0.03, 0.3, 3.0};
    std::vector<double> means;
    for (double lam : lambdas) {
        double acc = 0.0;
        for (int trial = 0; trial < 4; ++trial) {
            const RunOutcome out = run_protocol(model, "ou", lam, 4000, trial, kMasterSeed);
            if (!out.ok) return false;
            acc += out.error;
        }
        means.push_back(acc / 4.0);
        std::cout << "  lambda_r=" << lam << ": mean error=" << std::setprecision(4)
                  << means.back() << "\n";
    }
    const double at3 = means.back();
    const double min_all = *std::min_element(means.begin(), means.end());
    return at3 == min_all && means.front() - at3 >= 0.1;
}

bool criterion3() {
    const LatentSubspaceGMM model = default_paper_model(kMasterSeed);
    const std::vector<int> ns{250, 500, 1000, 2000, 4000};
    std::vector<double> means;
    for (int n : ns) {
        double acc = 0.0;
        for (int trial = 0; trial < 4; ++trial) {
            const RunOutcome out = run_protocol(model, "ou", 3.0, n, trial, kMasterSeed);
            if (!out.ok) return false;
            acc += out.error;
        }
        means.push_back(acc / 4.0);
        std::cout << "  n=" << n << ": mean error=" << std::setprecision(4) << means.back()
                  << "\n";
    }
    int violations = 0;
    for (size_t i = 1; i < means.size(); ++i)
        if (means[i] > means[i - 1]) {
            ++violations;
            if (means[i] - means[i - 1] > 0.02) return false;
        }
    return violations <= 1;
}

bool criterion4() {
    const LatentSubspaceGMM model = default_paper_model(kMasterSeed);
    bool pass = true;
    for (const std::string schedule : {"vp", "subvp", "ve", "cosvp"}) {
        const bool advisory = schedule == "ve" || schedule == "cosvp";
        bool sched_pass = true;
        std::ostringstream detail;
        for (int trial = 0; trial < 4; ++trial) {
            const RunOutcome out = run_protocol(model, schedule, 3.0, 4000, trial, kMasterSeed);
            detail << (trial ? ", " : "") << std::setprecision(4) << out.error;
            sched_pass = sched_pass && out.ok && out.error < 0.1;
        }
        std::cout << "  " << schedule << (advisory ? " (advisory)" : "") << ": errors "
                  << detail.str() << "\n";
        if (!advisory) pass = pass && sched_pass;
    }
    return pass;
}

bool criterion5() {
    const LatentSubspaceGMM model = default_paper_model(kMasterSeed);
    Rng rng = make_rng(kMasterSeed, "criterion5");
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(1e-3, 1.0);
    const double h = 1e-5;
    double worst = 0.0;
    for (const char* name : {"ou", "ve", "vp", "subvp", "cosvp"}) {
        const NoiseSchedule sched = make_schedule(name);
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::VectorXd x(10);
            for (int j = 0; j < 10; ++j) x(j) = 1.5 * normal(rng);
            const double t = unif(rng);
            const Eigen::VectorXd analytic = oracle_score(model, sched, x, t).full;
            Eigen::VectorXd fd(10);
            for (int j = 0; j < 10; ++j) {
                Eigen::VectorXd xp = x, xm = x;
                xp(j) += h;
                xm(j) -= h;
                fd(j) = (noisy_log_density(model, sched, xp, t) -
                         noisy_log_density(model, sched, xm, t)) /
                        (2.0 * h);
            }
            worst = std::max(worst, (analytic - fd).norm() / std::max(fd.norm(), 1.0));
        }
    }
    std::cout << "  worst relative error " << worst << "\n";
    return worst < 1e-4;
}

bool criterion6() {
    LatentSubspaceGMM model;
    Eigen::MatrixXd az(2, 1), ag(2, 1);
    az << 1, 0;
    ag << 0, 1;
    model.a_z = make_basis(az);
    model.a_g = make_basis(ag);
    model.content.means.resize(2, 1);
    model.content.means << -0.8, 0.8;
    model.content.weights = Eigen::Vector2d(0.5, 0.5);
    model.content.variance = 0.04;
    model.style = model.content;
    model.style.means << 0.5, -0.7;
    model.validate();

    const SampleSet data = sample(model, 16, 3);
    const NoiseSchedule sched = make_schedule("ou");
    TrainConfig cfg;
    cfg.lambda_r = 3.0;
    DualScoreNet net = init_net(NetDims{2, 1, 1, 4, 2}, 8);
    const std::uint64_t draw_seed = stream_seed(kMasterSeed, "criterion6");
    auto eval_loss = [&](const DualScoreNet& n) {
        Rng rng(draw_seed);
        return loss_terms(n, data.x, &model, sched, cfg, rng, false).terms.total(cfg.lambda_r);
    };
    Rng rng(draw_seed);
    const LossEval eval = loss_terms(net, data.x, &model, sched, cfg, rng, true);

    const double h = 1e-6;
    double worst = 0.0;
    auto check = [&](auto ref, const Eigen::MatrixXd& got) {
        for (int i = 0; i < ref(net).rows(); ++i)
            for (int j = 0; j < ref(net).cols(); ++j) {
                DualScoreNet p = net, m = net;
                ref(p)(i, j) += h;
                ref(m)(i, j) -= h;
                const double fd = (eval_loss(p) - eval_loss(m)) / (2.0 * h);
                worst = std::max(worst,
                                 std::abs(got(i, j) - fd) / std::max(std::abs(fd), 1e-2));
            }
    };
    check([](auto& n) -> Eigen::MatrixXd& { return n.u; }, eval.grads.du);
    check([](auto& n) -> Eigen::MatrixXd& { return n.v; }, eval.grads.dv);
    check([](auto& n) -> Eigen::MatrixXd& { return n.branch_z.w1; }, eval.grads.dw1z);
    check([](auto& n) -> Eigen::MatrixXd& { return n.branch_z.w2; }, eval.grads.dw2z);
    check([](auto& n) -> Eigen::MatrixXd& { return n.branch_g.w1; }, eval.grads.dw1g);
    check([](auto& n) -> Eigen::MatrixXd& { return n.branch_g.w2; }, eval.grads.dw2g);
    std::cout << "  worst relative error " << worst << "\n";
    return worst < 1e-4;
}

bool criterion7() {
    // Sign-symmetric model and sign-closed batch make the constructed optimum
    // an exact critical point of the finite-sample objective.
    LatentSubspaceGMM model;
    const auto [a_z, a_g] = orthonormal_subspace_pair(4, 2, 51);
    model.a_z = a_z;
    model.a_g = a_g;
    Eigen::RowVector2d mu_z(0.9, -0.4), mu_g(0.3, 0.7);
    model.content.means.resize(2, 2);
    model.content.means << mu_z, -mu_z;
    model.content.weights = Eigen::Vector2d(0.5, 0.5);
    model.content.variance = 0.01;
    model.style.means.resize(2, 2);
    model.style.means << mu_g, -mu_g;
    model.style.weights = Eigen::Vector2d(0.5, 0.5);
    model.style.variance = 0.01;
    model.validate();

    const NoiseSchedule sched = make_schedule("ou");
    Rng rng = make_rng(kMasterSeed, "criterion7");
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif_t(sched.t_min, sched.t_max);
    const int base = 64, n = 4 * base;
    Eigen::MatrixXd s_z(2, n), s_g(2, n);
    for (int i = 0; i < base; ++i) {
        Eigen::Vector2d z(normal(rng), normal(rng)), g(normal(rng), normal(rng));
        const double t = unif_t(rng);
        const auto [a, s] = sched.coeffs(t);
        const double s2 = s * s;
        const Eigen::VectorXd sz = mixture_noisy_score(model.content, z, a, s2);
        const Eigen::VectorXd sg = mixture_noisy_score(model.style, g, a, s2);
        s_z.col(4 * i) = sz, s_g.col(4 * i) = sg;
        s_z.col(4 * i + 1) = -sz, s_g.col(4 * i + 1) = sg;
        s_z.col(4 * i + 2) = sz, s_g.col(4 * i + 2) = -sg;
        s_z.col(4 * i + 3) = -sz, s_g.col(4 * i + 3) = -sg;
    }
    auto mat_power = [](const Eigen::MatrixXd& m, double p) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        return (es.eigenvectors() * es.eigenvalues().array().pow(p).matrix().asDiagonal() *
                es.eigenvectors().transpose())
            .eval();
    };
    const Eigen::MatrixXd c_z = mat_power((s_z * s_z.transpose()) / n, 0.25);
    const Eigen::MatrixXd c_g = mat_power((s_g * s_g.transpose()) / n, 0.25);
    MixingGrads grads;
    const LossTerms terms = mixing_loss_terms(
        model.a_z.columns * c_z, model.a_g.columns * c_g, c_z.inverse() * s_z,
        c_g.inverse() * s_g, model.a_z.columns * s_z + model.a_g.columns * s_g, 3.0, &grads);
    std::cout << "  |grad U| = " << grads.du.norm() << ", |grad V| = " << grads.dv.norm()
              << ", L0 = " << terms.l0 << ", Lb = " << terms.lb << "\n";
    return grads.du.norm() < 1e-6 && grads.dv.norm() < 1e-6;
}

bool criterion8() {
    const NoiseSchedule sched = make_schedule("ou");
    Eigen::VectorXd mu(3);
    mu << 0.8, -0.5, 0.2;
    const double s0_sq = 0.25;
    ScoreFn score = [&](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd {
        const double a = sched.alpha(t);
        const double v = a * a * s0_sq + sched.sigma2(t);
        return (a * mu - x) / v;
    };
    SamplerConfig cfg;
    cfg.n_steps = 1000;
    cfg.n_samples = 20000;
    cfg.seed = stream_seed(kMasterSeed, "criterion8");
    const Eigen::MatrixXd x = reverse_sde_sample(score, sched, cfg, 3);
    const double a_min = sched.alpha(sched.t_min);
    const double v_target = a_min * a_min * s0_sq + sched.sigma2(sched.t_min);
    bool pass = true;
    for (int j = 0; j < 3; ++j) {
        const double mean = x.col(j).mean();
        const double var = (x.col(j).array() - mean).square().mean();
        std::cout << "  coord " << j << ": mean " << mean << " (target " << a_min * mu(j)
                  << "), var " << var << " (target " << v_target << ")\n";
        pass = pass && std::abs(mean - a_min * mu(j)) < 0.05 &&
               std::abs(var - v_target) < 0.1 * v_target;
    }
    cfg.n_samples = 100;
    const Eigen::MatrixXd ode1 = probability_flow_sample(score, sched, cfg, 3);
    const Eigen::MatrixXd ode2 = probability_flow_sample(score, sched, cfg, 3);
    const bool deterministic = (ode1 == ode2);
    std::cout << "  probability-flow reruns identical: " << (deterministic ? "yes" : "no")
              << "\n";
    return pass && deterministic;
}

bool criterion9() {
    const Example1Result result = example1_simulation(100000, kMasterSeed);
    std::cout << "  mi_hat=" << result.mi_hat << ", flip_rate=" << result.flip_rate
              << ", tv_hat=" << result.tv_hat << "\n";
    return result.mi_hat < 0.03 && std::abs(result.flip_rate - 0.5) <= 0.02 &&
           result.tv_hat > 0.3;
}

bool criterion10() {
    Rng rng = make_rng(kMasterSeed, "criterion10");
    std::normal_distribution<double> normal;
    const int n = 5000;
    Eigen::MatrixXd a(n, 1), b(n, 1);
    const double rho = 0.9;
    for (int i = 0; i < n; ++i) {
        a(i, 0) = normal(rng);
        b(i, 0) = rho * a(i, 0) + std::sqrt(1.0 - rho * rho) * normal(rng);
    }
    const double mi = mi_knn(a, b, 5);
    const double mi_truth = -0.5 * std::log(1.0 - rho * rho);

    const int m = 100000;
    Eigen::MatrixXd p(m, 1), q(m, 1);
    for (int i = 0; i < m; ++i) {
        p(i, 0) = normal(rng);
        q(i, 0) = normal(rng) + 1.0;
    }
    const double tv = tv_histogram(p, q, 100);
    const double tv_truth = std::erf(0.5 / std::sqrt(2.0));
    std::cout << "  mi " << mi << " vs " << mi_truth << "; tv " << tv << " vs " << tv_truth
              << "\n";
    return std::abs(mi - mi_truth) < 0.05 && std::abs(tv - tv_truth) < 0.01;
}

}  // namespace

int main(int argc, char** argv) {
    using Criterion = bool (*)();
    const std::vector<std::pair<std::string, Criterion>> criteria{
        {"subspace recovery under the reference protocol", criterion1},
        {"style-guidance ablation over lambda_r", criterion2},
        {"error decays with sample size", criterion3},
        {"schedule robustness (vp, subvp)", criterion4},
        {"oracle score matches the log-density gradient", criterion5},
        {"objective gradients match finite differences", criterion6},
        {"constructed optimum is a critical point", criterion7},
        {"sampler fidelity on a Gaussian target", criterion8},
        {"sign-flip counterexample simulation", criterion9},
        {"MI and TV estimator calibration", criterion10},
    };

    int first = 1, last = static_cast<int>(criteria.size());
    if (argc > 1) {
        first = last = std::atoi(argv[1]);
        if (first < 1 || first > static_cast<int>(criteria.size())) {
            std::cerr << "criterion number must be in [1, " << criteria.size() << "]\n";
            return 2;
        }
    }
    bool all_pass = true;
    for (int i = first; i <= last; ++i) {
        std::cout << "criterion " << i << " (" << criteria[i - 1].first << "):\n" << std::flush;
        const bool pass = criteria[i - 1].second();
        std::cout << "criterion " << i << ": " << (pass ? "PASS" : "FAIL") << "\n" << std::flush;
        all_pass = all_pass && pass;
    }
    return all_pass ? 0 : 1;
}
