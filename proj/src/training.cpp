#include "subdiff/training.hpp"

#include <algorithm>
#include <atomic>
#if defined(__GLIBC__)
#include <malloc.h>
#endif
#include <bit>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace subdiff {

void TrainConfig::validate() const {
    if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
    if (lr <= 0.0 && steps > 1) throw std::invalid_argument("config: lr must be positive");
    if (lr < 0.0) throw std::invalid_argument("config: lr must be nonnegative");
    if (lambda_r < 0.0) throw std::invalid_argument("config: lambda_r must be nonnegative");
    if (batch < 0) throw std::invalid_argument("config: batch must be nonnegative");
    if (t_samples_per_point < 1) throw std::invalid_argument("config: t_samples_per_point >= 1");
    if (pretrain_style_steps < 0) throw std::invalid_argument("config: pretrain_style_steps >= 0");
    make_schedule(schedule_name);
}

LossTerms mixing_loss_terms(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                            const Eigen::MatrixXd& out_z, const Eigen::MatrixXd& out_g,
                            const Eigen::MatrixXd& target, double lambda_r, MixingGrads* grads) {
    const int n = static_cast<int>(target.cols());
    const int d_z = static_cast<int>(out_z.rows());
    const int d_g = static_cast<int>(out_g.rows());
    if (n == 0) throw std::invalid_argument("loss: empty batch");
    if (out_z.cols() != n || out_g.cols() != n || u.cols() != d_z || v.cols() != d_g)
        throw std::invalid_argument("loss: dimension mismatch");

    const Eigen::MatrixXd e0 = u * out_z + v * out_g - target;
    const Eigen::MatrixXd er = v * out_g - target;
    Eigen::MatrixXd c(d_z + d_g, n);
    c.topRows(d_z) = out_z;
    c.bottomRows(d_g) = out_g;
    Eigen::MatrixXd ut(u.rows(), d_z + d_g);
    ut.leftCols(d_z) = u;
    ut.rightCols(d_g) = v;
    const Eigen::MatrixXd second_moment = (c * c.transpose()) / n;
    const Eigen::MatrixXd d = ut.transpose() * ut - second_moment;
    const Eigen::MatrixXd mg = (out_g * out_g.transpose()) / n;
    const Eigen::MatrixXd dg = v.transpose() * v - mg;

    LossTerms terms;
    terms.l0 = e0.squaredNorm() / n;
    terms.lr = er.squaredNorm() / n;
    terms.lb = d.squaredNorm() + lambda_r * dg.squaredNorm();

    if (grads) {
        // Gradients of 2 L0 + 2 lambda_r Lr + 0.5 Lb, exact for this
        // Monte-Carlo estimator, including through the empirical second
        // moments of the balancing loss.
        grads->upstream = (4.0 / n) * e0;
        const Eigen::MatrixXd ut_d = ut * d;
        grads->du = grads->upstream * out_z.transpose() + 2.0 * ut_d.leftCols(d_z);
        grads->dv = grads->upstream * out_g.transpose() +
                    (4.0 * lambda_r / n) * (er * out_g.transpose()) + 2.0 * ut_d.rightCols(d_g) +
                    2.0 * lambda_r * (v * dg);
        const Eigen::MatrixXd dc = (-2.0 / n) * (d * c);
        grads->d_out_z = u.transpose() * grads->upstream + dc.topRows(d_z);
        grads->d_out_g = v.transpose() * grads->upstream +
                         (4.0 * lambda_r / n) * (v.transpose() * er) + dc.bottomRows(d_g) -
                         (2.0 * lambda_r / n) * (dg * out_g);
    }
    return terms;
}

namespace {

// Pretraining objective for the style branch alone: 2 Lr + 0.5 |V^T V - M_G|^2,
// independent of lambda_r so the warm start is identical across ablations.
LossTerms style_loss_terms(const Eigen::MatrixXd& v, const Eigen::MatrixXd& out_g,
                           const Eigen::MatrixXd& target, Eigen::MatrixXd* dv,
                           Eigen::MatrixXd* d_out_g) {
    const int n = static_cast<int>(target.cols());
    const Eigen::MatrixXd er = v * out_g - target;
    const Eigen::MatrixXd mg = (out_g * out_g.transpose()) / n;
    const Eigen::MatrixXd dg = v.transpose() * v - mg;
    LossTerms terms;
    terms.lr = er.squaredNorm() / n;
    terms.lb = dg.squaredNorm();
    if (dv) {
        *dv = (4.0 / n) * (er * out_g.transpose()) + 2.0 * (v * dg);
        *d_out_g = (4.0 / n) * (v.transpose() * er) - (2.0 / n) * (dg * out_g);
    }
    return terms;
}

struct Batch {
    Eigen::MatrixXd x_t;     // d_X x m, noised points
    Eigen::MatrixXd g;       // d_G x m, style coordinates of noised points
    Eigen::VectorXd t;       // m
    Eigen::MatrixXd target;  // d_X x m, s* (oracle) or denoising target
};

Batch draw_batch(const Eigen::MatrixXd& data_x, const LatentSubspaceGMM* model,
                 const NoiseSchedule& sched, const TrainConfig& cfg, Rng& rng) {
    const int n = static_cast<int>(data_x.rows());
    if (n == 0) throw std::invalid_argument("loss: empty batch");
    if (cfg.target_mode == TargetMode::Oracle && model == nullptr)
        throw std::invalid_argument("loss: ORACLE mode requires a ground-truth model");
    if (model == nullptr) throw std::invalid_argument("loss: model required for the style function");
    const int d_x = static_cast<int>(data_x.cols());
    const int m = n * cfg.t_samples_per_point;

    Batch b;
    b.t.resize(m);
    std::uniform_real_distribution<double> unif_t(sched.t_min, sched.t_max);
    for (int i = 0; i < m; ++i) b.t(i) = unif_t(rng);

    std::normal_distribution<double> normal;
    Eigen::MatrixXd noise(d_x, m);
    for (int i = 0; i < m; ++i)
        for (int r = 0; r < d_x; ++r) noise(r, i) = normal(rng);

    Eigen::VectorXd alpha(m), sigma(m);
    for (int i = 0; i < m; ++i) {
        const auto [a, s] = sched.coeffs(b.t(i));
        alpha(i) = a;
        sigma(i) = s;
    }
    b.x_t.resize(d_x, m);
    for (int i = 0; i < m; ++i) b.x_t.col(i) = data_x.row(i % n).transpose();
    b.x_t = b.x_t.array().rowwise() * alpha.transpose().array() +
            noise.array().rowwise() * sigma.transpose().array();
    b.target.resize(d_x, m);
    if (cfg.target_mode == TargetMode::Denoising)
        b.target = -(noise.array().rowwise() / sigma.transpose().array());
    b.g.noalias() = model->a_g.columns.transpose() * b.x_t;
    if (cfg.target_mode == TargetMode::Oracle) {
        for (int i = 0; i < m; ++i) {
            const auto [a, s] = sched.coeffs(b.t(i));
            const double s2 = s * s;
            b.target.col(i) =
                model->a_z.columns *
                    mixture_noisy_score(model->content,
                                        model->a_z.columns.transpose() * b.x_t.col(i), a, s2) +
                model->a_g.columns * mixture_noisy_score(model->style, b.g.col(i), a, s2);
        }
    }
    return b;
}

// Blocked, fused forward/backward over the hidden layer. At full batch the
// d_H x m activation matrices dominate memory traffic; processing column
// blocks keeps them cache-resident, and the backward phase recomputes each
// block's activation with one cheap GEMM instead of streaming a stored copy.
constexpr int kBlockCols = 128;

struct FusedWorkspace {
    Eigen::MatrixXd in_z, in_g;    // branch inputs with time embeddings
    Eigen::MatrixXd out_z, out_g;  // branch outputs
    Eigen::MatrixXd act, d_pre;    // d_H x block scratch
};

FusedWorkspace& workspace() {
    static thread_local FusedWorkspace ws;
    return ws;
}

void build_branch_inputs(const DualScoreNet& net, const Batch& b, FusedWorkspace& ws) {
    const auto& d = net.dims;
    const int m = static_cast<int>(b.t.size());
    ws.in_z.resize(d.d_x + 2 * d.d_t, m);
    ws.in_g.resize(d.d_g + 2 * d.d_t, m);
    ws.in_z.topRows(d.d_x) = b.x_t;
    ws.in_g.topRows(d.d_g) = b.g;
    const Eigen::MatrixXd phase = (2.0 * M_PI) * (net.emb.omega * b.t.transpose());
    ws.in_z.middleRows(d.d_x, d.d_t) = phase.array().sin().matrix();
    ws.in_z.bottomRows(d.d_t) = phase.array().cos().matrix();
    ws.in_g.middleRows(d.d_g, d.d_t) = ws.in_z.middleRows(d.d_x, d.d_t);
    ws.in_g.bottomRows(d.d_t) = ws.in_z.bottomRows(d.d_t);
}

void fused_branch_forward(const TwoLayerBranch& br, const Eigen::MatrixXd& in,
                          Eigen::MatrixXd& out, Eigen::MatrixXd& act) {
    const int m = static_cast<int>(in.cols());
    out.resize(br.w2.rows(), m);
    const double c = br.scale();
    for (int c0 = 0; c0 < m; c0 += kBlockCols) {
        const int bc = std::min(kBlockCols, m - c0);
        act.resize(br.d_hidden(), bc);
        act.noalias() = br.w1.transpose() * in.middleCols(c0, bc);
        act = act.cwiseMax(0.0);
        out.middleCols(c0, bc).noalias() = c * (br.w2 * act);
    }
}

void fused_branch_backward(const TwoLayerBranch& br, const Eigen::MatrixXd& in,
                           const Eigen::MatrixXd& d_out, Eigen::MatrixXd& dw1,
                           Eigen::MatrixXd& dw2, Eigen::MatrixXd& act, Eigen::MatrixXd& d_pre) {
    const int m = static_cast<int>(in.cols());
    dw1 = Eigen::MatrixXd::Zero(br.w1.rows(), br.w1.cols());
    dw2 = Eigen::MatrixXd::Zero(br.w2.rows(), br.w2.cols());
    for (int c0 = 0; c0 < m; c0 += kBlockCols) {
        const int bc = std::min(kBlockCols, m - c0);
        act.resize(br.d_hidden(), bc);
        act.noalias() = br.w1.transpose() * in.middleCols(c0, bc);
        act = act.cwiseMax(0.0);
        dw2.noalias() += d_out.middleCols(c0, bc) * act.transpose();
        d_pre.resize(br.d_hidden(), bc);
        d_pre.noalias() = br.w2.transpose() * d_out.middleCols(c0, bc);
        // ReLU mask; subgradient at exactly 0 is 0.
        d_pre.array() *= (act.array() > 0.0).cast<double>();
        dw1.noalias() += in.middleCols(c0, bc) * d_pre.transpose();
    }
    const double c = br.scale();
    dw1 *= c;
    dw2 *= c;
}

}  // namespace

LossEval loss_terms(const DualScoreNet& net, const Eigen::MatrixXd& data_x,
                    const LatentSubspaceGMM* model, const NoiseSchedule& sched,
                    const TrainConfig& cfg, Rng& rng, bool want_grads) {
    Batch b = draw_batch(data_x, model, sched, cfg, rng);
    FusedWorkspace& ws = workspace();
    build_branch_inputs(net, b, ws);
    fused_branch_forward(net.branch_z, ws.in_z, ws.out_z, ws.act);
    fused_branch_forward(net.branch_g, ws.in_g, ws.out_g, ws.act);

    LossEval eval;
    if (want_grads) {
        MixingGrads mg;
        eval.terms =
            mixing_loss_terms(net.u, net.v, ws.out_z, ws.out_g, b.target, cfg.lambda_r, &mg);
        eval.grads.du = std::move(mg.du);
        eval.grads.dv = std::move(mg.dv);
        fused_branch_backward(net.branch_z, ws.in_z, mg.d_out_z, eval.grads.dw1z,
                              eval.grads.dw2z, ws.act, ws.d_pre);
        fused_branch_backward(net.branch_g, ws.in_g, mg.d_out_g, eval.grads.dw1g,
                              eval.grads.dw2g, ws.act, ws.d_pre);
    } else {
        eval.terms =
            mixing_loss_terms(net.u, net.v, ws.out_z, ws.out_g, b.target, cfg.lambda_r, nullptr);
    }
    return eval;
}

void adam_step(Eigen::MatrixXd& param, const Eigen::MatrixXd& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
    if (grad.rows() != param.rows() || grad.cols() != param.cols())
        throw std::invalid_argument("adam: shape mismatch");
    if (state.step == 0) {
        state.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
        state.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    }
    ++state.step;
    state.m = beta1 * state.m + (1.0 - beta1) * grad;
    state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    param.array() -=
        lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + eps);
}

namespace {

struct Optimizer {
    const TrainConfig& cfg;
    AdamState s_u, s_v, s_w1z, s_w2z, s_w1g, s_w2g;

    void step_style(DualScoreNet& net, const Eigen::MatrixXd& dv, const Eigen::MatrixXd& dw1g,
                    const Eigen::MatrixXd& dw2g) {
        apply(net.v, dv, s_v);
        apply(net.branch_g.w1, dw1g, s_w1g);
        apply(net.branch_g.w2, dw2g, s_w2g);
    }
    void step_all(DualScoreNet& net, const Gradients& g) {
        apply(net.u, g.du, s_u);
        apply(net.v, g.dv, s_v);
        apply(net.branch_z.w1, g.dw1z, s_w1z);
        apply(net.branch_z.w2, g.dw2z, s_w2z);
        apply(net.branch_g.w1, g.dw1g, s_w1g);
        apply(net.branch_g.w2, g.dw2g, s_w2g);
    }
    void apply(Eigen::MatrixXd& p, const Eigen::MatrixXd& g, AdamState& st) {
        if (cfg.optimizer == OptimizerKind::Adam)
            adam_step(p, g, st, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        else
            p -= cfg.lr * g;
    }
};

Eigen::MatrixXd take_minibatch(const Eigen::MatrixXd& data_x, int batch, Rng& rng) {
    const int n = static_cast<int>(data_x.rows());
    if (batch <= 0 || batch >= n) return data_x;
    std::uniform_int_distribution<int> pick(0, n - 1);
    Eigen::MatrixXd mb(batch, data_x.cols());
    for (int i = 0; i < batch; ++i) mb.row(i) = data_x.row(pick(rng));
    return mb;
}

}  // namespace

TrainResult train(const LatentSubspaceGMM& model, const Eigen::MatrixXd& data_x,
                  DualScoreNet& net, const TrainConfig& cfg) {
#if defined(__GLIBC__)
    // The step loop allocates multi-megabyte temporaries every iteration;
    // keep them on the heap instead of mmap so they are reused rather than
    // unmapped and re-faulted each step.
    [[maybe_unused]] static const int once = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return 0;
    }();
#endif
    cfg.validate();
    if (data_x.cols() != model.d_x()) throw std::invalid_argument("train: data dimension mismatch");
    const NoiseSchedule sched = make_schedule(cfg.schedule_name);
    TrainResult res;
    Rng rng = make_rng(cfg.seed, "train-noise");

    // Phase 1: optional style-branch warm start on (V, branch_g).
    Optimizer pre_opt{cfg};
    for (int step = 0; step < cfg.pretrain_style_steps; ++step) {
        const Eigen::MatrixXd mb = take_minibatch(data_x, cfg.batch, rng);
        Batch b = draw_batch(mb, &model, sched, cfg, rng);
        FusedWorkspace& ws = workspace();
        build_branch_inputs(net, b, ws);
        fused_branch_forward(net.branch_g, ws.in_g, ws.out_g, ws.act);
        Eigen::MatrixXd dv, d_out_g;
        LossTerms terms = style_loss_terms(net.v, ws.out_g, b.target, &dv, &d_out_g);
        if (!std::isfinite(terms.lr + terms.lb)) {
            res.ok = false;
            std::ostringstream msg;
            msg << "NaN loss during style pretraining at step " << step;
            res.message = msg.str();
            return res;
        }
        Eigen::MatrixXd dw1g, dw2g;
        fused_branch_backward(net.branch_g, ws.in_g, d_out_g, dw1g, dw2g, ws.act, ws.d_pre);
        pre_opt.step_style(net, dv, dw1g, dw2g);
    }

    // Phase 2: joint optimization of the full objective.
    Optimizer opt{cfg};
    const int log_every = std::max(1, cfg.steps / 200);
    for (int step = 0; step < cfg.steps; ++step) {
        const Eigen::MatrixXd mb = take_minibatch(data_x, cfg.batch, rng);
        LossEval eval = loss_terms(net, mb, &model, sched, cfg, rng, true);
        const double total = eval.terms.total(cfg.lambda_r);
        if (!std::isfinite(total)) {
            res.ok = false;
            std::ostringstream msg;
            msg << "NaN loss at step " << step << " (L0=" << eval.terms.l0
                << " Lr=" << eval.terms.lr << " Lb=" << eval.terms.lb << ")";
            res.message = msg.str();
            return res;
        }
        opt.step_all(net, eval.grads);
        if ((step + 1) % log_every == 0 || step + 1 == cfg.steps) {
            const double err = subspace_recovery_error(net.u, net.v, model.a_z, model.a_g);
            res.history.records.push_back(
                {step + 1, total, eval.terms.l0, eval.terms.lr, eval.terms.lb, err});
        }
    }
    return res;
}

std::uint64_t sweep_cell_seed(std::uint64_t base, std::string_view schedule, double lambda_r,
                              int n, int trial) {
    return stream_seed(base, "sweep-cell",
                       {stream_seed(0, schedule), std::bit_cast<std::uint64_t>(lambda_r),
                        static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)});
}

std::uint64_t sweep_data_seed(std::uint64_t base, int n, int trial) {
    return stream_seed(base, "sweep-data",
                       {static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial)});
}

SweepReport sweep(const LatentSubspaceGMM& model, const std::vector<std::string>& schedules,
                  const std::vector<double>& lambdas, const std::vector<int>& ns, int trials,
                  const TrainConfig& base_cfg, const NetDims& dims, int jobs) {
    if (schedules.empty() || lambdas.empty() || ns.empty() || trials < 1)
        throw std::invalid_argument("sweep: empty grid");
    SweepReport report;
    for (const auto& sched : schedules)
        for (double lam : lambdas)
            for (int n : ns)
                for (int trial = 0; trial < trials; ++trial) {
                    SweepRow row;
                    row.schedule = sched;
                    row.lambda_r = lam;
                    row.n = n;
                    row.trial = trial;
                    row.seed = sweep_cell_seed(base_cfg.seed, sched, lam, n, trial);
                    row.steps = base_cfg.steps;
                    report.rows.push_back(row);
                }

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= report.rows.size()) return;
            SweepRow& row = report.rows[i];
            try {
                const SampleSet data =
                    sample(model, row.n, sweep_data_seed(base_cfg.seed, row.n, row.trial));
                TrainConfig cfg = base_cfg;
                cfg.schedule_name = row.schedule;
                cfg.lambda_r = row.lambda_r;
                cfg.seed = stream_seed(row.seed, "train");
                DualScoreNet net = init_net(dims, stream_seed(row.seed, "net"));
                TrainResult result = train(model, data.x, net, cfg);
                if (!result.ok) {
                    row.status = "failed: " + result.message;
                    continue;
                }
                const HistoryRecord& last = result.history.records.back();
                row.final_l0 = last.l0;
                row.final_lr = last.lr;
                row.final_lb = last.lb;
                row.final_error = last.subspace_error;
            } catch (const std::exception& e) {
                row.status = std::string("failed: ") + e.what();
            }
        }
    };
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.schedule, a.lambda_r, a.n, a.trial) <
               std::tie(b.schedule, b.lambda_r, b.n, b.trial);
    });
    return report;
}

}  // namespace subdiff
