#include "subdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

#include "subdiff/rng.hpp"
#include "subdiff/sampler.hpp"
#include "subdiff/subspaces.hpp"

namespace subdiff {

namespace {

double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x, inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
    return result;
}

double max_norm_dist(const Eigen::MatrixXd& m, int i, int j) {
    return (m.row(i) - m.row(j)).cwiseAbs().maxCoeff();
}

// Count of points with |v - center| < radius (strict), minus the point itself.
// Binary search gives an approximate window; the boundary is refined with the
// exact |v - center| predicate so results match a direct scan bit-for-bit.
int strict_count(const std::vector<double>& sorted, double center, double radius) {
    auto inside = [&](double v) { return std::abs(v - center) < radius; };
    long lo = std::lower_bound(sorted.begin(), sorted.end(), center - radius) - sorted.begin();
    while (lo > 0 && inside(sorted[lo - 1])) --lo;
    while (lo < static_cast<long>(sorted.size()) && !inside(sorted[lo])) ++lo;
    long hi = std::upper_bound(sorted.begin(), sorted.end(), center + radius) - sorted.begin();
    while (hi < static_cast<long>(sorted.size()) && inside(sorted[hi])) ++hi;
    while (hi > lo && !inside(sorted[hi - 1])) --hi;
    return static_cast<int>(std::max<long>(hi - lo - 1, 0));
}

void warn_duplicates(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const int n = static_cast<int>(a.rows());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto row_less = [&](int i, int j) {
        for (int c = 0; c < a.cols(); ++c)
            if (a(i, c) != a(j, c)) return a(i, c) < a(j, c);
        for (int c = 0; c < b.cols(); ++c)
            if (b(i, c) != b(j, c)) return b(i, c) < b(j, c);
        return false;
    };
    std::sort(order.begin(), order.end(), row_less);
    int dup = 0;
    for (int i = 1; i < n; ++i)
        if (!row_less(order[i - 1], order[i]) && !row_less(order[i], order[i - 1])) ++dup;
    if (dup > n / 10)
        std::cerr << "warning: mi_knn: " << dup << "/" << n
                  << " duplicate points; KSG estimate may degenerate\n";
}

}  // namespace

double mi_knn(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int k) {
    const int n = static_cast<int>(a.rows());
    if (b.rows() != n) throw std::invalid_argument("mi_knn: sample count mismatch");
    if (k < 1 || n <= k) throw std::invalid_argument("mi_knn: need n > k >= 1");
    warn_duplicates(a, b);

    std::vector<double> eps(n);
    if (a.cols() == 1 && b.cols() == 1) {
        // Sorted-scan k-NN for the scalar-scalar case; avoids the O(n^2)
        // distance pass at the n = 1e5 scale.
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int i, int j) { return a(i, 0) < a(j, 0); });
        std::vector<int> pos(n);
        for (int r = 0; r < n; ++r) pos[order[r]] = r;
        for (int i = 0; i < n; ++i) {
            const int r = pos[i];
            std::priority_queue<double> best;  // max-heap of current k smallest
            int lo = r - 1, hi = r + 1;
            while (true) {
                int j = -1;
                double da;
                const double da_lo =
                    lo >= 0 ? a(i, 0) - a(order[lo], 0) : std::numeric_limits<double>::infinity();
                const double da_hi =
                    hi < n ? a(order[hi], 0) - a(i, 0) : std::numeric_limits<double>::infinity();
                if (da_lo <= da_hi) {
                    if (lo < 0) break;
                    j = order[lo--];
                    da = da_lo;
                } else {
                    j = order[hi++];
                    da = da_hi;
                }
                if (static_cast<int>(best.size()) == k && da >= best.top()) break;
                const double d = std::max(da, std::abs(b(i, 0) - b(j, 0)));
                if (static_cast<int>(best.size()) < k)
                    best.push(d);
                else if (d < best.top()) {
                    best.pop();
                    best.push(d);
                }
            }
            eps[i] = best.top();
        }
    } else {
        std::vector<double> dist(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j)
                dist[j] = j == i ? std::numeric_limits<double>::infinity()
                                 : std::max(max_norm_dist(a, i, j), max_norm_dist(b, i, j));
            std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
            eps[i] = dist[k - 1];
        }
    }

    double acc = 0.0;
    if (a.cols() == 1 && b.cols() == 1) {
        std::vector<double> sa(n), sb(n);
        for (int i = 0; i < n; ++i) sa[i] = a(i, 0), sb[i] = b(i, 0);
        std::sort(sa.begin(), sa.end());
        std::sort(sb.begin(), sb.end());
        for (int i = 0; i < n; ++i)
            acc += digamma(strict_count(sa, a(i, 0), eps[i]) + 1) +
                   digamma(strict_count(sb, b(i, 0), eps[i]) + 1);
    } else {
        for (int i = 0; i < n; ++i) {
            int na = 0, nb = 0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                if (max_norm_dist(a, i, j) < eps[i]) ++na;
                if (max_norm_dist(b, i, j) < eps[i]) ++nb;
            }
            acc += digamma(na + 1) + digamma(nb + 1);
        }
    }
    return digamma(k) + digamma(n) - acc / n;
}

double tv_histogram(const Eigen::MatrixXd& p_samples, const Eigen::MatrixXd& q_samples,
                    int bins_per_dim) {
    const int d = static_cast<int>(p_samples.cols());
    if (q_samples.cols() != d) throw std::invalid_argument("tv_histogram: dimension mismatch");
    if (d > 3)
        throw std::invalid_argument(
            "tv_histogram: dimension > 3; project to a low-dimensional marginal first");
    if (bins_per_dim < 1) throw std::invalid_argument("tv_histogram: bins_per_dim must be >= 1");
    if (p_samples.rows() == 0 || q_samples.rows() == 0)
        throw std::invalid_argument("tv_histogram: empty sample set");

    Eigen::VectorXd lo(d), hi(d);
    for (int c = 0; c < d; ++c) {
        lo(c) = std::min(p_samples.col(c).minCoeff(), q_samples.col(c).minCoeff());
        hi(c) = std::max(p_samples.col(c).maxCoeff(), q_samples.col(c).maxCoeff());
        if (hi(c) <= lo(c)) hi(c) = lo(c) + 1.0;  // all mass in one bin
    }
    long total_bins = 1;
    for (int c = 0; c < d; ++c) total_bins *= bins_per_dim;
    std::vector<double> p_hist(total_bins, 0.0), q_hist(total_bins, 0.0);
    auto bin_of = [&](const Eigen::MatrixXd& m, int i) {
        long idx = 0;
        for (int c = 0; c < d; ++c) {
            int b = static_cast<int>((m(i, c) - lo(c)) / (hi(c) - lo(c)) * bins_per_dim);
            b = std::clamp(b, 0, bins_per_dim - 1);
            idx = idx * bins_per_dim + b;
        }
        return idx;
    };
    for (int i = 0; i < p_samples.rows(); ++i) p_hist[bin_of(p_samples, i)] += 1.0;
    for (int i = 0; i < q_samples.rows(); ++i) q_hist[bin_of(q_samples, i)] += 1.0;
    double tv = 0.0;
    for (long b = 0; b < total_bins; ++b)
        tv += std::abs(p_hist[b] / p_samples.rows() - q_hist[b] / q_samples.rows());
    return 0.5 * tv;
}

namespace {

// Quantile bin edges over a scalar sample.
std::vector<double> quantile_edges(std::vector<double> values, int bins) {
    std::sort(values.begin(), values.end());
    std::vector<double> edges(bins + 1);
    for (int b = 0; b <= bins; ++b) {
        const size_t idx = std::min(values.size() - 1, b * values.size() / bins);
        edges[b] = values[idx];
    }
    edges.front() = -std::numeric_limits<double>::infinity();
    edges.back() = std::numeric_limits<double>::infinity();
    return edges;
}

int bin_index(const std::vector<double>& edges, double v) {
    const int b =
        static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) - edges.begin()) - 1;
    return std::clamp(b, 0, static_cast<int>(edges.size()) - 2);
}

double binned_conditional_tv(const std::vector<double>& cond, const std::vector<double>& p_vals,
                             const std::vector<double>& q_vals, int cond_bins, int tv_bins) {
    const auto edges = quantile_edges(cond, cond_bins);
    double tv_sum = 0.0;
    int used = 0;
    for (int b = 0; b < cond_bins; ++b) {
        std::vector<double> p, q;
        for (size_t i = 0; i < cond.size(); ++i)
            if (bin_index(edges, cond[i]) == b) {
                p.push_back(p_vals[i]);
                q.push_back(q_vals[i]);
            }
        if (p.size() < 10) continue;
        Eigen::MatrixXd pm(static_cast<int>(p.size()), 1), qm(static_cast<int>(q.size()), 1);
        for (size_t i = 0; i < p.size(); ++i) pm(static_cast<int>(i), 0) = p[i];
        for (size_t i = 0; i < q.size(); ++i) qm(static_cast<int>(i), 0) = q[i];
        tv_sum += tv_histogram(pm, qm, tv_bins);
        ++used;
    }
    return used > 0 ? tv_sum / used : 0.0;
}

}  // namespace

DisentanglementReport evaluate(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
                               const LatentSubspaceGMM& model, const SampleSet& eval_data,
                               const EvalConfig& cfg) {
    const int n = eval_data.size();
    if (n < 10 * cfg.knn_k) throw std::invalid_argument("evaluate: need at least 10*k samples");
    DisentanglementReport report;
    report.n_eval = n;
    report.recovery_error = subspace_recovery_error(u, v, model.a_z, model.a_g);

    // MI of P_U X is computed in the coordinates of an orthonormal basis of
    // R(U); KSG is undefined on the rank-deficient ambient representation.
    const Eigen::MatrixXd q_u = column_space_basis(u);
    const Eigen::MatrixXd z_coords = eval_data.x * q_u;
    const Eigen::MatrixXd g_coords = eval_data.x * model.a_g.columns;
    report.mi_zg = std::max(0.0, mi_knn(z_coords, g_coords, cfg.knn_k));

    const Eigen::MatrixXd p_u = q_u * q_u.transpose();
    const Eigen::MatrixXd p_v = projection(v);
    report.reconstruction_gap =
        (p_u + p_v - Eigen::MatrixXd::Identity(model.d_x(), model.d_x())).norm();

    if (cfg.with_editability) {
        const NoiseSchedule sched = make_schedule("ou");
        const double t0 = edit_t0(cfg.edit_delta);
        const double t1 = edit_t1(cfg.edit_delta);
        const double sigma_t0 = std::sqrt(sched.sigma2(std::max(t0, sched.t_min)));
        const int n_src = std::min(cfg.edit_sources, n);
        Rng rng = make_rng(cfg.seed, "evaluate-edit");
        std::normal_distribution<double> normal;
        std::uniform_real_distribution<double> unif01(0.0, 1.0);

        std::vector<double> cond(n_src), edited(n_src), reference(n_src);
        SamplerConfig scfg;
        scfg.n_steps = cfg.edit_steps;
        scfg.n_samples = 1;
        for (int i = 0; i < n_src; ++i) {
            const Eigen::VectorXd x = eval_data.x.row(i).transpose();
            Eigen::VectorXd z_hat = p_u * x;
            for (int j = 0; j < z_hat.size(); ++j) z_hat(j) += sigma_t0 * normal(rng);
            // Resampled style from the model's style mixture.
            double w = unif01(rng);
            int comp = 0;
            while (comp + 1 < model.style.components() && w >= model.style.weights(comp))
                w -= model.style.weights(comp), ++comp;
            Eigen::VectorXd g_new_coords = model.style.means.row(comp).transpose();
            for (int j = 0; j < g_new_coords.size(); ++j)
                g_new_coords(j) += std::sqrt(model.style.variance) * normal(rng);
            const Eigen::VectorXd g_new = model.a_g.columns * g_new_coords;

            scfg.seed = stream_seed(cfg.seed, "edit-sample", {static_cast<std::uint64_t>(i)});
            const Eigen::MatrixXd generated =
                edit_sample(p_u, p_v, z_hat, g_new, sched, scfg, std::max(t1, sched.t_min));
            edited[i] = (model.a_z.columns.transpose() * generated.row(0).transpose())(0);
            // Reference law: the forward process at the stop time t1, which is
            // what the conditional reverse sampler targets on the content part.
            const double t1c = std::max(t1, sched.t_min);
            const double sigma_t1 = std::sqrt(sched.sigma2(t1c));
            Eigen::VectorXd x_smooth = sched.alpha(t1c) * x;
            for (int j = 0; j < x_smooth.size(); ++j) x_smooth(j) += sigma_t1 * normal(rng);
            reference[i] = (model.a_z.columns.transpose() * x_smooth)(0);
            cond[i] = eval_data.z(i, 0);
        }
        report.editability_tv =
            binned_conditional_tv(cond, edited, reference, cfg.content_bins, cfg.tv_bins);
    }
    return report;
}

Example1Result example1_simulation(int n, std::uint64_t seed) {
    if (n < 1000) throw std::invalid_argument("example1: need n >= 1000");
    Rng rng = make_rng(seed, "example1");
    std::normal_distribution<double> normal;
    Eigen::MatrixXd z(n, 1), g(n, 1), z_hat(n, 1), recon(n, 1);
    std::vector<double> cond(n), rec(n), truth(n);
    int flips = 0;
    for (int i = 0; i < n; ++i) {
        z(i, 0) = normal(rng);
        g(i, 0) = normal(rng);
        const double sg = g(i, 0) >= 0.0 ? 1.0 : -1.0;
        z_hat(i, 0) = z(i, 0) * sg;
        const double g_prime = normal(rng);
        const double sgp = g_prime >= 0.0 ? 1.0 : -1.0;
        recon(i, 0) = z_hat(i, 0) * sgp;  // first coordinate of f(zhat*sgn(ghat'), ghat')
        if ((recon(i, 0) >= 0.0) != (z(i, 0) >= 0.0)) ++flips;
        cond[i] = z(i, 0);
        rec[i] = recon(i, 0);
        truth[i] = z(i, 0);
    }
    Example1Result res;
    res.mi_hat = mi_knn(z_hat, g, 5);
    res.flip_rate = static_cast<double>(flips) / n;
    res.tv_hat = binned_conditional_tv(cond, rec, truth, 10, 100);
    return res;
}

}  // namespace subdiff
