#include "subdiff/lsgmm.hpp"

#include <cmath>
#include <stdexcept>

namespace subdiff {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

void SubspaceMixture::validate() const {
    if (components() < 1) throw std::invalid_argument("mixture: need at least one component");
    if (weights.size() != components()) throw std::invalid_argument("mixture: weights/means mismatch");
    if (weights.minCoeff() < 0.0) throw std::invalid_argument("mixture: negative weight");
    if (std::abs(weights.sum() - 1.0) > 1e-12) throw std::invalid_argument("mixture: weights must sum to 1");
    if (variance < 0.0) throw std::invalid_argument("mixture: negative variance");
}

void LatentSubspaceGMM::validate() const {
    content.validate();
    style.validate();
    if (content.dim() != d_z() || style.dim() != d_g())
        throw std::invalid_argument("lsgmm: mixture dimension mismatch");
    if (d_z() + d_g() != d_x()) throw std::invalid_argument("lsgmm: subspaces must be complementary");
    if ((a_z.columns.transpose() * a_g.columns).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("lsgmm: subspaces must be orthogonal");
}

LatentSubspaceGMM default_paper_model(std::uint64_t seed) {
    const int d_x = 10, d_z = 5;
    auto [a_z, a_g] = orthonormal_subspace_pair(d_x, d_z, stream_seed(seed, "model-bases"));
    Rng rng = make_rng(seed, "model-means");
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto draw_mixture = [&](int k) {
        SubspaceMixture mix;
        mix.means.resize(2, k);
        for (int c = 0; c < 2; ++c)
            for (int j = 0; j < k; ++j) mix.means(c, j) = unif(rng);
        mix.weights = Eigen::Vector2d(0.5, 0.5);
        mix.variance = 0.01;  // sigma_0 = 0.1
        return mix;
    };
    LatentSubspaceGMM model{std::move(a_z), std::move(a_g), draw_mixture(d_z), draw_mixture(d_x - d_z)};
    model.validate();
    return model;
}

namespace {

Eigen::VectorXd draw_mixture_sample(const SubspaceMixture& mix, Rng& rng,
                                    std::normal_distribution<double>& normal,
                                    std::uniform_real_distribution<double>& unif01) {
    double u = unif01(rng);
    int c = 0;
    while (c + 1 < mix.components() && u >= mix.weights(c)) u -= mix.weights(c), ++c;
    Eigen::VectorXd v = mix.means.row(c).transpose();
    const double s0 = std::sqrt(mix.variance);
    for (int j = 0; j < v.size(); ++j) v(j) += s0 * normal(rng);
    return v;
}

}  // namespace

SampleSet sample(const LatentSubspaceGMM& model, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be positive");
    Rng rng = make_rng(seed, "lsgmm-sample");
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif01(0.0, 1.0);
    SampleSet out;
    out.z.resize(n, model.d_z());
    out.g.resize(n, model.d_g());
    out.x.resize(n, model.d_x());
    for (int i = 0; i < n; ++i) {
        out.z.row(i) = draw_mixture_sample(model.content, rng, normal, unif01).transpose();
        out.g.row(i) = draw_mixture_sample(model.style, rng, normal, unif01).transpose();
        out.x.row(i) = (model.a_z.columns * out.z.row(i).transpose() +
                        model.a_g.columns * out.g.row(i).transpose())
                           .transpose();
    }
    return out;
}

Eigen::VectorXd style_of(const LatentSubspaceGMM& model, const Eigen::VectorXd& x) {
    if (x.size() != model.d_x()) throw std::invalid_argument("style_of: dimension mismatch");
    return model.a_g.columns.transpose() * x;
}

double mixture_noisy_log_density(const SubspaceMixture& mix, const Eigen::VectorXd& coords,
                                 double alpha, double sigma2) {
    const double v = alpha * alpha * mix.variance + sigma2;
    if (v <= 0.0) throw std::invalid_argument("degenerate mixture: zero total variance");
    const int k = static_cast<int>(coords.size());
    // log-sum-exp over components; sigma_0^2 = 0.01 produces large exponents.
    Eigen::VectorXd logs(mix.components());
    for (int c = 0; c < mix.components(); ++c) {
        const double d2 = (coords - alpha * mix.means.row(c).transpose()).squaredNorm();
        logs(c) = std::log(mix.weights(c)) - 0.5 * d2 / v - 0.5 * k * (kLog2Pi + std::log(v));
    }
    const double m = logs.maxCoeff();
    return m + std::log((logs.array() - m).exp().sum());
}

Eigen::VectorXd mixture_noisy_score(const SubspaceMixture& mix, const Eigen::VectorXd& coords,
                                    double alpha, double sigma2) {
    const double v = alpha * alpha * mix.variance + sigma2;
    if (v <= 0.0) throw std::invalid_argument("degenerate mixture: zero total variance");
    Eigen::VectorXd logs(mix.components());
    for (int c = 0; c < mix.components(); ++c) {
        const double d2 = (coords - alpha * mix.means.row(c).transpose()).squaredNorm();
        logs(c) = std::log(mix.weights(c)) - 0.5 * d2 / v;
    }
    const double m = logs.maxCoeff();
    Eigen::VectorXd resp = (logs.array() - m).exp();
    resp /= resp.sum();
    Eigen::VectorXd score = Eigen::VectorXd::Zero(coords.size());
    for (int c = 0; c < mix.components(); ++c)
        score += resp(c) * (alpha * mix.means.row(c).transpose() - coords) / v;
    return score;
}

double noisy_log_density(const LatentSubspaceGMM& model, const NoiseSchedule& sched,
                         const Eigen::VectorXd& x, double t) {
    if (x.size() != model.d_x()) throw std::invalid_argument("noisy_log_density: dimension mismatch");
    const auto [a, s] = sched.coeffs(t);
    const double s2 = s * s;
    return mixture_noisy_log_density(model.content, model.a_z.columns.transpose() * x, a, s2) +
           mixture_noisy_log_density(model.style, model.a_g.columns.transpose() * x, a, s2);
}

ScoreParts oracle_score(const LatentSubspaceGMM& model, const NoiseSchedule& sched,
                        const Eigen::VectorXd& x, double t) {
    if (x.size() != model.d_x()) throw std::invalid_argument("oracle_score: dimension mismatch");
    const auto [a, s] = sched.coeffs(t);
    const double s2 = s * s;
    ScoreParts parts;
    parts.content = mixture_noisy_score(model.content, model.a_z.columns.transpose() * x, a, s2);
    parts.style = mixture_noisy_score(model.style, model.a_g.columns.transpose() * x, a, s2);
    parts.full = model.a_z.columns * parts.content + model.a_g.columns * parts.style;
    return parts;
}

void oracle_score_batch(const LatentSubspaceGMM& model, const NoiseSchedule& sched,
                        const Eigen::MatrixXd& x_t, const Eigen::VectorXd& t,
                        Eigen::MatrixXd& s_full, Eigen::MatrixXd& s_content,
                        Eigen::MatrixXd& s_style) {
    const int n = static_cast<int>(x_t.rows());
    s_full.resize(n, model.d_x());
    s_content.resize(n, model.d_z());
    s_style.resize(n, model.d_g());
    for (int i = 0; i < n; ++i) {
        const auto [a, s] = sched.coeffs(t(i));
        const double s2 = s * s;
        const Eigen::VectorXd xi = x_t.row(i).transpose();
        s_content.row(i) =
            mixture_noisy_score(model.content, model.a_z.columns.transpose() * xi, a, s2).transpose();
        s_style.row(i) =
            mixture_noisy_score(model.style, model.a_g.columns.transpose() * xi, a, s2).transpose();
        s_full.row(i) = (model.a_z.columns * s_content.row(i).transpose() +
                         model.a_g.columns * s_style.row(i).transpose())
                            .transpose();
    }
}

}  // namespace subdiff
