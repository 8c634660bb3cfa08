#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "subdiff/io.hpp"
#include "subdiff/lsgmm.hpp"
#include "subdiff/metrics.hpp"
#include "subdiff/rng.hpp"
#include "subdiff/sampler.hpp"
#include "subdiff/subspaces.hpp"
#include "subdiff/training.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace subdiff;

namespace {

TrainConfig make_config(double lambda_r, double lr, int steps, int pretrain,
                        const std::string& schedule, const std::string& target,
                        std::uint64_t seed) {
    TrainConfig cfg;
    cfg.lambda_r = lambda_r;
    cfg.lr = lr;
    cfg.steps = steps;
    cfg.pretrain_style_steps = pretrain;
    cfg.schedule_name = schedule;
    cfg.target_mode = target == "denoising" ? TargetMode::Denoising : TargetMode::Oracle;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_subdiff, m) {
    m.doc() = "Content/style subspace recovery with dual-encoder diffusion score networks";

    py::class_<LatentSubspaceGMM>(m, "Model")
        .def_static("default", &default_paper_model, py::arg("seed") = 0)
        .def_property_readonly("d_x", &LatentSubspaceGMM::d_x)
        .def_property_readonly("d_z", &LatentSubspaceGMM::d_z)
        .def_property_readonly("d_g", &LatentSubspaceGMM::d_g)
        .def_property_readonly("a_z",
                               [](const LatentSubspaceGMM& model) { return model.a_z.columns; })
        .def_property_readonly("a_g",
                               [](const LatentSubspaceGMM& model) { return model.a_g.columns; })
        .def("save", [](const LatentSubspaceGMM& model, const std::string& path) {
            save_model(path, model);
        })
        .def_static("load", &load_model);

    m.def(
        "sample",
        [](const LatentSubspaceGMM& model, int n, std::uint64_t seed) {
            const SampleSet data = sample(model, n, seed);
            return py::make_tuple(data.x, data.z, data.g);
        },
        py::arg("model"), py::arg("n"), py::arg("seed") = 0,
        "Draw (x, z, g) sample arrays from the model");

    m.def(
        "schedule_coeffs",
        [](const std::string& name, double t) { return make_schedule(name).coeffs(t); },
        py::arg("name"), py::arg("t"), "Return (alpha, sigma) for the named schedule");

    m.def(
        "oracle_score",
        [](const LatentSubspaceGMM& model, const Eigen::VectorXd& x, double t,
           const std::string& schedule) {
            return oracle_score(model, make_schedule(schedule), x, t).full;
        },
        py::arg("model"), py::arg("x"), py::arg("t"), py::arg("schedule") = "ou");

    m.def(
        "train",
        [](const LatentSubspaceGMM& model, const Eigen::MatrixXd& x, std::uint64_t seed,
           double lambda_r, double lr, int steps, int pretrain, const std::string& schedule,
           const std::string& target, int d_h, int d_t) {
            const TrainConfig cfg = make_config(lambda_r, lr, steps, pretrain, schedule, target,
                                                stream_seed(seed, "train"));
            DualScoreNet net = init_net(
                NetDims{model.d_x(), model.d_z(), model.d_g(), d_h, d_t},
                stream_seed(seed, "net"));
            const TrainResult result = train(model, x, net, cfg);
            if (!result.ok) throw std::runtime_error(result.message);
            py::list history;
            for (const auto& r : result.history.records)
                history.append(py::dict("step"_a = r.step, "total"_a = r.total, "l0"_a = r.l0,
                                        "lr"_a = r.lr, "lb"_a = r.lb,
                                        "error"_a = r.subspace_error));
            return py::dict("u"_a = net.u, "v"_a = net.v,
                            "error"_a = result.history.records.back().subspace_error,
                            "history"_a = history);
        },
        py::arg("model"), py::arg("x"), py::arg("seed") = 0, py::arg("lambda_r") = 3.0,
        py::arg("lr") = 1e-5, py::arg("steps") = 10000, py::arg("pretrain") = 2000,
        py::arg("schedule") = "ou", py::arg("target") = "oracle", py::arg("d_h") = 512,
        py::arg("d_t") = 16);

    m.def("subspace_recovery_error",
          [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v,
             const LatentSubspaceGMM& model) {
              return subspace_recovery_error(u, v, model.a_z, model.a_g);
          });

    m.def(
        "evaluate",
        [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, const LatentSubspaceGMM& model,
           int n_eval, std::uint64_t seed, bool editability) {
            EvalConfig cfg;
            cfg.with_editability = editability;
            cfg.seed = stream_seed(seed, "eval");
            const SampleSet data = sample(model, n_eval, stream_seed(seed, "eval-data"));
            const DisentanglementReport rep = evaluate(u, v, model, data, cfg);
            py::dict out("mi_zg"_a = rep.mi_zg, "recovery_error"_a = rep.recovery_error,
                         "reconstruction_gap"_a = rep.reconstruction_gap,
                         "n_eval"_a = rep.n_eval);
            if (rep.has_editability()) out["editability_tv"] = rep.editability_tv;
            return out;
        },
        py::arg("u"), py::arg("v"), py::arg("model"), py::arg("n_eval") = 4000,
        py::arg("seed") = 0, py::arg("editability") = false);

    m.def("mi_knn", &mi_knn, py::arg("a"), py::arg("b"), py::arg("k") = 5);
    m.def("tv_histogram", &tv_histogram, py::arg("p"), py::arg("q"),
          py::arg("bins_per_dim") = 100);

    m.def(
        "example1",
        [](int n, std::uint64_t seed) {
            const Example1Result r = example1_simulation(n, seed);
            return py::make_tuple(r.mi_hat, r.flip_rate, r.tv_hat);
        },
        py::arg("n") = 100000, py::arg("seed") = 0);

    m.def(
        "sample_oracle",
        [](const LatentSubspaceGMM& model, int n, int steps, std::uint64_t seed,
           const std::string& mode, const std::string& schedule) {
            const NoiseSchedule sched = make_schedule(schedule);
            ScoreFn score = [&model, &sched](const Eigen::VectorXd& x, double t) {
                return oracle_score(model, sched, x, t).full;
            };
            SamplerConfig cfg;
            cfg.n_steps = steps;
            cfg.n_samples = n;
            cfg.seed = seed;
            return mode == "ode" ? probability_flow_sample(score, sched, cfg, model.d_x())
                                 : reverse_sde_sample(score, sched, cfg, model.d_x());
        },
        py::arg("model"), py::arg("n"), py::arg("steps") = 500, py::arg("seed") = 0,
        py::arg("mode") = "sde", py::arg("schedule") = "ou",
        "Generate samples by reversing the diffusion with the analytic score");

    m.def(
        "edit_sample",
        [](const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, const Eigen::VectorXd& z_hat,
           const Eigen::VectorXd& g_new, int n, int steps, std::uint64_t seed, double delta) {
            SamplerConfig cfg;
            cfg.n_steps = steps;
            cfg.n_samples = n;
            cfg.seed = seed;
            const NoiseSchedule sched = make_schedule("ou");
            return edit_sample(projection(u), projection(v), z_hat, g_new, sched, cfg,
                               std::max(edit_t1(delta), sched.t_min));
        },
        py::arg("u"), py::arg("v"), py::arg("z_hat"), py::arg("g_new"), py::arg("n") = 1,
        py::arg("steps") = 200, py::arg("seed") = 0, py::arg("delta") = 0.1);
}
