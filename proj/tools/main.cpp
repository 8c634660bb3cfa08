// subdiff command-line front end.
//
// Usage: subdiff <command> [--config file.json] [--key value ...]
// Commands: gen, train, sweep, sample, eval, example1.
// A config file is a JSON object; a "command" key may replace the positional
// command. Command-line flags override top-level config keys. Exit codes:
// 0 success, 1 numerical failure, 2 configuration error.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subdiff/io.hpp"
#include "subdiff/metrics.hpp"
#include "subdiff/rng.hpp"
#include "subdiff/sampler.hpp"
#include "subdiff/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace subdiff;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void usage(std::ostream& os) {
    os << "usage: subdiff <gen|train|sweep|sample|eval|example1> [--config PATH] "
          "[--key value ...]\n"
          "common keys: out DIR, seed U64, schedule NAME, jobs N\n";
}

// Flags become top-level JSON keys; values parse as JSON when possible
// (numbers, arrays, booleans), otherwise as strings.
json parse_args(int argc, char** argv, std::string& command) {
    json cfg = json::object();
    std::vector<std::pair<std::string, std::string>> flags;
    for (int i = 1; i < argc; ++i) {
        std::string arg = argv[i];
        if (arg.rfind("--", 0) == 0) {
            std::string key = arg.substr(2), value;
            if (const auto eq = key.find('='); eq != std::string::npos) {
                value = key.substr(eq + 1);
                key = key.substr(0, eq);
            } else if (i + 1 < argc) {
                value = argv[++i];
            } else {
                throw ConfigError("flag --" + key + " needs a value");
            }
            std::replace(key.begin(), key.end(), '-', '_');
            flags.emplace_back(key, value);
        } else if (command.empty()) {
            command = arg;
        } else {
            throw ConfigError("unexpected argument: " + arg);
        }
    }
    for (const auto& [key, value] : flags) {
        if (key == "config") {
            std::ifstream in(value);
            if (!in) throw ConfigError("cannot read config: " + value);
            json file_cfg;
            try {
                in >> file_cfg;
            } catch (const json::exception& e) {
                throw ConfigError("malformed config " + value + ": " + e.what());
            }
            if (!file_cfg.is_object()) throw ConfigError("config must be a JSON object");
            for (auto& [k, v] : file_cfg.items())
                if (!cfg.contains(k)) cfg[k] = v;  // flags win, including later --config
        } else {
            if (cfg.contains(key)) continue;  // first occurrence wins
            json parsed = json::parse(value, nullptr, false);
            cfg[key] = parsed.is_discarded() || parsed.is_object() ? json(value) : parsed;
        }
    }
    if (cfg.contains("command")) {
        if (command.empty()) command = cfg["command"].get<std::string>();
        cfg.erase("command");
    }
    return cfg;
}

template <typename T>
T get(const json& cfg, const std::string& key, T fallback) {
    if (!cfg.contains(key)) return fallback;
    try {
        return cfg.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for config key '" + key + "'");
    }
}

std::string out_path(const json& cfg, const std::string& key, const std::string& name) {
    if (cfg.contains(key)) return cfg.at(key).get<std::string>();
    const fs::path dir = get<std::string>(cfg, "out", ".");
    fs::create_directories(dir);
    return (dir / name).string();
}

std::string require_path(const json& cfg, const std::string& key, const std::string& fallback) {
    const fs::path dir = get<std::string>(cfg, "out", ".");
    const std::string path = cfg.contains(key) ? cfg.at(key).get<std::string>()
                                               : (dir / fallback).string();
    if (!fs::exists(path)) throw ConfigError("missing input file for '" + key + "': " + path);
    return path;
}

TrainConfig train_config(const json& cfg) {
    TrainConfig tc;
    tc.lambda_r = get(cfg, "lambda_r", tc.lambda_r);
    tc.lr = get(cfg, "lr", tc.lr);
    tc.steps = get(cfg, "steps", tc.steps);
    tc.batch = get(cfg, "batch", tc.batch);
    tc.pretrain_style_steps = get(cfg, "pretrain_steps", tc.pretrain_style_steps);
    tc.schedule_name = get<std::string>(cfg, "schedule", tc.schedule_name);
    const std::string mode = get<std::string>(cfg, "target", "oracle");
    if (mode == "oracle")
        tc.target_mode = TargetMode::Oracle;
    else if (mode == "denoising")
        tc.target_mode = TargetMode::Denoising;
    else
        throw ConfigError("target must be 'oracle' or 'denoising'");
    const std::string opt = get<std::string>(cfg, "optimizer", "adam");
    if (opt == "adam")
        tc.optimizer = OptimizerKind::Adam;
    else if (opt == "gd")
        tc.optimizer = OptimizerKind::GD;
    else
        throw ConfigError("optimizer must be 'adam' or 'gd'");
    return tc;
}

NetDims net_dims(const json& cfg, const LatentSubspaceGMM& model) {
    return NetDims{model.d_x(), model.d_z(), model.d_g(), get(cfg, "d_h", 512),
                   get(cfg, "d_t", 16)};
}

int cmd_gen(const json& cfg) {
    const std::uint64_t seed = get<std::uint64_t>(cfg, "seed", 0);
    const int n = get(cfg, "n", 4000);
    const LatentSubspaceGMM model = default_paper_model(seed);
    const SampleSet data = sample(model, n, stream_seed(seed, "data"));
    const std::string model_path = out_path(cfg, "model_path", "model.json");
    const std::string data_path = out_path(cfg, "data_path", "samples.csv");
    save_model(model_path, model);
    save_samples(data_path, data);
    std::cout << "wrote " << model_path << " and " << data_path << " (" << n << " rows)\n";
    return 0;
}

int cmd_train(const json& cfg) {
    const LatentSubspaceGMM model = load_model(require_path(cfg, "model_path", "model.json"));
    const SampleSet data = load_samples(require_path(cfg, "data_path", "samples.csv"));
    const std::uint64_t seed = get<std::uint64_t>(cfg, "seed", 0);
    TrainConfig tc = train_config(cfg);
    tc.seed = stream_seed(seed, "train");

    DualScoreNet net;
    if (cfg.contains("checkpoint_in"))
        net = load_checkpoint(require_path(cfg, "checkpoint_in", "")).net;
    else
        net = init_net(net_dims(cfg, model), stream_seed(seed, "net"));

    const TrainResult result = train(model, data.x, net, tc);
    save_checkpoint(out_path(cfg, "checkpoint_path", "checkpoint.json"), net, seed);
    save_history(out_path(cfg, "history_path", "history.csv"), result.history);
    if (!result.ok) {
        std::cerr << "training failed: " << result.message << '\n';
        return 1;
    }
    if (!result.history.records.empty()) {
        const auto& last = result.history.records.back();
        std::cout << "final step " << last.step << ": L_total=" << last.total
                  << " error=" << last.subspace_error << '\n';
    }
    return 0;
}

int cmd_sweep(const json& cfg) {
    const std::uint64_t seed = get<std::uint64_t>(cfg, "seed", 0);
    LatentSubspaceGMM model;
    if (cfg.contains("model_path"))
        model = load_model(require_path(cfg, "model_path", "model.json"));
    else
        model = default_paper_model(seed);
    TrainConfig tc = train_config(cfg);
    tc.seed = seed;
    const auto schedules =
        get<std::vector<std::string>>(cfg, "schedules", {get<std::string>(cfg, "schedule", "ou")});
    const auto lambdas = get<std::vector<double>>(cfg, "lambdas", {0.0, 0.03, 0.3, 3.0});
    const auto ns = get<std::vector<int>>(cfg, "ns", {4000});
    const int trials = get(cfg, "trials", 4);
    const int jobs = get(cfg, "jobs", 1);
    const SweepReport report =
        sweep(model, schedules, lambdas, ns, trials, tc, net_dims(cfg, model), jobs);
    const std::string report_path = out_path(cfg, "report_path", "sweep.csv");
    const std::string pivot_path = out_path(cfg, "pivot_path", "sweep_pivot.csv");
    save_sweep_report(report_path, report);
    save_sweep_pivot(pivot_path, report);
    int failed = 0;
    for (const auto& r : report.rows)
        if (r.status != "ok") ++failed;
    std::cout << "wrote " << report_path << " (" << report.rows.size() << " rows, " << failed
              << " failed) and " << pivot_path << '\n';
    return failed == 0 ? 0 : 1;
}

int cmd_sample(const json& cfg) {
    const LatentSubspaceGMM model = load_model(require_path(cfg, "model_path", "model.json"));
    const NoiseSchedule sched = make_schedule(get<std::string>(cfg, "schedule", "ou"));
    SamplerConfig sc;
    sc.n_samples = get(cfg, "n", 1000);
    sc.n_steps = get(cfg, "steps", 500);
    sc.seed = stream_seed(get<std::uint64_t>(cfg, "seed", 0), "sample");
    const std::string mode = get<std::string>(cfg, "mode", "sde");
    if (mode != "sde" && mode != "ode") throw ConfigError("mode must be 'sde' or 'ode'");

    ScoreFn score;
    DualScoreNet net;  // kept alive for the closure
    if (cfg.contains("checkpoint_path")) {
        net = load_checkpoint(require_path(cfg, "checkpoint_path", "checkpoint.json")).net;
        score = [&net, &model](const Eigen::VectorXd& x, double t) {
            return subdiff::score(net, x, style_of(model, x), t).s;
        };
    } else {
        score = [&model, &sched](const Eigen::VectorXd& x, double t) {
            return oracle_score(model, sched, x, t).full;
        };
    }
    const Eigen::MatrixXd x = mode == "sde" ? reverse_sde_sample(score, sched, sc, model.d_x())
                                            : probability_flow_sample(score, sched, sc, model.d_x());
    std::vector<std::string> header;
    for (int j = 0; j < model.d_x(); ++j) header.push_back("x" + std::to_string(j + 1));
    const std::string path = out_path(cfg, "samples_path", "generated.csv");
    write_csv(path, header, x);
    std::cout << "wrote " << path << " (" << x.rows() << " samples, " << mode << ")\n";
    return 0;
}

int cmd_eval(const json& cfg) {
    const LatentSubspaceGMM model = load_model(require_path(cfg, "model_path", "model.json"));
    const Checkpoint ckpt =
        load_checkpoint(require_path(cfg, "checkpoint_path", "checkpoint.json"));
    const std::uint64_t seed = get<std::uint64_t>(cfg, "seed", 0);
    EvalConfig ec;
    ec.knn_k = get(cfg, "knn_k", ec.knn_k);
    ec.with_editability = get(cfg, "editability", false);
    ec.edit_delta = get(cfg, "delta", ec.edit_delta);
    ec.edit_steps = get(cfg, "edit_steps", ec.edit_steps);
    ec.edit_sources = get(cfg, "edit_sources", ec.edit_sources);
    ec.seed = stream_seed(seed, "eval");
    const int n_eval = get(cfg, "n_eval", 4000);
    const SampleSet eval_data = sample(model, n_eval, stream_seed(seed, "eval-data"));

    const DisentanglementReport report = evaluate(ckpt.net.u, ckpt.net.v, model, eval_data, ec);
    const std::string json_text = report_to_json(report);
    const std::string path = out_path(cfg, "report_path", "report.json");
    std::ofstream(path) << json_text << '\n';
    std::cout << json_text << '\n';
    std::cout << "metric              value\n"
              << "mi_zg (nats)        " << report.mi_zg << '\n'
              << "recovery_error      " << report.recovery_error << '\n'
              << "reconstruction_gap  " << report.reconstruction_gap << '\n';
    if (report.has_editability()) std::cout << "editability_tv      " << report.editability_tv << '\n';
    std::cout << "n_eval              " << report.n_eval << '\n';
    return 0;
}

int cmd_example1(const json& cfg) {
    const int n = get(cfg, "n", 100000);
    const std::uint64_t seed = get<std::uint64_t>(cfg, "seed", 0);
    const Example1Result result = example1_simulation(n, seed);
    const std::string json_text = example1_to_json(result);
    const std::string path = out_path(cfg, "report_path", "example1.json");
    std::ofstream(path) << json_text << '\n';
    std::cout << json_text << '\n';
    std::cout << "metric     value\n"
              << "mi_hat     " << result.mi_hat << '\n'
              << "flip_rate  " << result.flip_rate << '\n'
              << "tv_hat     " << result.tv_hat << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    std::string command;
    try {
        const json cfg = parse_args(argc, argv, command);
        if (command.empty()) {
            usage(std::cerr);
            return 2;
        }
        if (command == "gen") return cmd_gen(cfg);
        if (command == "train") return cmd_train(cfg);
        if (command == "sweep") return cmd_sweep(cfg);
        if (command == "sample") return cmd_sample(cfg);
        if (command == "eval") return cmd_eval(cfg);
        if (command == "example1") return cmd_example1(cfg);
        std::cerr << "unknown command: " << command << '\n';
        usage(std::cerr);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        usage(std::cerr);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
