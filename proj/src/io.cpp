#include "subdiff/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace subdiff {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

json mat_json(const Eigen::MatrixXd& m) {
    std::vector<double> flat(static_cast<size_t>(m.size()));
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) flat[static_cast<size_t>(i) * m.cols() + j] = m(i, j);
    return json(flat);
}

Eigen::MatrixXd mat_from_json(const json& j, int rows, int cols, const std::string& what) {
    const auto flat = j.get<std::vector<double>>();
    if (static_cast<long>(flat.size()) != static_cast<long>(rows) * cols)
        throw std::runtime_error("bad size for " + what);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j2 = 0; j2 < cols; ++j2) m(i, j2) = flat[static_cast<size_t>(i) * cols + j2];
    return m;
}

json vec_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vec_from_json(const json& j) {
    const auto flat = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(flat.data(), static_cast<long>(flat.size()));
}

json mixture_json(const SubspaceMixture& mix) {
    return json{{"components", mix.components()},
                {"dim", mix.dim()},
                {"means", mat_json(mix.means)},
                {"weights", vec_json(mix.weights)},
                {"variance", mix.variance}};
}

SubspaceMixture mixture_from_json(const json& j) {
    SubspaceMixture mix;
    mix.means = mat_from_json(j.at("means"), j.at("components").get<int>(), j.at("dim").get<int>(),
                              "mixture means");
    mix.weights = vec_from_json(j.at("weights"));
    mix.variance = j.at("variance").get<double>();
    mix.validate();
    return mix;
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows) {
    if (static_cast<long>(header.size()) != rows.cols())
        throw std::invalid_argument("write_csv: header/column mismatch");
    auto out = open_out(path);
    for (size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    for (int i = 0; i < rows.rows(); ++i) {
        for (int j = 0; j < rows.cols(); ++j) out << (j ? "," : "") << fmt(rows(i, j));
        out << '\n';
    }
}

CsvTable read_csv(const std::string& path) {
    auto in = open_in(path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty CSV: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream rs(line);
        std::vector<double> row;
        while (std::getline(rs, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != table.header.size())
            throw std::runtime_error("ragged CSV row in " + path);
        rows.push_back(std::move(row));
    }
    table.rows.resize(static_cast<long>(rows.size()), static_cast<long>(table.header.size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j)
            table.rows(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
    return table;
}

void save_model(const std::string& path, const LatentSubspaceGMM& model) {
    json j{{"d_x", model.d_x()},
           {"d_z", model.d_z()},
           {"d_g", model.d_g()},
           {"a_z", mat_json(model.a_z.columns)},
           {"a_g", mat_json(model.a_g.columns)},
           {"content", mixture_json(model.content)},
           {"style", mixture_json(model.style)}};
    open_out(path) << j.dump(2) << '\n';
}

LatentSubspaceGMM load_model(const std::string& path) {
    json j;
    open_in(path) >> j;
    const int d_x = j.at("d_x").get<int>();
    LatentSubspaceGMM model;
    model.a_z = make_basis(mat_from_json(j.at("a_z"), d_x, j.at("d_z").get<int>(), "a_z"));
    model.a_g = make_basis(mat_from_json(j.at("a_g"), d_x, j.at("d_g").get<int>(), "a_g"));
    model.content = mixture_from_json(j.at("content"));
    model.style = mixture_from_json(j.at("style"));
    model.validate();
    return model;
}

void save_checkpoint(const std::string& path, const DualScoreNet& net, std::uint64_t seed) {
    json j{{"dims",
            {{"d_x", net.dims.d_x},
             {"d_z", net.dims.d_z},
             {"d_g", net.dims.d_g},
             {"d_h", net.dims.d_h},
             {"d_t", net.dims.d_t}}},
           {"seed", seed},
           {"U", mat_json(net.u)},
           {"V", mat_json(net.v)},
           {"w1z", mat_json(net.branch_z.w1)},
           {"w2z", mat_json(net.branch_z.w2)},
           {"w1g", mat_json(net.branch_g.w1)},
           {"w2g", mat_json(net.branch_g.w2)},
           {"omega", vec_json(net.emb.omega)}};
    open_out(path) << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    json j;
    open_in(path) >> j;
    Checkpoint ckpt;
    const auto& d = j.at("dims");
    NetDims dims{d.at("d_x").get<int>(), d.at("d_z").get<int>(), d.at("d_g").get<int>(),
                 d.at("d_h").get<int>(), d.at("d_t").get<int>()};
    ckpt.net.dims = dims;
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.net.u = mat_from_json(j.at("U"), dims.d_x, dims.d_z, "U");
    ckpt.net.v = mat_from_json(j.at("V"), dims.d_x, dims.d_g, "V");
    ckpt.net.branch_z.w1 = mat_from_json(j.at("w1z"), dims.d_x + 2 * dims.d_t, dims.d_h, "w1z");
    ckpt.net.branch_z.w2 = mat_from_json(j.at("w2z"), dims.d_z, dims.d_h, "w2z");
    ckpt.net.branch_g.w1 = mat_from_json(j.at("w1g"), dims.d_g + 2 * dims.d_t, dims.d_h, "w1g");
    ckpt.net.branch_g.w2 = mat_from_json(j.at("w2g"), dims.d_g, dims.d_h, "w2g");
    ckpt.net.emb.omega = vec_from_json(j.at("omega"));
    if (ckpt.net.emb.omega.size() != dims.d_t) throw std::runtime_error("bad size for omega");
    return ckpt;
}

void save_samples(const std::string& path, const SampleSet& data) {
    const int d_x = static_cast<int>(data.x.cols()), d_z = static_cast<int>(data.z.cols()),
              d_g = static_cast<int>(data.g.cols());
    std::vector<std::string> header;
    for (int j = 0; j < d_x; ++j) header.push_back("x" + std::to_string(j + 1));
    for (int j = 0; j < d_z; ++j) header.push_back("z" + std::to_string(j + 1));
    for (int j = 0; j < d_g; ++j) header.push_back("g" + std::to_string(j + 1));
    Eigen::MatrixXd rows(data.size(), d_x + d_z + d_g);
    rows << data.x, data.z, data.g;
    write_csv(path, header, rows);
}

SampleSet load_samples(const std::string& path) {
    const CsvTable table = read_csv(path);
    int d_x = 0, d_z = 0, d_g = 0;
    for (const auto& h : table.header) {
        if (h.starts_with("x"))
            ++d_x;
        else if (h.starts_with("z"))
            ++d_z;
        else if (h.starts_with("g"))
            ++d_g;
        else
            throw std::runtime_error("unexpected samples column: " + h);
    }
    SampleSet data;
    data.x = table.rows.leftCols(d_x);
    data.z = table.rows.middleCols(d_x, d_z);
    data.g = table.rows.rightCols(d_g);
    return data;
}

void save_history(const std::string& path, const TrainHistory& history) {
    Eigen::MatrixXd rows(static_cast<long>(history.records.size()), 6);
    for (size_t i = 0; i < history.records.size(); ++i) {
        const auto& r = history.records[i];
        rows.row(static_cast<long>(i)) << r.step, r.total, r.l0, r.lr, r.lb, r.subspace_error;
    }
    write_csv(path, {"step", "L_total", "L0", "Lr", "Lb", "error"}, rows);
}

void save_sweep_report(const std::string& path, const SweepReport& report) {
    auto out = open_out(path);
    out << "schedule,lambda_r,n,trial,seed,steps,final_L0,final_Lr,final_Lb,final_error,status\n";
    for (const auto& r : report.rows)
        out << r.schedule << ',' << fmt(r.lambda_r) << ',' << r.n << ',' << r.trial << ','
            << r.seed << ',' << r.steps << ',' << fmt(r.final_l0) << ',' << fmt(r.final_lr) << ','
            << fmt(r.final_lb) << ',' << fmt(r.final_error) << ',' << r.status << '\n';
}

SweepReport load_sweep_report(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty sweep CSV: " + path);
    SweepReport report;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream rs(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(rs, cell, ',')) cells.push_back(cell);
        if (cells.size() != 11) throw std::runtime_error("ragged sweep CSV row in " + path);
        SweepRow r;
        r.schedule = cells[0];
        r.lambda_r = std::stod(cells[1]);
        r.n = std::stoi(cells[2]);
        r.trial = std::stoi(cells[3]);
        r.seed = std::stoull(cells[4]);
        r.steps = std::stoi(cells[5]);
        r.final_l0 = std::stod(cells[6]);
        r.final_lr = std::stod(cells[7]);
        r.final_lb = std::stod(cells[8]);
        r.final_error = std::stod(cells[9]);
        r.status = cells[10];
        report.rows.push_back(std::move(r));
    }
    return report;
}

void save_sweep_pivot(const std::string& path, const SweepReport& report) {
    std::map<double, std::map<int, std::pair<double, int>>> cells;  // lambda -> n -> (sum, count)
    std::vector<int> ns;
    for (const auto& r : report.rows) {
        if (r.status != "ok") continue;
        auto& [sum, count] = cells[r.lambda_r][r.n];
        sum += r.final_error;
        ++count;
        if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
    }
    std::sort(ns.begin(), ns.end());
    auto out = open_out(path);
    out << "lambda_r";
    for (int n : ns) out << ",n" << n;
    out << '\n';
    for (const auto& [lambda, by_n] : cells) {
        out << fmt(lambda);
        for (int n : ns) {
            const auto it = by_n.find(n);
            if (it == by_n.end() || it->second.second == 0)
                out << ",nan";
            else
                out << ',' << fmt(it->second.first / it->second.second);
        }
        out << '\n';
    }
}

std::string report_to_json(const DisentanglementReport& report) {
    json j{{"mi_zg", report.mi_zg},
           {"recovery_error", report.recovery_error},
           {"reconstruction_gap", report.reconstruction_gap},
           {"n_eval", report.n_eval}};
    if (report.has_editability()) j["editability_tv"] = report.editability_tv;
    return j.dump(2);
}

std::string example1_to_json(const Example1Result& result) {
    return json{{"mi_hat", result.mi_hat},
                {"flip_rate", result.flip_rate},
                {"tv_hat", result.tv_hat}}
        .dump(2);
}

}  // namespace subdiff
