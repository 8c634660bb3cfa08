#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "subdiff/lsgmm.hpp"
#include "subdiff/metrics.hpp"
#include "subdiff/scorenet.hpp"
#include "subdiff/training.hpp"

namespace subdiff {

// CSV with header row; UTF-8, '.' decimal, '\n' newlines, full double
// round-trip precision. Deterministic output for fixed inputs.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& rows);
struct CsvTable {
    std::vector<std::string> header;
    Eigen::MatrixXd rows;
};
CsvTable read_csv(const std::string& path);

// Model JSON: bases and mixture means as row-major flat arrays.
void save_model(const std::string& path, const LatentSubspaceGMM& model);
LatentSubspaceGMM load_model(const std::string& path);

// Checkpoint JSON: {dims, seed, U, V, w1z, w2z, w1g, w2g, omega}, matrices as
// row-major flat arrays of 64-bit floats.
void save_checkpoint(const std::string& path, const DualScoreNet& net, std::uint64_t seed);
struct Checkpoint {
    DualScoreNet net;
    std::uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::string& path);

// Samples CSV: columns x1..x_{d_X}, z1..z_{d_Z}, g1..g_{d_G}.
void save_samples(const std::string& path, const SampleSet& data);
SampleSet load_samples(const std::string& path);

// Training history CSV: step,L_total,L0,Lr,Lb,error.
void save_history(const std::string& path, const TrainHistory& history);

// SweepReport CSV with the canonical header, plus a plot-ready pivot CSV of
// mean final_error over a lambda_r x n grid.
void save_sweep_report(const std::string& path, const SweepReport& report);
SweepReport load_sweep_report(const std::string& path);
void save_sweep_pivot(const std::string& path, const SweepReport& report);

std::string report_to_json(const DisentanglementReport& report);
std::string example1_to_json(const Example1Result& result);

}  // namespace subdiff
