#pragma once

// Experiment drivers behind the command-line harness. Each driver returns one
// ExperimentRecord per parameter point; the CLI only parses flags and prints.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "logsinkhorn/applications.hpp"
#include "logsinkhorn/core_types.hpp"

namespace logsinkhorn {

struct ExperimentRecord {
  std::string experiment;
  std::string variant;  // ablation label, solver name, ...
  std::string solver;   // "log" or "standard"
  std::size_t n = 0;
  std::size_t m = 0;
  double epsilon = 0.0;
  double max_cost = 0.0;
  std::uint64_t seed = 0;
  std::string law;  // grid weight law; empty for non-grid experiments
  std::string precision;
  double tolerance = 0.0;
  int max_iterations = 0;
  int check_interval = 0;
  std::size_t chunk_width = 0;
  std::size_t group_size = 0;
  std::string reduction;
  bool transpose_for_beta = false;
  std::string status;  // converged | diverged | nan
  int iterations = 0;
  int marginal_checks = 0;
  double marginal_error = 0.0;
  double transport_cost = 0.0;
  std::uint64_t matrix_bytes = 0;
  double accuracy = 0.0;  // point-cloud recovery rate; 0 elsewhere
  std::vector<TracePoint> trace;
  // Timing fields; excluded from reproducibility comparisons.
  double elapsed_ms = 0.0;
  double elapsed_std_ms = 0.0;
  double slowdown = 0.0;

  // Compares every field except the timing ones.
  bool same_numerics(const ExperimentRecord& other) const;
};

// Grid-cell status label: converged / diverged (iteration budget exhausted) / nan.
std::string status_label(SolveStatus s);

// CSV: fixed header (csv_header()), one record per row, doubles printed with
// the shortest representation that round-trips; the trace column holds
// "iteration:error" pairs joined by ';'.
std::string csv_header();
void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& records, bool with_header = true);
std::vector<ExperimentRecord> read_csv(std::istream& in);

// One JSON object per line.
void write_json_lines(std::ostream& out, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_json_lines(std::istream& in);

struct RunOptions {
  SinkhornConfig config;
  std::uint64_t seed = 0;
  GridLaw law = GridLaw::kGaussianBump;
  int warmup = 3;
  int repeats = 10;
  // Independent parameter points run concurrently; never changes numbers.
  int parallel_experiments = 1;
};

// Grid problem of size n x m solved with `opts.config`; elapsed is the mean
// over `repeats` timed solves after `warmup` untimed ones.
std::vector<ExperimentRecord> run_bench(std::size_t n, std::size_t m, const RunOptions& opts);

// One bench point per n (square problems); records carry the working-precision
// cost-matrix footprint.
std::vector<ExperimentRecord> run_scale(const std::vector<std::size_t>& sizes, const RunOptions& opts);

// Full configuration followed by single-knob variations; slowdown is relative
// to the full configuration.
std::vector<ExperimentRecord> run_ablate(std::size_t n, const RunOptions& opts);

// Both solvers on every (epsilon, max C) cell of the n x n grid problem.
std::vector<ExperimentRecord> run_stability(std::size_t n, const std::vector<double>& epsilons,
                                            const std::vector<double>& max_costs, const RunOptions& opts);

// Error traces for every (n, epsilon) pair.
std::vector<ExperimentRecord> run_convergence(const std::vector<std::size_t>& sizes,
                                              const std::vector<double>& epsilons, const RunOptions& opts);

struct ColorTransferOutcome {
  ExperimentRecord record;
  RgbImage image;
};
ColorTransferOutcome run_color_transfer(const RgbImage& source, const RgbImage& target, std::size_t sample_count,
                                        const RunOptions& opts);

struct PointCloudOutcome {
  ExperimentRecord record;
  RigidPair pair;
  std::vector<Correspondence> matches;
};
PointCloudOutcome run_pointcloud(std::size_t n, std::size_t dimension, double angle,
                                 const std::vector<double>& translation, double sigma, const RunOptions& opts);

}  // namespace logsinkhorn
