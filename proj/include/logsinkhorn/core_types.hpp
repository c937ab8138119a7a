#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "logsinkhorn/error.hpp"
#include "logsinkhorn/reduction.hpp"

namespace logsinkhorn {

// Probability vector with strictly positive entries and cached natural logs.
class DiscreteDistribution {
 public:
  std::size_t size() const { return weights_.size(); }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> log_weights() const { return log_weights_; }

  static DiscreteDistribution uniform(std::size_t n);

 private:
  friend DiscreteDistribution make_distribution(std::span<const double> raw);
  DiscreteDistribution(std::vector<double> w, std::vector<double> lw)
      : weights_(std::move(w)), log_weights_(std::move(lw)) {}

  std::vector<double> weights_;
  std::vector<double> log_weights_;
};

// Normalises `raw` to sum 1. Throws kEmptyInput, kNonFiniteInput (also for
// negative entries or a zero total) or kZeroWeight.
DiscreteDistribution make_distribution(std::span<const double> raw);

// Dense row-major n x m cost matrix with nonnegative finite entries.
class CostMatrix {
 public:
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const double> values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  double min_value() const { return min_; }
  double max_value() const { return max_; }
  // max - min over all entries; the cost range R of the contraction bound.
  double value_range() const { return max_ - min_; }

 private:
  friend CostMatrix make_cost_matrix(std::size_t, std::size_t, std::vector<double>);
  CostMatrix(std::size_t n, std::size_t m, std::vector<double> v, double lo, double hi)
      : rows_(n), cols_(m), values_(std::move(v)), min_(lo), max_(hi) {}

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
  double min_ = 0.0;
  double max_ = 0.0;
};

// Throws kDimensionMismatch (also for n or m == 0) or kNegativeOrNonFiniteEntry.
CostMatrix make_cost_matrix(std::size_t n, std::size_t m, std::vector<double> values);

struct DualPotentials {
  std::vector<double> alpha;
  std::vector<double> beta;
};

enum class Precision { kSingle, kDouble };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

struct SinkhornConfig {
  double epsilon = 0.01;
  double tolerance = 1e-6;
  int max_iterations = 10000;
  int check_interval = 10;
  std::size_t chunk_width = 32;
  std::size_t group_size = 256;
  ReductionStrategy reduction = ReductionStrategy::kHierarchical;
  bool transpose_for_beta = false;
  Precision precision = Precision::kSingle;
  // Worker threads for row/column parallelism; 0 picks the runtime default.
  // Never changes numeric results.
  int workers = 0;

  ReductionPlan reduction_plan() const { return {chunk_width, group_size, reduction}; }
  void validate() const;
};

// Dense coupling materialised from potentials.
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  std::vector<double> row_sums() const;
  std::vector<double> col_sums() const;
};

enum class SolveStatus { kConverged, kNotConverged, kNumericalFailure };

std::string_view to_string(SolveStatus s);

struct TracePoint {
  int iteration = 0;
  double marginal_error = 0.0;

  bool operator==(const TracePoint&) const = default;
};

struct SolveReport {
  SolveStatus status = SolveStatus::kNotConverged;
  int iterations = 0;
  double final_marginal_error = 0.0;
  double transport_cost = 0.0;
  std::vector<TracePoint> error_trace;
  // Number of marginal-error evaluations performed.
  int marginal_checks = 0;
  std::chrono::duration<double> elapsed{0};
};

// Field-wise bitwise comparison of everything except elapsed time.
bool same_numerics(const SolveReport& a, const SolveReport& b);

}  // namespace logsinkhorn
