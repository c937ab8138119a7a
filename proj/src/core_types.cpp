#include "logsinkhorn/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace logsinkhorn {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kNonFiniteInput: return "NonFiniteInput";
    case ErrorCode::kZeroWeight: return "ZeroWeight";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNegativeOrNonFiniteEntry: return "NegativeOrNonFiniteEntry";
    case ErrorCode::kEmptyView: return "EmptyView";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kNonFiniteResult: return "NonFiniteResult";
    case ErrorCode::kZeroRowMass: return "ZeroRowMass";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

void ReductionPlan::validate() const {
  if (chunk_width == 0) throw Error(ErrorCode::kInvalidConfig, "chunk_width must be >= 1");
  if (group_size == 0 || group_size % chunk_width != 0) {
    throw Error(ErrorCode::kInvalidConfig, "group_size must be a positive multiple of chunk_width");
  }
}

DiscreteDistribution make_distribution(std::span<const double> raw) {
  if (raw.empty()) throw Error(ErrorCode::kEmptyInput, "distribution has no entries");
  double total = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x) || x < 0.0) {
      throw Error(ErrorCode::kNonFiniteInput, "weights must be finite and nonnegative");
    }
    total += x;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::kNonFiniteInput, "weights must have a positive finite sum");
  }
  std::vector<double> w(raw.size());
  std::vector<double> lw(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    w[i] = raw[i] / total;
    if (w[i] == 0.0) {
      throw Error(ErrorCode::kZeroWeight, "weight " + std::to_string(i) + " is zero after normalization");
    }
    lw[i] = std::log(w[i]);
  }
  return DiscreteDistribution(std::move(w), std::move(lw));
}

DiscreteDistribution DiscreteDistribution::uniform(std::size_t n) {
  const std::vector<double> ones(n, 1.0);
  return make_distribution(ones);
}

CostMatrix make_cost_matrix(std::size_t n, std::size_t m, std::vector<double> values) {
  if (n == 0 || m == 0) throw Error(ErrorCode::kDimensionMismatch, "cost matrix must be at least 1x1");
  if (values.size() != n * m) {
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(n * m) + " entries, got " +
                                                   std::to_string(values.size()));
  }
  double lo = values[0];
  double hi = values[0];
  for (double c : values) {
    if (!std::isfinite(c) || c < 0.0) {
      throw Error(ErrorCode::kNegativeOrNonFiniteEntry, "cost entries must be finite and >= 0");
    }
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return CostMatrix(n, m, std::move(values), lo, hi);
}

std::string_view to_string(Precision p) { return p == Precision::kSingle ? "single" : "double"; }

Precision parse_precision(std::string_view s) {
  if (s == "single" || s == "float" || s == "f32") return Precision::kSingle;
  if (s == "double" || s == "f64") return Precision::kDouble;
  throw Error(ErrorCode::kInvalidConfig, "unknown precision '" + std::string(s) + "'");
}

void SinkhornConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw Error(ErrorCode::kInvalidConfig, "epsilon must be positive");
  }
  if (!(tolerance > 0.0)) throw Error(ErrorCode::kInvalidConfig, "tolerance must be positive");
  if (max_iterations < 1) throw Error(ErrorCode::kInvalidConfig, "max_iterations must be >= 1");
  if (check_interval < 1) throw Error(ErrorCode::kInvalidConfig, "check_interval must be >= 1");
  if (workers < 0) throw Error(ErrorCode::kInvalidConfig, "workers must be >= 0");
  reduction_plan().validate();
}

std::vector<double> TransportPlan::row_sums() const {
  std::vector<double> out(rows, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[i] += values[i * cols + j];
  }
  return out;
}

std::vector<double> TransportPlan::col_sums() const {
  std::vector<double> out(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j] += values[i * cols + j];
  }
  return out;
}

std::string_view to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged: return "converged";
    case SolveStatus::kNotConverged: return "not_converged";
    case SolveStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

namespace {
bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }
}  // namespace

bool same_numerics(const SolveReport& a, const SolveReport& b) {
  if (a.status != b.status || a.iterations != b.iterations || a.marginal_checks != b.marginal_checks) {
    return false;
  }
  if (!bit_equal(a.final_marginal_error, b.final_marginal_error) ||
      !bit_equal(a.transport_cost, b.transport_cost)) {
    return false;
  }
  if (a.error_trace.size() != b.error_trace.size()) return false;
  for (std::size_t k = 0; k < a.error_trace.size(); ++k) {
    if (a.error_trace[k].iteration != b.error_trace[k].iteration ||
        !bit_equal(a.error_trace[k].marginal_error, b.error_trace[k].marginal_error)) {
      return false;
    }
  }
  return true;
}

}  // namespace logsinkhorn
