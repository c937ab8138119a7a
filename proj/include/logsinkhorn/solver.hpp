#pragma once

// Log-domain Sinkhorn and the supporting dual-space operations.
//
// Potentials follow the Gibbs factorisation
//
//   pi_ij = mu_i nu_j exp((alpha_i + beta_j - C_ij) / eps)
//
// and the solver alternates the alpha (row) and beta (column) updates starting
// from zero potentials. Rows and columns are independent tasks; every per-row
// reduction uses the fixed tree from reduction.hpp, so results do not depend on
// the worker count.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "logsinkhorn/core_types.hpp"
#include "logsinkhorn/reduction.hpp"

namespace logsinkhorn {

// Borrowed, precision-specific view of one problem instance.
template <typename T>
struct ProblemView {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::span<const T> cost;             // row-major rows x cols
  std::span<const T> cost_transposed;  // empty, or row-major cols x rows
  std::span<const T> mu;
  std::span<const T> log_mu;
  std::span<const T> nu;
  std::span<const T> log_nu;
};

// Owns the precision-converted problem plus iteration state.
template <typename T>
class SolverWorkspace {
 public:
  SolverWorkspace(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                  bool transpose_for_beta);

  ProblemView<T> view() const;
  std::size_t matrix_bytes() const { return (cost_.size() + cost_t_.size()) * sizeof(T); }

  std::vector<T> alpha;
  std::vector<T> beta;
  std::vector<T> row_scratch;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<T> cost_;
  std::vector<T> cost_t_;
  std::vector<T> mu_, log_mu_, nu_, log_nu_;
};

// ---- Precision-generic kernels (instantiated for float and double) ----

// alpha_i = -eps * LSE_j((beta_j - C_ij) / eps + log nu_j), one task per row.
template <typename T>
void update_alpha(const ProblemView<T>& p, std::span<const T> beta, T eps, const ReductionPlan& plan,
                  std::span<T> alpha_out, int workers = 0);

// beta_j = -eps * LSE_i((alpha_i - C_ij) / eps + log mu_i), one task per column.
// Reads the column with stride `cols`, or the transposed copy when present.
template <typename T>
void update_beta(const ProblemView<T>& p, std::span<const T> alpha, T eps, const ReductionPlan& plan,
                 std::span<T> beta_out, int workers = 0);

// L1 distance between the plan's row sums (evaluated in log space) and mu.
// `scratch` must hold `rows` elements. Non-finite values are returned as is.
template <typename T>
T marginal_error(const ProblemView<T>& p, std::span<const T> alpha, std::span<const T> beta, T eps,
                 const ReductionPlan& plan, std::span<T> scratch, int workers = 0);

// sum_ij C_ij * pi_ij, row sums then a tree over rows.
template <typename T>
T transport_cost(const ProblemView<T>& p, std::span<const T> alpha, std::span<const T> beta, T eps,
                 const ReductionPlan& plan, std::span<T> scratch, int workers = 0);

// ---- Double-precision convenience API over the domain types ----

std::vector<double> update_alpha(const CostMatrix& cost, const DiscreteDistribution& nu,
                                 std::span<const double> beta, double eps, const ReductionPlan& plan = {});
std::vector<double> update_beta(const CostMatrix& cost, const DiscreteDistribution& mu,
                                std::span<const double> alpha, double eps, const ReductionPlan& plan = {});
double marginal_error(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                      const DualPotentials& potentials, double eps, const ReductionPlan& plan = {});
double transport_cost(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                      const DualPotentials& potentials, double eps, const ReductionPlan& plan = {});

struct SolveResult {
  SolveReport report;
  DualPotentials potentials;
};

// Algorithm: zero potentials; per iteration update alpha then beta; every
// check_interval iterations evaluate the row-marginal error and stop once it is
// below the tolerance. Any non-finite potential or error ends the run with
// kNumericalFailure. Throws kInvalidConfig / kDimensionMismatch up front.
SolveResult solve(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                  const SinkhornConfig& config);

struct StandardSolveResult {
  SolveReport report;
  std::vector<double> u;
  std::vector<double> v;
};

// Unstabilised scaling iteration on K = exp(-C / eps): u = mu / (K v), v = nu / (K^T u).
// No guards on exp or division; any non-finite intermediate is reported as
// kNumericalFailure.
StandardSolveResult solve_standard_domain(const CostMatrix& cost, const DiscreteDistribution& mu,
                                          const DiscreteDistribution& nu, const SinkhornConfig& config);

// pi_ij = exp((alpha_i + beta_j - C_ij) / eps + log mu_i + log nu_j).
// Throws kNonFiniteResult if any entry is not finite.
TransportPlan materialize_plan(const CostMatrix& cost, const DiscreteDistribution& mu,
                               const DiscreteDistribution& nu, const DualPotentials& potentials, double eps);

// max_ij |C_ij + eps * log(pi_ij / (mu_i nu_j)) - alpha_i - beta_j| over entries
// that are normal doubles. Entries in [0, DBL_MIN) are skipped: at small eps the
// materialised plan underflows there and the log carries no usable digits. A
// negative or NaN entry makes the result NaN.
double kkt_residual(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                    const TransportPlan& plan, const DualPotentials& potentials, double eps);

// <C, pi> + eps * KL(pi || mu nu^T), KL = sum pi (log(pi / (mu nu)) - 1) + 1.
double regularized_objective(const CostMatrix& cost, const DiscreteDistribution& mu,
                             const DiscreteDistribution& nu, const TransportPlan& plan, double eps);

struct ContractionBound {
  double lambda_exp;   // exp(-2R / eps)
  double lambda_tanh;  // tanh(R / (4 eps))^2
};

// Both published forms of the linear contraction factor. They disagree as eps
// -> 0 and are reported as diagnostics only.
ContractionBound contraction_rate_bound(double cost_range, double eps);

}  // namespace logsinkhorn
