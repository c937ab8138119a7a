#include "logsinkhorn/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "logsinkhorn/parallel.hpp"

namespace logsinkhorn {

namespace {

constexpr std::size_t kColumnBlock = 16;

template <typename T>
std::vector<T> convert(std::span<const double> v) {
  return std::vector<T>(v.begin(), v.end());
}

template <typename T>
bool all_finite(std::span<const T> v) {
  return std::all_of(v.begin(), v.end(), [](T x) { return std::isfinite(x); });
}

void check_shapes(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu) {
  if (cost.rows() != mu.size() || cost.cols() != nu.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "cost is " + std::to_string(cost.rows()) + "x" + std::to_string(cost.cols()) + " but marginals have " +
                    std::to_string(mu.size()) + " and " + std::to_string(nu.size()) + " entries");
  }
}

ProblemView<double> borrow(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu) {
  ProblemView<double> p;
  p.rows = cost.rows();
  p.cols = cost.cols();
  p.cost = cost.values();
  p.mu = mu.weights();
  p.log_mu = mu.log_weights();
  p.nu = nu.weights();
  p.log_nu = nu.log_weights();
  return p;
}

}  // namespace

// ---- workspace ----

template <typename T>
SolverWorkspace<T>::SolverWorkspace(const CostMatrix& cost, const DiscreteDistribution& mu,
                                    const DiscreteDistribution& nu, bool transpose_for_beta)
    : alpha(cost.rows(), T(0)),
      beta(cost.cols(), T(0)),
      row_scratch(cost.rows(), T(0)),
      rows_(cost.rows()),
      cols_(cost.cols()),
      cost_(convert<T>(cost.values())),
      mu_(convert<T>(mu.weights())),
      log_mu_(convert<T>(mu.log_weights())),
      nu_(convert<T>(nu.weights())),
      log_nu_(convert<T>(nu.log_weights())) {
  check_shapes(cost, mu, nu);
  if (transpose_for_beta) {
    cost_t_.resize(cost_.size());
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) cost_t_[j * rows_ + i] = cost_[i * cols_ + j];
    }
  }
}

template <typename T>
ProblemView<T> SolverWorkspace<T>::view() const {
  return {rows_, cols_, cost_, cost_t_, mu_, log_mu_, nu_, log_nu_};
}

// ---- kernels ----

template <typename T>
void update_alpha(const ProblemView<T>& p, std::span<const T> beta, T eps, const ReductionPlan& plan,
                  std::span<T> alpha_out, int workers) {
  const T inv_eps = T(1) / eps;
  const std::size_t m = p.cols;
  parallel_for(p.rows, workers, [&](std::size_t i) {
    const T* row = p.cost.data() + i * m;
    const T* b = beta.data();
    const T* lnu = p.log_nu.data();
    const T lse = log_sum_exp_fn<T>(m, [&](std::size_t j) { return (b[j] - row[j]) * inv_eps + lnu[j]; }, plan);
    alpha_out[i] = -eps * lse;
  });
}

template <typename T>
void update_beta(const ProblemView<T>& p, std::span<const T> alpha, T eps, const ReductionPlan& plan,
                 std::span<T> beta_out, int workers) {
  const T inv_eps = T(1) / eps;
  const std::size_t n = p.rows;
  const std::size_t m = p.cols;
  const bool transposed = !p.cost_transposed.empty();
  if (transposed) {
    parallel_for(m, workers, [&](std::size_t j) {
      const T* a = alpha.data();
      const T* lmu = p.log_mu.data();
      const T* col = p.cost_transposed.data() + j * n;
      const T lse = log_sum_exp_fn<T>(n, [&](std::size_t i) { return (a[i] - col[i]) * inv_eps + lmu[i]; }, plan);
      beta_out[j] = -eps * lse;
    });
    return;
  }
  // Strided columns are reduced kColumnBlock at a time so each row segment is
  // read contiguously; the per-column reduction tree is unchanged.
  const std::size_t blocks = (m + kColumnBlock - 1) / kColumnBlock;
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t j0 = b * kColumnBlock;
    const std::size_t width = std::min(kColumnBlock, m - j0);
    const T* a = alpha.data();
    const T* lmu = p.log_mu.data();
    const T* base = p.cost.data() + j0;
    T lse[kColumnBlock];
    log_sum_exp_block<T>(
        n, width, [&](std::size_t i, std::size_t c) { return (a[i] - base[i * m + c]) * inv_eps + lmu[i]; }, plan,
        lse);
    for (std::size_t c = 0; c < width; ++c) beta_out[j0 + c] = -eps * lse[c];
  });
}

template <typename T>
T marginal_error(const ProblemView<T>& p, std::span<const T> alpha, std::span<const T> beta, T eps,
                 const ReductionPlan& plan, std::span<T> scratch, int workers) {
  const T inv_eps = T(1) / eps;
  const std::size_t m = p.cols;
  parallel_for(p.rows, workers, [&](std::size_t i) {
    const T* row = p.cost.data() + i * m;
    const T* b = beta.data();
    const T* lnu = p.log_nu.data();
    const T ai = alpha[i];
    const T lse =
        log_sum_exp_fn<T>(m, [&](std::size_t j) { return (ai + b[j] - row[j]) * inv_eps + lnu[j]; }, plan);
    const T log_r = p.log_mu[i] + lse;
    scratch[i] = std::abs(std::exp(log_r) - p.mu[i]);
  });
  return reduce_sum<T>(StridedView<T>(scratch.data(), p.rows), plan);
}

template <typename T>
T transport_cost(const ProblemView<T>& p, std::span<const T> alpha, std::span<const T> beta, T eps,
                 const ReductionPlan& plan, std::span<T> scratch, int workers) {
  const T inv_eps = T(1) / eps;
  const std::size_t m = p.cols;
  parallel_for(p.rows, workers, [&](std::size_t i) {
    const T* row = p.cost.data() + i * m;
    const T* b = beta.data();
    const T* lnu = p.log_nu.data();
    const T ai = alpha[i];
    const T lmu = p.log_mu[i];
    scratch[i] = reduce_sum_fn<T>(
        m, [&](std::size_t j) { return row[j] * std::exp((ai + b[j] - row[j]) * inv_eps + lmu + lnu[j]); },
        plan);
  });
  return reduce_sum<T>(StridedView<T>(scratch.data(), p.rows), plan);
}

// ---- solve ----

namespace {

template <typename T>
SolveResult solve_typed(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                        const SinkhornConfig& config) {
  SolverWorkspace<T> ws(cost, mu, nu, config.transpose_for_beta);
  const ProblemView<T> p = ws.view();
  const ReductionPlan plan = config.reduction_plan();
  const T eps = static_cast<T>(config.epsilon);
  const T tol = static_cast<T>(config.tolerance);
  const int workers = config.workers;

  SolveReport report;
  const auto start = std::chrono::steady_clock::now();

  auto check = [&](int k) {
    const T err = marginal_error<T>(p, ws.alpha, ws.beta, eps, plan, ws.row_scratch, workers);
    ++report.marginal_checks;
    report.error_trace.push_back({k, static_cast<double>(err)});
    report.final_marginal_error = static_cast<double>(err);
    if (!std::isfinite(err)) {
      report.status = SolveStatus::kNumericalFailure;
      return true;
    }
    if (err < tol) {
      report.status = SolveStatus::kConverged;
      return true;
    }
    return false;
  };

  bool stopped = false;
  int k = 0;
  for (k = 1; k <= config.max_iterations && !stopped; ++k) {
    update_alpha<T>(p, ws.beta, eps, plan, ws.alpha, workers);
    update_beta<T>(p, ws.alpha, eps, plan, ws.beta, workers);
    report.iterations = k;
    if (!all_finite<T>(ws.alpha) || !all_finite<T>(ws.beta)) {
      report.status = SolveStatus::kNumericalFailure;
      report.final_marginal_error = std::nan("");
      stopped = true;
      break;
    }
    if (k % config.check_interval == 0) stopped = check(k);
  }
  if (!stopped) {
    // Budget exhausted between checks: take one final measurement.
    if (report.iterations % config.check_interval != 0) check(report.iterations);
    if (report.status != SolveStatus::kNumericalFailure && report.final_marginal_error >= config.tolerance) {
      report.status = SolveStatus::kNotConverged;
    }
  }

  if (report.status != SolveStatus::kNumericalFailure) {
    const T c = transport_cost<T>(p, ws.alpha, ws.beta, eps, plan, ws.row_scratch, workers);
    report.transport_cost = static_cast<double>(c);
    if (!std::isfinite(c)) report.status = SolveStatus::kNumericalFailure;
  } else {
    report.transport_cost = std::nan("");
  }
  report.elapsed = std::chrono::steady_clock::now() - start;

  SolveResult out;
  out.report = std::move(report);
  out.potentials.alpha.assign(ws.alpha.begin(), ws.alpha.end());
  out.potentials.beta.assign(ws.beta.begin(), ws.beta.end());
  return out;
}

template <typename T>
StandardSolveResult solve_standard_typed(const CostMatrix& cost, const DiscreteDistribution& mu,
                                         const DiscreteDistribution& nu, const SinkhornConfig& config) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const ReductionPlan plan = config.reduction_plan();
  const int workers = config.workers;
  const T eps = static_cast<T>(config.epsilon);
  const T tol = static_cast<T>(config.tolerance);

  const std::vector<T> c = convert<T>(cost.values());
  const std::vector<T> mu_t = convert<T>(mu.weights());
  const std::vector<T> nu_t = convert<T>(nu.weights());

  SolveReport report;
  const auto start = std::chrono::steady_clock::now();

  std::vector<T> kernel(n * m);
  for (std::size_t k = 0; k < n * m; ++k) kernel[k] = std::exp(-c[k] / eps);
  std::vector<T> u(n, T(1));
  std::vector<T> v(m, T(1));
  std::vector<T> scratch(n);

  auto kv_row = [&](std::size_t i) {
    const T* row = kernel.data() + i * m;
    return reduce_sum_fn<T>(m, [&](std::size_t j) { return row[j] * v[j]; }, plan);
  };

  auto check = [&](int k) {
    parallel_for(n, workers, [&](std::size_t i) { scratch[i] = std::abs(u[i] * kv_row(i) - mu_t[i]); });
    const T err = reduce_sum<T>(StridedView<T>(scratch.data(), n), plan);
    ++report.marginal_checks;
    report.error_trace.push_back({k, static_cast<double>(err)});
    report.final_marginal_error = static_cast<double>(err);
    if (!std::isfinite(err)) {
      report.status = SolveStatus::kNumericalFailure;
      return true;
    }
    if (err < tol) {
      report.status = SolveStatus::kConverged;
      return true;
    }
    return false;
  };

  bool stopped = false;
  for (int k = 1; k <= config.max_iterations; ++k) {
    parallel_for(n, workers, [&](std::size_t i) { u[i] = mu_t[i] / kv_row(i); });
    parallel_for(m, workers, [&](std::size_t j) {
      const T* col = kernel.data() + j;
      v[j] = nu_t[j] / reduce_sum_fn<T>(n, [&](std::size_t i) { return col[i * m] * u[i]; }, plan);
    });
    report.iterations = k;
    if (!all_finite<T>(u) || !all_finite<T>(v)) {
      report.status = SolveStatus::kNumericalFailure;
      report.final_marginal_error = std::nan("");
      stopped = true;
      break;
    }
    if (k % config.check_interval == 0 && check(k)) {
      stopped = true;
      break;
    }
  }
  if (!stopped) {
    if (report.iterations % config.check_interval != 0) check(report.iterations);
    if (report.status != SolveStatus::kNumericalFailure && report.final_marginal_error >= config.tolerance) {
      report.status = SolveStatus::kNotConverged;
    }
  }

  if (report.status != SolveStatus::kNumericalFailure) {
    parallel_for(n, workers, [&](std::size_t i) {
      const T* row = kernel.data() + i * m;
      const T* ci = c.data() + i * m;
      const T ui = u[i];
      scratch[i] = reduce_sum_fn<T>(m, [&](std::size_t j) { return ci[j] * ui * row[j] * v[j]; }, plan);
    });
    const T total = reduce_sum<T>(StridedView<T>(scratch.data(), n), plan);
    report.transport_cost = static_cast<double>(total);
    if (!std::isfinite(total)) report.status = SolveStatus::kNumericalFailure;
  } else {
    report.transport_cost = std::nan("");
  }
  report.elapsed = std::chrono::steady_clock::now() - start;

  StandardSolveResult out;
  out.report = std::move(report);
  out.u.assign(u.begin(), u.end());
  out.v.assign(v.begin(), v.end());
  return out;
}

}  // namespace

SolveResult solve(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                  const SinkhornConfig& config) {
  config.validate();
  check_shapes(cost, mu, nu);
  return config.precision == Precision::kSingle ? solve_typed<float>(cost, mu, nu, config)
                                                : solve_typed<double>(cost, mu, nu, config);
}

StandardSolveResult solve_standard_domain(const CostMatrix& cost, const DiscreteDistribution& mu,
                                          const DiscreteDistribution& nu, const SinkhornConfig& config) {
  config.validate();
  check_shapes(cost, mu, nu);
  return config.precision == Precision::kSingle ? solve_standard_typed<float>(cost, mu, nu, config)
                                                : solve_standard_typed<double>(cost, mu, nu, config);
}

// ---- double convenience API ----

std::vector<double> update_alpha(const CostMatrix& cost, const DiscreteDistribution& nu,
                                 std::span<const double> beta, double eps, const ReductionPlan& plan) {
  if (cost.cols() != nu.size() || beta.size() != cost.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "update_alpha: beta and nu must have cols entries");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  plan.validate();
  ProblemView<double> p;
  p.rows = cost.rows();
  p.cols = cost.cols();
  p.cost = cost.values();
  p.nu = nu.weights();
  p.log_nu = nu.log_weights();
  std::vector<double> alpha(cost.rows());
  update_alpha<double>(p, beta, eps, plan, alpha);
  if (!all_finite<double>(alpha)) throw Error(ErrorCode::kNonFiniteResult, "update_alpha produced a non-finite value");
  return alpha;
}

std::vector<double> update_beta(const CostMatrix& cost, const DiscreteDistribution& mu,
                                std::span<const double> alpha, double eps, const ReductionPlan& plan) {
  if (cost.rows() != mu.size() || alpha.size() != cost.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "update_beta: alpha and mu must have rows entries");
  }
  if (!(eps > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eps must be positive");
  plan.validate();
  ProblemView<double> p;
  p.rows = cost.rows();
  p.cols = cost.cols();
  p.cost = cost.values();
  p.mu = mu.weights();
  p.log_mu = mu.log_weights();
  std::vector<double> beta(cost.cols());
  update_beta<double>(p, alpha, eps, plan, beta);
  if (!all_finite<double>(beta)) throw Error(ErrorCode::kNonFiniteResult, "update_beta produced a non-finite value");
  return beta;
}

namespace {
void check_potentials(const CostMatrix& cost, const DualPotentials& pot) {
  if (pot.alpha.size() != cost.rows() || pot.beta.size() != cost.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "potentials do not match the cost matrix shape");
  }
}
}  // namespace

double marginal_error(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                      const DualPotentials& potentials, double eps, const ReductionPlan& plan) {
  check_shapes(cost, mu, nu);
  check_potentials(cost, potentials);
  plan.validate();
  std::vector<double> scratch(cost.rows());
  return marginal_error<double>(borrow(cost, mu, nu), potentials.alpha, potentials.beta, eps, plan, scratch);
}

double transport_cost(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                      const DualPotentials& potentials, double eps, const ReductionPlan& plan) {
  check_shapes(cost, mu, nu);
  check_potentials(cost, potentials);
  plan.validate();
  std::vector<double> scratch(cost.rows());
  return transport_cost<double>(borrow(cost, mu, nu), potentials.alpha, potentials.beta, eps, plan, scratch);
}

TransportPlan materialize_plan(const CostMatrix& cost, const DiscreteDistribution& mu,
                               const DiscreteDistribution& nu, const DualPotentials& potentials, double eps) {
  check_shapes(cost, mu, nu);
  check_potentials(cost, potentials);
  TransportPlan plan{cost.rows(), cost.cols(), std::vector<double>(cost.rows() * cost.cols())};
  const auto lmu = mu.log_weights();
  const auto lnu = nu.log_weights();
  for (std::size_t i = 0; i < plan.rows; ++i) {
    for (std::size_t j = 0; j < plan.cols; ++j) {
      const double log_pi = (potentials.alpha[i] + potentials.beta[j] - cost(i, j)) / eps + lmu[i] + lnu[j];
      const double pi = std::exp(log_pi);
      if (!std::isfinite(pi)) throw Error(ErrorCode::kNonFiniteResult, "plan entry is not finite");
      plan.values[i * plan.cols + j] = pi;
    }
  }
  return plan;
}

double kkt_residual(const CostMatrix& cost, const DiscreteDistribution& mu, const DiscreteDistribution& nu,
                    const TransportPlan& plan, const DualPotentials& potentials, double eps) {
  check_shapes(cost, mu, nu);
  check_potentials(cost, potentials);
  if (plan.rows != cost.rows() || plan.cols != cost.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "plan does not match the cost matrix shape");
  }
  const auto lmu = mu.log_weights();
  const auto lnu = nu.log_weights();
  double worst = 0.0;
  for (std::size_t i = 0; i < plan.rows; ++i) {
    for (std::size_t j = 0; j < plan.cols; ++j) {
      const double p = plan(i, j);
      if (p < std::numeric_limits<double>::min() && p >= 0.0) continue;  // underflowed, no usable log
      const double r =
          cost(i, j) + eps * (std::log(p) - lmu[i] - lnu[j]) - potentials.alpha[i] - potentials.beta[j];
      if (std::isnan(r)) return r;
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

double regularized_objective(const CostMatrix& cost, const DiscreteDistribution& mu,
                             const DiscreteDistribution& nu, const TransportPlan& plan, double eps) {
  check_shapes(cost, mu, nu);
  if (plan.rows != cost.rows() || plan.cols != cost.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "plan does not match the cost matrix shape");
  }
  const auto lmu = mu.log_weights();
  const auto lnu = nu.log_weights();
  double linear = 0.0;
  double kl = 0.0;
  for (std::size_t i = 0; i < plan.rows; ++i) {
    for (std::size_t j = 0; j < plan.cols; ++j) {
      const double pi = plan(i, j);
      linear += cost(i, j) * pi;
      kl += pi * (std::log(pi) - lmu[i] - lnu[j] - 1.0);
    }
  }
  return linear + eps * (kl + 1.0);
}

ContractionBound contraction_rate_bound(double cost_range, double eps) {
  if (!(cost_range >= 0.0) || !(eps > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "contraction bound needs R >= 0 and eps > 0");
  }
  const double t = std::tanh(cost_range / (4.0 * eps));
  return {std::exp(-2.0 * cost_range / eps), t * t};
}

template class SolverWorkspace<float>;
template class SolverWorkspace<double>;

#define LOGSINKHORN_INSTANTIATE(T)                                                                               \
  template void update_alpha<T>(const ProblemView<T>&, std::span<const T>, T, const ReductionPlan&, std::span<T>, \
                                int);                                                                             \
  template void update_beta<T>(const ProblemView<T>&, std::span<const T>, T, const ReductionPlan&, std::span<T>,  \
                               int);                                                                              \
  template T marginal_error<T>(const ProblemView<T>&, std::span<const T>, std::span<const T>, T,                  \
                               const ReductionPlan&, std::span<T>, int);                                          \
  template T transport_cost<T>(const ProblemView<T>&, std::span<const T>, std::span<const T>, T,                  \
                               const ReductionPlan&, std::span<T>, int);

LOGSINKHORN_INSTANTIATE(float)
LOGSINKHORN_INSTANTIATE(double)

#undef LOGSINKHORN_INSTANTIATE

}  // namespace logsinkhorn
