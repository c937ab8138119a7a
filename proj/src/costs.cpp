#include "logsinkhorn/costs.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace logsinkhorn {

double Rng::uniform_open() {
  double u = 0.0;
  while (u == 0.0) u = uniform();
  return u;
}

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  if (bound == 0) throw Error(ErrorCode::kInvalidArgument, "Rng::below needs a positive bound");
  // Largest multiple of bound representable; draws at or above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % bound;
}

PointCloud make_point_cloud(std::size_t count, std::size_t dimension, std::vector<double> coordinates) {
  if (dimension == 0) throw Error(ErrorCode::kDimensionMismatch, "point dimension must be >= 1");
  if (coordinates.size() != count * dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "expected " + std::to_string(count * dimension) + " coordinates, got " +
                                                   std::to_string(coordinates.size()));
  }
  for (double c : coordinates) {
    if (!std::isfinite(c)) throw Error(ErrorCode::kNonFiniteInput, "point coordinates must be finite");
  }
  return {count, dimension, std::move(coordinates)};
}

CostMatrix squared_euclidean_cost(const PointCloud& x, const PointCloud& y) {
  if (x.dimension != y.dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "point clouds have dimensions " + std::to_string(x.dimension) +
                                                   " and " + std::to_string(y.dimension));
  }
  std::vector<double> c(x.count * y.count);
  for (std::size_t i = 0; i < x.count; ++i) {
    const auto xi = x.point(i);
    for (std::size_t j = 0; j < y.count; ++j) {
      const auto yj = y.point(j);
      double d2 = 0.0;
      for (std::size_t k = 0; k < x.dimension; ++k) {
        const double d = xi[k] - yj[k];
        d2 += d * d;
      }
      c[i * y.count + j] = d2;
    }
  }
  return make_cost_matrix(x.count, y.count, std::move(c));
}

NormalizedCost normalize_cost(const CostMatrix& cost, double target_max) {
  if (!(target_max > 0.0) || !std::isfinite(target_max)) {
    throw Error(ErrorCode::kInvalidArgument, "target_max must be positive");
  }
  const auto v = cost.values();
  std::vector<double> out(v.size(), 0.0);
  const double lo = cost.min_value();
  const double range = cost.value_range();
  if (range == 0.0) return {make_cost_matrix(cost.rows(), cost.cols(), std::move(out)), true};
  const double scale = target_max / range;
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = (v[k] - lo) * scale;
  // Pin the extremes so rounding in the scale cannot miss them.
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] == cost.max_value()) out[k] = target_max;
    if (v[k] == lo) out[k] = 0.0;
  }
  return {make_cost_matrix(cost.rows(), cost.cols(), std::move(out)), false};
}

namespace {
std::vector<double> grid(std::size_t n) {
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) x[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return x;
}
}  // namespace

std::string_view to_string(GridLaw law) {
  return law == GridLaw::kUniform ? "uniform" : "bump";
}

GridLaw parse_grid_law(std::string_view text) {
  if (text == "bump") return GridLaw::kGaussianBump;
  if (text == "uniform") return GridLaw::kUniform;
  throw Error(ErrorCode::kInvalidArgument, "unknown grid law '" + std::string(text) + "'");
}

namespace {
std::vector<double> bump_weights(const std::vector<double>& x, Rng& rng) {
  const double centre = 0.25 + 0.5 * rng.uniform();
  const double width = 0.05 + 0.1 * rng.uniform();
  std::vector<double> w(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = (x[i] - centre) / width;
    w[i] = std::exp(-0.5 * d * d);
  }
  return w;
}
}  // namespace

GridProblem generate_grid_problem(std::size_t n, std::size_t m, std::uint64_t seed, GridLaw law) {
  if (n == 0 || m == 0) throw Error(ErrorCode::kInvalidArgument, "grid sizes must be >= 1");
  Rng rng(seed);
  std::vector<double> a(n), b(m);
  if (law == GridLaw::kUniform) {
    for (double& w : a) w = rng.uniform_open();
    for (double& w : b) w = rng.uniform_open();
  } else {
    a = bump_weights(grid(n), rng);
    b = bump_weights(grid(m), rng);
  }

  const PointCloud xs{n, 1, grid(n)};
  const PointCloud ys{m, 1, grid(m)};
  CostMatrix raw = squared_euclidean_cost(xs, ys);
  CostMatrix cost = raw.max_value() > 0.0 ? normalize_cost(raw, 1.0).cost : std::move(raw);
  return {make_distribution(a), make_distribution(b), std::move(cost)};
}

}  // namespace logsinkhorn
