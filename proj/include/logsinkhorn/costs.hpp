#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "logsinkhorn/core_types.hpp"

namespace logsinkhorn {

// Portable seeded generator. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; every derived draw (uniform,
// normal, bounded integer, shuffle) is implemented here instead of through
// <random> distributions, whose algorithms vary between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform on (0, 1), never returns exactly 0.
  double uniform_open();
  // Standard normal via Box-Muller; no cached second value.
  double normal();
  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound);

  // Fisher-Yates, last index first.
  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const std::uint64_t k = below(i);
      std::swap(first[i - 1], first[k]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

struct PointCloud {
  std::size_t count = 0;
  std::size_t dimension = 0;
  std::vector<double> coordinates;  // row-major count x dimension

  std::span<const double> point(std::size_t i) const { return {coordinates.data() + i * dimension, dimension}; }
};

// Validates finiteness and count * dimension == coordinates.size().
PointCloud make_point_cloud(std::size_t count, std::size_t dimension, std::vector<double> coordinates);

// C_ij = |x_i - y_j|^2. Throws kDimensionMismatch on differing dimensions.
CostMatrix squared_euclidean_cost(const PointCloud& x, const PointCloud& y);

struct NormalizedCost {
  CostMatrix cost;
  bool degenerate = false;  // constant input; cost is all zeros
};

// Affine map so that min -> 0 and max -> target_max. A constant matrix maps to
// zeros and sets `degenerate`.
NormalizedCost normalize_cost(const CostMatrix& cost, double target_max);

struct GridProblem {
  DiscreteDistribution mu;
  DiscreteDistribution nu;
  CostMatrix cost;
};

// How grid weights are drawn.
//   kGaussianBump: each marginal is a discretised Gaussian exp(-(x - c)^2 / 2s^2)
//     with c ~ U(0.25, 0.75) and s ~ U(0.05, 0.15), drawn as (c, s) for mu and
//     then for nu. The shape does not depend on n.
//   kUniform: i.i.d. uniform(0, 1) weights, mu from the first n draws, nu from
//     the next m.
enum class GridLaw { kGaussianBump, kUniform };
std::string_view to_string(GridLaw law);
GridLaw parse_grid_law(std::string_view text);

// Points x_i = i / (n - 1), y_j = j / (m - 1) (a single point sits at 0),
// squared Euclidean cost scaled to max 1, weights normalised to sum 1.
GridProblem generate_grid_problem(std::size_t n, std::size_t m, std::uint64_t seed,
                                  GridLaw law = GridLaw::kGaussianBump);

}  // namespace logsinkhorn
