#include "logsinkhorn/applications.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "logsinkhorn/solver.hpp"

namespace logsinkhorn {

RgbImage make_rgb_image(std::size_t width, std::size_t height, std::vector<std::array<double, 3>> pixels) {
  if (pixels.size() != width * height) {
    throw Error(ErrorCode::kDimensionMismatch, "image has " + std::to_string(pixels.size()) + " pixels, expected " +
                                                   std::to_string(width * height));
  }
  for (auto& px : pixels) {
    for (double& c : px) {
      if (!std::isfinite(c)) throw Error(ErrorCode::kNonFiniteInput, "pixel channel is not finite");
      c = std::clamp(c, 0.0, 1.0);
    }
  }
  return {width, height, std::move(pixels)};
}

PointCloud barycentric_map(const TransportPlan& plan, const PointCloud& targets) {
  if (plan.cols != targets.count) {
    throw Error(ErrorCode::kDimensionMismatch, "plan has " + std::to_string(plan.cols) + " columns but " +
                                                   std::to_string(targets.count) + " targets");
  }
  const std::size_t d = targets.dimension;
  PointCloud out{plan.rows, d, std::vector<double>(plan.rows * d, 0.0)};
  for (std::size_t i = 0; i < plan.rows; ++i) {
    double mass = 0.0;
    double* dst = out.coordinates.data() + i * d;
    for (std::size_t j = 0; j < plan.cols; ++j) {
      const double w = plan(i, j);
      mass += w;
      const auto y = targets.point(j);
      for (std::size_t k = 0; k < d; ++k) dst[k] += w * y[k];
    }
    if (!(mass > 0.0)) throw Error(ErrorCode::kZeroRowMass, "plan row " + std::to_string(i) + " has no mass");
    for (std::size_t k = 0; k < d; ++k) dst[k] /= mass;
  }
  return out;
}

namespace {

// First `count` entries of a seeded Fisher-Yates permutation of [0, total).
std::vector<std::size_t> sample_without_replacement(std::size_t total, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t pick = k + static_cast<std::size_t>(rng.below(total - k));
    std::swap(idx[k], idx[pick]);
  }
  idx.resize(count);
  return idx;
}

PointCloud gather_colors(const RgbImage& img, const std::vector<std::size_t>& idx) {
  PointCloud pc{idx.size(), 3, std::vector<double>(idx.size() * 3)};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    for (std::size_t c = 0; c < 3; ++c) pc.coordinates[k * 3 + c] = img.pixels[idx[k]][c];
  }
  return pc;
}

}  // namespace

ColorTransferResult color_transfer(const RgbImage& source, const RgbImage& target,
                                   const ColorTransferOptions& options) {
  const std::size_t n = options.sample_count;
  if (n == 0 || n > source.pixel_count() || n > target.pixel_count()) {
    throw Error(ErrorCode::kInvalidArgument, "sample_count must be in [1, pixel count of both images]");
  }
  if (!(options.epsilon > 0.0)) throw Error(ErrorCode::kInvalidArgument, "epsilon must be positive");

  Rng rng(options.seed);
  const auto src_idx = sample_without_replacement(source.pixel_count(), n, rng);
  const auto tgt_idx = sample_without_replacement(target.pixel_count(), n, rng);
  const PointCloud xs = gather_colors(source, src_idx);
  const PointCloud ys = gather_colors(target, tgt_idx);

  const CostMatrix cost = squared_euclidean_cost(xs, ys);
  const DiscreteDistribution mu = DiscreteDistribution::uniform(n);
  const DiscreteDistribution nu = DiscreteDistribution::uniform(n);
  SinkhornConfig config = options.solver;
  config.epsilon = options.epsilon;
  SolveResult solved = solve(cost, mu, nu, config);
  if (solved.report.status == SolveStatus::kNumericalFailure) {
    throw Error(ErrorCode::kNonFiniteResult, "color transfer solve failed numerically");
  }
  const TransportPlan plan = materialize_plan(cost, mu, nu, solved.potentials, options.epsilon);
  const PointCloud mapped = barycentric_map(plan, ys);

  std::vector<std::array<double, 3>> out(source.pixel_count());
  for (std::size_t p = 0; p < source.pixel_count(); ++p) {
    const auto& px = source.pixels[p];
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      const double* s = xs.coordinates.data() + k * 3;
      const double d0 = px[0] - s[0];
      const double d1 = px[1] - s[1];
      const double d2 = px[2] - s[2];
      const double dist = d0 * d0 + d1 * d1 + d2 * d2;
      if (dist < best_d2) {
        best_d2 = dist;
        best = k;
      }
    }
    for (std::size_t c = 0; c < 3; ++c) out[p][c] = mapped.coordinates[best * 3 + c];
  }
  return {make_rgb_image(source.width, source.height, std::move(out)), std::move(solved.report)};
}

MatchResult match_point_clouds(const PointCloud& x, const PointCloud& y, double eps, SinkhornConfig config) {
  if (x.count == 0 || y.count == 0) throw Error(ErrorCode::kEmptyInput, "point clouds must be nonempty");
  const CostMatrix cost = squared_euclidean_cost(x, y);
  const DiscreteDistribution mu = DiscreteDistribution::uniform(x.count);
  const DiscreteDistribution nu = DiscreteDistribution::uniform(y.count);
  config.epsilon = eps;
  SolveResult solved = solve(cost, mu, nu, config);
  if (solved.report.status == SolveStatus::kNumericalFailure) {
    throw Error(ErrorCode::kNonFiniteResult, "point cloud solve failed numerically");
  }
  const TransportPlan plan = materialize_plan(cost, mu, nu, solved.potentials, eps);

  MatchResult result;
  result.correspondences.reserve(x.count);
  for (std::size_t i = 0; i < plan.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < plan.cols; ++j) {
      if (plan(i, j) > plan(i, best)) best = j;
    }
    result.correspondences.push_back({i, best, plan(i, best)});
  }
  result.report = std::move(solved.report);
  return result;
}

RigidPair generate_rigid_pair(std::size_t n, std::size_t dimension, double rotation_angle,
                              const std::vector<double>& translation, double noise_sigma, std::uint64_t seed) {
  if (dimension != 2 && dimension != 3) throw Error(ErrorCode::kInvalidArgument, "dimension must be 2 or 3");
  if (!(noise_sigma >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  if (!translation.empty() && translation.size() != dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "translation must have `dimension` components");
  }
  Rng rng(seed);
  std::vector<double> src(n * dimension);
  for (double& c : src) c = rng.uniform();

  const double ca = std::cos(rotation_angle);
  const double sa = std::sin(rotation_angle);
  std::vector<double> moved(n * dimension);
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = src.data() + i * dimension;
    double* q = moved.data() + i * dimension;
    q[0] = ca * p[0] - sa * p[1];
    q[1] = sa * p[0] + ca * p[1];
    if (dimension == 3) q[2] = p[2];
    for (std::size_t k = 0; k < dimension; ++k) {
      if (!translation.empty()) q[k] += translation[k];
      if (noise_sigma > 0.0) q[k] += noise_sigma * rng.normal();
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order.begin(), order.end());
  std::vector<double> tgt(n * dimension);
  std::vector<std::size_t> truth(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::copy_n(moved.data() + order[k] * dimension, dimension, tgt.data() + k * dimension);
    truth[order[k]] = k;
  }
  return {make_point_cloud(n, dimension, std::move(src)), make_point_cloud(n, dimension, std::move(tgt)),
          std::move(truth)};
}

double match_accuracy(const std::vector<Correspondence>& matches, const std::vector<std::size_t>& ground_truth) {
  if (matches.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& c : matches) {
    if (c.source_index < ground_truth.size() && ground_truth[c.source_index] == c.target_index) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(matches.size());
}

}  // namespace logsinkhorn
