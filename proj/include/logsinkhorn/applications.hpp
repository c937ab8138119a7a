#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "logsinkhorn/core_types.hpp"
#include "logsinkhorn/costs.hpp"

namespace logsinkhorn {

// Row-major RGB image, channels in [0, 1].
struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::array<double, 3>> pixels;

  std::size_t pixel_count() const { return width * height; }
};

// Clamps every channel into [0, 1]; throws kDimensionMismatch on a size mismatch.
RgbImage make_rgb_image(std::size_t width, std::size_t height, std::vector<std::array<double, 3>> pixels);

struct Correspondence {
  std::size_t source_index = 0;
  std::size_t target_index = 0;
  double weight = 0.0;

  bool operator==(const Correspondence&) const = default;
};

// Replaces source point i by sum_j pi_ij y_j / sum_j pi_ij.
// Throws kDimensionMismatch if plan.cols != targets.count, kZeroRowMass on an empty row.
PointCloud barycentric_map(const TransportPlan& plan, const PointCloud& targets);

struct ColorTransferOptions {
  std::size_t sample_count = 512;
  double epsilon = 0.01;
  std::uint64_t seed = 0;
  // Everything except epsilon is taken from here.
  SinkhornConfig solver;
};

struct ColorTransferResult {
  RgbImage image;
  SolveReport report;
};

// Samples sample_count pixels from each image (uniform, without replacement),
// solves OT between the two RGB samples with uniform weights, maps the source
// samples barycentrically, then recolours every source pixel with the mapped
// colour of its nearest source sample (RGB distance, lowest index on ties).
// Throws kNonFiniteResult if the solve fails numerically.
ColorTransferResult color_transfer(const RgbImage& source, const RgbImage& target, const ColorTransferOptions& options);

struct MatchResult {
  std::vector<Correspondence> correspondences;
  SolveReport report;
};

// Uniform weights, squared Euclidean cost; source i is matched to argmax_j pi_ij
// (lowest j on ties) with the plan mass as weight.
MatchResult match_point_clouds(const PointCloud& x, const PointCloud& y, double eps, SinkhornConfig config = {});

struct RigidPair {
  PointCloud source;
  PointCloud target;
  // ground_truth[i] is the target index holding the image of source point i.
  std::vector<std::size_t> ground_truth;
};

// Source uniform in the unit cube; target = R x + t + N(0, sigma^2), then
// shuffled. R rotates by `rotation_angle` in the xy-plane (about z in 3D).
RigidPair generate_rigid_pair(std::size_t n, std::size_t dimension, double rotation_angle,
                              const std::vector<double>& translation, double noise_sigma, std::uint64_t seed);

// Fraction of correspondences with target_index == ground_truth[source_index].
double match_accuracy(const std::vector<Correspondence>& matches, const std::vector<std::size_t>& ground_truth);

}  // namespace logsinkhorn
