#pragma once

// Deterministic max / sum / LogSumExp reductions.
//
// Every reduction follows the same fixed tree, modelled on a GPU thread block:
//
//   1. group_size lanes; lane t folds elements t, t + group_size, t + 2*group_size, ...
//      sequentially (the block-stride loop).
//   2. Lanes are split into chunks of chunk_width; each chunk is folded by a
//      halving tree (the warp shuffle-down butterfly).
//   3. The group_size / chunk_width chunk results are folded by the same tree.
//
// The tree depends only on (length, chunk_width, group_size), so results are
// bit-identical no matter how many workers the caller uses for independent rows.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "logsinkhorn/error.hpp"

namespace logsinkhorn {

enum class ReductionStrategy {
  kHierarchical,  // lanes -> chunk tree -> cross-chunk tree
  kFlat,          // plain left-to-right fold, used as the ablation baseline
};

struct ReductionPlan {
  std::size_t chunk_width = 32;
  std::size_t group_size = 256;
  ReductionStrategy strategy = ReductionStrategy::kHierarchical;

  // Throws kInvalidConfig unless chunk_width >= 1 and group_size is a positive
  // multiple of chunk_width.
  void validate() const;
};

// Sum floor applied before the logarithm in log_sum_exp.
inline constexpr double kLseSumFloor = 1e-30;

// Read-only view over `size` elements spaced `stride` apart. A column of a
// row-major n x m matrix is StridedView{data + j, n, m}.
template <typename T>
class StridedView {
 public:
  StridedView() = default;
  StridedView(const T* data, std::size_t size, std::size_t stride = 1)
      : data_(data), size_(size), stride_(stride) {}
  StridedView(std::span<const T> s)  // NOLINT(google-explicit-constructor)
      : data_(s.data()), size_(s.size()), stride_(1) {}

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t stride() const { return stride_; }
  const T& operator[](std::size_t i) const { return data_[i * stride_]; }

 private:
  const T* data_ = nullptr;
  std::size_t size_ = 0;
  std::size_t stride_ = 1;
};

namespace detail {

template <typename T>
struct MaxOp {
  static constexpr T identity() { return -std::numeric_limits<T>::infinity(); }
  static T apply(T a, T b) { return std::max(a, b); }
};

template <typename T>
struct SumOp {
  static constexpr T identity() { return T(0); }
  static T apply(T a, T b) { return a + b; }
};

// Halving tree over a[0, k): a[t] <- a[t] op a[t + h], h = ceil(k / 2), repeat.
// For a power-of-two k this is exactly the shuffle-down butterfly.
template <typename Op, typename T>
T tree_fold(T* a, std::size_t k) {
  while (k > 1) {
    const std::size_t h = (k + 1) / 2;
    for (std::size_t t = 0; t + h < k; ++t) a[t] = Op::apply(a[t], a[t + h]);
    k = h;
  }
  return a[0];
}

template <typename T>
std::vector<T>& lane_scratch(std::size_t n) {
  thread_local std::vector<T> scratch;
  if (scratch.size() < n) scratch.resize(n);
  return scratch;
}

// Folds the lane accumulators acc[0, active) into one value: idle lanes take
// the identity, each chunk of chunk_width lanes is tree-folded, then the chunk
// results are tree-folded. `acc` must hold group_size elements.
template <typename Op, typename T>
T finish_lanes(T* acc, std::size_t active, const ReductionPlan& plan) {
  const std::size_t lanes = plan.group_size;
  const std::size_t width = plan.chunk_width;
  const std::size_t chunks = lanes / width;
  const std::size_t live_chunks = (active + width - 1) / width;
  for (std::size_t t = active; t < live_chunks * width; ++t) acc[t] = Op::identity();
  for (std::size_t c = 0; c < live_chunks; ++c) {
    acc[c] = tree_fold<Op>(acc + c * width, width);
  }
  for (std::size_t c = live_chunks; c < chunks; ++c) acc[c] = Op::identity();
  return tree_fold<Op>(acc, chunks);
}

// Core reduction over value_at(0 .. length-1). `value_at` is called exactly
// once per index.
template <typename Op, typename T, typename F>
T reduce_generated(std::size_t length, F&& value_at, const ReductionPlan& plan) {
  if (length == 0) throw Error(ErrorCode::kEmptyView, "reduction over an empty view");

  if (plan.strategy == ReductionStrategy::kFlat) {
    T acc = value_at(std::size_t{0});
    for (std::size_t j = 1; j < length; ++j) acc = Op::apply(acc, value_at(j));
    return acc;
  }

  const std::size_t lanes = plan.group_size;
  const std::size_t active = std::min(lanes, length);
  std::vector<T>& buf = lane_scratch<T>(lanes);
  T* acc = buf.data();

  // Lane pass: first sweep initialises, later sweeps fold.
  for (std::size_t t = 0; t < active; ++t) acc[t] = value_at(t);
  std::size_t base = lanes;
  for (; base + lanes <= length; base += lanes) {
    for (std::size_t t = 0; t < lanes; ++t) acc[t] = Op::apply(acc[t], value_at(base + t));
  }
  for (std::size_t t = 0; base + t < length; ++t) acc[t] = Op::apply(acc[t], value_at(base + t));

  return finish_lanes<Op>(acc, active, plan);
}

// Reduces `width` sequences of equal length side by side: result[c] equals
// reduce_generated over value_at(i, c) for i < length, bit for bit. Lane
// accumulators are stored lane-major so the inner loop over c is contiguous;
// this is how strided matrix columns are reduced while reading rows.
template <typename Op, typename T, typename F>
void reduce_generated_block(std::size_t length, std::size_t width, F&& value_at, const ReductionPlan& plan,
                            T* result) {
  if (length == 0) throw Error(ErrorCode::kEmptyView, "reduction over an empty view");
  if (plan.strategy == ReductionStrategy::kFlat) {
    for (std::size_t c = 0; c < width; ++c) result[c] = value_at(std::size_t{0}, c);
    for (std::size_t i = 1; i < length; ++i) {
      for (std::size_t c = 0; c < width; ++c) result[c] = Op::apply(result[c], value_at(i, c));
    }
    return;
  }

  const std::size_t lanes = plan.group_size;
  const std::size_t active = std::min(lanes, length);
  std::vector<T>& buf = lane_scratch<T>(lanes * (width + 1));
  T* acc = buf.data();
  T* column = acc + lanes * width;

  for (std::size_t t = 0; t < active; ++t) {
    for (std::size_t c = 0; c < width; ++c) acc[t * width + c] = value_at(t, c);
  }
  for (std::size_t i = active; i < length; ++i) {
    T* lane = acc + (i % lanes) * width;
    for (std::size_t c = 0; c < width; ++c) lane[c] = Op::apply(lane[c], value_at(i, c));
  }
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t t = 0; t < active; ++t) column[t] = acc[t * width + c];
    result[c] = finish_lanes<Op>(column, active, plan);
  }
}

}  // namespace detail

// exp(x) for x <= 0, branch-free so the lane loop vectorises. Cody-Waite
// reduction x = k ln2 + r, |r| <= ln2 / 2, Taylor polynomial in r (degree 7
// for float, 12 for double; truncation below 1 ulp), then scaling by 2^k
// through the exponent bits. Arguments below kMinArg flush to 0 (so no lane
// ever touches a subnormal); -inf gives 0 and NaN propagates.
template <typename T>
T exp_nonpositive(T x);

template <>
inline float exp_nonpositive<float>(float x) {
  constexpr float kLog2e = 1.44269504088896341f;
  constexpr float kLn2Hi = 0.693359375f;
  constexpr float kLn2Lo = -2.12194440e-4f;
  constexpr float kShift = 0x1.8p23f;
  constexpr float kMinArg = -87.0f;  // e^-87 is still a normal float
  const float xc = std::max(x, kMinArg);
  const float t = xc * kLog2e + kShift;
  const float k = t - kShift;
  const std::int32_t ki = static_cast<std::int32_t>(std::bit_cast<std::uint32_t>(t) - std::bit_cast<std::uint32_t>(kShift));
  float r = xc - k * kLn2Hi;
  r = r - k * kLn2Lo;
  float p = 1.0f / 5040.0f;
  p = p * r + 1.0f / 720.0f;
  p = p * r + 1.0f / 120.0f;
  p = p * r + 1.0f / 24.0f;
  p = p * r + 1.0f / 6.0f;
  p = p * r + 0.5f;
  p = p * r + 1.0f;
  p = p * r + 1.0f;
  const float scale = std::bit_cast<float>(static_cast<std::uint32_t>(ki + 127) << 23);
  const float y = p * scale;
  return x < kMinArg ? 0.0f : y;
}

template <>
inline double exp_nonpositive<double>(double x) {
  constexpr double kLog2e = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93145751953125e-1;
  constexpr double kLn2Lo = 1.42860682030941723212e-6;
  constexpr double kShift = 0x1.8p52;
  constexpr double kMinArg = -708.0;  // e^-708 is still a normal double
  const double xc = std::max(x, kMinArg);
  const double t = xc * kLog2e + kShift;
  const double k = t - kShift;
  const std::int64_t ki = static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(t) - std::bit_cast<std::uint64_t>(kShift));
  double r = xc - k * kLn2Hi;
  r = r - k * kLn2Lo;
  double p = 1.0 / 479001600.0;
  p = p * r + 1.0 / 39916800.0;
  p = p * r + 1.0 / 3628800.0;
  p = p * r + 1.0 / 362880.0;
  p = p * r + 1.0 / 40320.0;
  p = p * r + 1.0 / 5040.0;
  p = p * r + 1.0 / 720.0;
  p = p * r + 1.0 / 120.0;
  p = p * r + 1.0 / 24.0;
  p = p * r + 1.0 / 6.0;
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  const double scale = std::bit_cast<double>(static_cast<std::uint64_t>(ki + 1023) << 52);
  const double y = p * scale;
  return x < kMinArg ? 0.0 : y;
}

// Maximum of value_at(j) over j < length. Exact, so every strategy agrees.
template <typename T, typename F>
T reduce_max_fn(std::size_t length, F&& value_at, const ReductionPlan& plan) {
  return detail::reduce_generated<detail::MaxOp<T>, T>(length, std::forward<F>(value_at), plan);
}

template <typename T, typename F>
T reduce_sum_fn(std::size_t length, F&& value_at, const ReductionPlan& plan) {
  return detail::reduce_generated<detail::SumOp<T>, T>(length, std::forward<F>(value_at), plan);
}

// Two-pass stabilised log-sum-exp: M = max, then M + log(max(sum exp(x - M), 1e-30)).
// value_at is evaluated twice per index (recomputed, not cached). Entries equal
// to -inf contribute zero; if every entry is -inf the result is -inf.
template <typename T, typename F>
T log_sum_exp_fn(std::size_t length, F&& value_at, const ReductionPlan& plan) {
  const T m = reduce_max_fn<T>(length, value_at, plan);
  if (m == -std::numeric_limits<T>::infinity()) return m;
  const T s = reduce_sum_fn<T>(
      length, [&](std::size_t j) { return exp_nonpositive<T>(value_at(j) - m); }, plan);
  return m + std::log(std::max(s, static_cast<T>(kLseSumFloor)));
}

// log_sum_exp_fn over `width` sequences at once; result[c] is bit-identical to
// log_sum_exp_fn(length, [&](i) { return value_at(i, c); }, plan).
template <typename T, typename F>
void log_sum_exp_block(std::size_t length, std::size_t width, F&& value_at, const ReductionPlan& plan, T* result) {
  constexpr std::size_t kMaxWidth = 64;
  if (width > kMaxWidth) throw Error(ErrorCode::kInvalidArgument, "log_sum_exp_block width exceeds 64");
  T maxima[kMaxWidth];
  detail::reduce_generated_block<detail::MaxOp<T>, T>(length, width, value_at, plan, maxima);
  T shift[kMaxWidth];
  for (std::size_t c = 0; c < width; ++c) {
    // An all -inf column contributes exp(-inf - 0) = 0 terms; its result is fixed below.
    shift[c] = maxima[c] == -std::numeric_limits<T>::infinity() ? T(0) : maxima[c];
  }
  detail::reduce_generated_block<detail::SumOp<T>, T>(
      length, width, [&](std::size_t i, std::size_t c) { return exp_nonpositive<T>(value_at(i, c) - shift[c]); },
      plan, result);
  for (std::size_t c = 0; c < width; ++c) {
    result[c] = maxima[c] == -std::numeric_limits<T>::infinity()
                    ? maxima[c]
                    : maxima[c] + std::log(std::max(result[c], static_cast<T>(kLseSumFloor)));
  }
}

template <typename T>
T reduce_max(StridedView<T> view, const ReductionPlan& plan) {
  return reduce_max_fn<T>(view.size(), [&](std::size_t j) { return view[j]; }, plan);
}

template <typename T>
T reduce_sum(StridedView<T> view, const ReductionPlan& plan) {
  return reduce_sum_fn<T>(view.size(), [&](std::size_t j) { return view[j]; }, plan);
}

template <typename T>
T log_sum_exp(StridedView<T> view, const ReductionPlan& plan) {
  return log_sum_exp_fn<T>(view.size(), [&](std::size_t j) { return view[j]; }, plan);
}

// True when log_sum_exp returned the all -inf sentinel.
template <typename T>
bool is_all_negative_infinity(T lse_result) {
  return lse_result == -std::numeric_limits<T>::infinity();
}

}  // namespace logsinkhorn
