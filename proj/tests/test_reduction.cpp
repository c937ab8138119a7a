#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "logsinkhorn/parallel.hpp"
#include "logsinkhorn/reduction.hpp"
#include "oracles.hpp"

using namespace logsinkhorn;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <typename T>
std::vector<T> uniform_values(std::size_t n, T lo, T hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<T> v(n);
  for (T& x : v) x = static_cast<T>(u(gen));
  return v;
}

// The documented tree written out independently: lanes, idle lanes padded with
// the identity, halving trees per chunk and across chunks.
template <typename T>
T documented_tree_sum(const std::vector<T>& x, std::size_t chunk_width, std::size_t group_size) {
  std::vector<T> lanes(group_size, T(0));
  std::vector<bool> used(group_size, false);
  for (std::size_t j = 0; j < x.size(); ++j) {
    const std::size_t t = j % group_size;
    lanes[t] = used[t] ? lanes[t] + x[j] : x[j];
    used[t] = true;
  }
  auto halve = [](std::vector<T> a) {
    while (a.size() > 1) {
      const std::size_t h = (a.size() + 1) / 2;
      for (std::size_t t = 0; t + h < a.size(); ++t) a[t] = a[t] + a[t + h];
      a.resize(h);
    }
    return a[0];
  };
  std::vector<T> chunks;
  for (std::size_t c = 0; c < group_size / chunk_width; ++c) {
    chunks.push_back(halve(std::vector<T>(lanes.begin() + c * chunk_width, lanes.begin() + (c + 1) * chunk_width)));
  }
  return halve(chunks);
}

template <typename T>
bool bit_equal(T a, T b) {
  return std::bit_cast<std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>(a) ==
         std::bit_cast<std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>(b);
}

}  // namespace

TEST_CASE("reduce_max examples") {
  const ReductionPlan plan;
  const std::vector<double> a{3, 1, 2};
  CHECK(reduce_max<double>(std::span<const double>(a), plan) == 3);
  const std::vector<double> b{-kInf, 5};
  CHECK(reduce_max<double>(std::span<const double>(b), plan) == 5);
  const std::vector<double> c{-kInf, -kInf};
  CHECK(reduce_max<double>(std::span<const double>(c), plan) == -kInf);
}

TEST_CASE("reduce_max equals a sequential scan") {
  const ReductionPlan plan;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto v = uniform_values<double>(1000, -1e3, 1e3, seed);
    double seq = v[0];
    for (double x : v) seq = std::max(seq, x);
    CHECK(reduce_max<double>(std::span<const double>(v), plan) == seq);
    const ReductionPlan flat{32, 256, ReductionStrategy::kFlat};
    CHECK(reduce_max<double>(std::span<const double>(v), flat) == seq);
  }
}

TEST_CASE("empty views are rejected") {
  const ReductionPlan plan;
  const std::vector<double> e;
  CHECK_THROWS_AS(reduce_max<double>(std::span<const double>(e), plan), Error);
  CHECK_THROWS_AS(reduce_sum<double>(std::span<const double>(e), plan), Error);
  CHECK_THROWS_AS(log_sum_exp<double>(std::span<const double>(e), plan), Error);
  try {
    reduce_sum<double>(std::span<const double>(e), plan);
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::kEmptyView);
  }
}

TEST_CASE("reduce_sum examples") {
  const ReductionPlan plan;
  const std::vector<double> a{1, 2, 3};
  CHECK(reduce_sum<double>(std::span<const double>(a), plan) == 6);
  for (std::size_t n : {1u, 7u, 255u, 256u, 257u, 100000u, 1u << 20}) {
    const std::vector<float> ones(n, 1.0f);
    CHECK(reduce_sum<float>(std::span<const float>(ones), plan) == static_cast<float>(n));
  }
}

TEST_CASE("reduce_sum against a compensated sum") {
  const ReductionPlan plan;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto d = uniform_values<double>(4096, 0.0, 1.0, seed);
    const double ref = oracle::kahan_sum(d);
    CHECK(std::fabs(reduce_sum<double>(std::span<const double>(d), plan) - ref) / ref <= 1e-12);
    std::vector<float> f(d.begin(), d.end());
    std::vector<double> fd(f.begin(), f.end());
    const double fref = oracle::kahan_sum(fd);
    CHECK(std::fabs(reduce_sum<float>(std::span<const float>(f), plan) - fref) / fref <= 1e-5);
  }
}

TEST_CASE("reduce_sum follows the documented tree exactly") {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<std::size_t> len(1, 3000);
  const std::pair<std::size_t, std::size_t> shapes[] = {{32, 256}, {32, 64}, {8, 512}, {1, 4}, {16, 16}};
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = uniform_values<float>(len(gen), -1.0f, 1.0f, 100 + trial);
    for (auto [cw, gs] : shapes) {
      const ReductionPlan plan{cw, gs};
      CHECK(bit_equal(reduce_sum<float>(std::span<const float>(v), plan), documented_tree_sum(v, cw, gs)));
    }
  }
}

TEST_CASE("strided views read columns") {
  const std::size_t n = 300, m = 7;
  const auto c = uniform_values<double>(n * m, 0.0, 1.0, 3);
  for (std::size_t j = 0; j < m; ++j) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = c[i * m + j];
    const ReductionPlan plan;
    CHECK(bit_equal(reduce_sum<double>(StridedView<double>(c.data() + j, n, m), plan),
                    reduce_sum<double>(std::span<const double>(col), plan)));
    CHECK(bit_equal(log_sum_exp<double>(StridedView<double>(c.data() + j, n, m), plan),
                    log_sum_exp<double>(std::span<const double>(col), plan)));
  }
}

TEST_CASE("log_sum_exp examples") {
  const ReductionPlan plan;
  for (double x : {-3.5, 0.0, 17.25}) {
    const std::vector<double> v{x};
    CHECK(log_sum_exp<double>(std::span<const double>(v), plan) == x);
  }
  const std::vector<double> zeros{0, 0};
  CHECK(log_sum_exp<double>(std::span<const double>(zeros), plan) == doctest::Approx(0.6931472).epsilon(1e-7));
  const std::vector<float> zf{0, 0};
  CHECK(log_sum_exp<float>(std::span<const float>(zf), plan) == doctest::Approx(0.6931472).epsilon(1e-7));
  const std::vector<double> dominated{-1000, 0};
  CHECK(log_sum_exp<double>(std::span<const double>(dominated), plan) == 0.0);
  const std::vector<float> dominated_f{-1000, 0};
  CHECK(log_sum_exp<float>(std::span<const float>(dominated_f), plan) == 0.0f);
  const std::vector<double> masked{-kInf, 1.0, -kInf};
  CHECK(log_sum_exp<double>(std::span<const double>(masked), plan) == 1.0);
  const std::vector<double> all_masked{-kInf, -kInf};
  const double sentinel = log_sum_exp<double>(std::span<const double>(all_masked), plan);
  CHECK(is_all_negative_infinity(sentinel));
}

TEST_CASE_TEMPLATE("log_sum_exp properties over 1000 seeded cases", T, float, double) {
  const ReductionPlan plan;
  std::mt19937_64 gen(sizeof(T) == 4 ? 2024 : 2025);
  std::uniform_int_distribution<std::size_t> len(1, 64);
  std::uniform_real_distribution<double> val(-100.0, 100.0);
  std::uniform_real_distribution<double> shift(-100.0, 100.0);
  const double eps = std::numeric_limits<T>::epsilon();
  const double oracle_tol = sizeof(T) == 4 ? 1e-6 : 1e-13;
  int shift_fail = 0, bound_fail = 0, oracle_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<T> x(len(gen));
    for (T& v : x) v = static_cast<T>(val(gen));
    const T c = static_cast<T>(shift(gen));
    const T l = log_sum_exp<T>(std::span<const T>(x), plan);

    // Shift invariance, 4 ulps of the largest magnitude involved.
    std::vector<T> xs(x);
    for (T& v : xs) v = v + c;
    const T ls = log_sum_exp<T>(std::span<const T>(xs), plan);
    double scale = std::fabs(static_cast<double>(l)) + std::fabs(static_cast<double>(c));
    for (T v : xs) scale = std::max(scale, std::fabs(static_cast<double>(v)));
    if (std::fabs(static_cast<double>(ls) - (static_cast<double>(l) + c)) > 4 * eps * std::max(1.0, scale)) {
      ++shift_fail;
    }

    // max <= LSE <= max + ln m, in working precision.
    const T mx = *std::max_element(x.begin(), x.end());
    if (!(mx <= l && l <= mx + std::log(static_cast<T>(x.size())))) ++bound_fail;

    // Extended-precision oracle.
    const long double ref = oracle::lse(x);
    const long double rel = std::fabs(static_cast<long double>(l) - ref) / std::max(1.0L, std::fabs(ref));
    if (rel > oracle_tol) ++oracle_fail;
  }
  CHECK(shift_fail == 0);
  CHECK(bound_fail == 0);
  CHECK(oracle_fail == 0);
}

TEST_CASE("log_sum_exp stays finite on [-1e6, 0] in single precision") {
  const ReductionPlan plan;
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<std::size_t> len(1, 512);
  std::uniform_real_distribution<double> val(-1e6, 0.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<float> x(len(gen));
    for (float& v : x) v = static_cast<float>(val(gen));
    if (trial % 3 == 0) x[0] = -1e6f;
    if (trial % 3 == 1) x[0] = 0.0f;
    CHECK(std::isfinite(log_sum_exp<float>(std::span<const float>(x), plan)));
  }
}

TEST_CASE_TEMPLATE("exp_nonpositive against std::exp", T, float, double) {
  const double tol = sizeof(T) == 4 ? 2.5e-7 : 5e-16;
  const T lo = sizeof(T) == 4 ? T(-87) : T(-708);
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(static_cast<double>(lo), 0.0);
  double worst = 0.0;
  for (int k = 0; k < 200000; ++k) {
    const T x = static_cast<T>(u(gen));
    const long double ref = std::exp(static_cast<long double>(x));
    worst = std::max(worst, static_cast<double>(std::fabs(exp_nonpositive<T>(x) - ref) / ref));
  }
  CHECK(worst <= tol);
  CHECK(exp_nonpositive<T>(T(0)) == T(1));
  CHECK(exp_nonpositive<T>(-std::numeric_limits<T>::infinity()) == T(0));
  CHECK(exp_nonpositive<T>(lo - T(1)) == T(0));
  CHECK(std::isnan(exp_nonpositive<T>(std::numeric_limits<T>::quiet_NaN())));
}

TEST_CASE("flat strategy is a left fold") {
  const ReductionPlan flat{32, 256, ReductionStrategy::kFlat};
  const auto v = uniform_values<float>(1000, 0.0f, 1.0f, 4);
  float seq = v[0];
  for (std::size_t j = 1; j < v.size(); ++j) seq += v[j];
  CHECK(bit_equal(reduce_sum<float>(std::span<const float>(v), flat), seq));
}

TEST_CASE_TEMPLATE("blocked column LSE matches the single-column path bit for bit", T, float, double) {
  std::mt19937_64 gen(12);
  std::uniform_int_distribution<std::size_t> len(1, 1200);
  std::uniform_int_distribution<std::size_t> wid(1, 64);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = len(gen), w = wid(gen), m = w + 3;
    const auto c = uniform_values<T>(n * m, T(0), T(1), 500 + trial);
    const auto a = uniform_values<T>(n, T(-1), T(1), 900 + trial);
    const T inv_eps = T(1) / T(0.01);
    for (auto strategy : {ReductionStrategy::kHierarchical, ReductionStrategy::kFlat}) {
      const ReductionPlan plan{32, trial % 2 ? 256u : 64u, strategy};
      std::vector<T> block(w);
      log_sum_exp_block<T>(
          n, w, [&](std::size_t i, std::size_t k) { return (a[i] - c[i * m + k]) * inv_eps; }, plan, block.data());
      for (std::size_t k = 0; k < w; ++k) {
        const T single = log_sum_exp_fn<T>(n, [&](std::size_t i) { return (a[i] - c[i * m + k]) * inv_eps; }, plan);
        CHECK(bit_equal(block[k], single));
      }
    }
  }
}

TEST_CASE("results do not depend on the worker count") {
  const std::size_t rows = 64, len = 777;
  const auto v = uniform_values<float>(rows * len, -30.0f, 0.0f, 8);
  const ReductionPlan plan;
  auto run = [&](int workers) {
    std::vector<float> out(rows);
    parallel_for(rows, workers, [&](std::size_t r) {
      out[r] = log_sum_exp<float>(std::span<const float>(v.data() + r * len, len), plan);
    });
    return out;
  };
  const auto one = run(1);
  for (int workers : {2, 4, 7}) {
    const auto other = run(workers);
    for (std::size_t r = 0; r < rows; ++r) CHECK(bit_equal(one[r], other[r]));
  }
}

TEST_CASE("plan validation") {
  CHECK_NOTHROW((ReductionPlan{32, 256}.validate()));
  CHECK_THROWS_AS((ReductionPlan{0, 256}.validate()), Error);
  CHECK_THROWS_AS((ReductionPlan{32, 100}.validate()), Error);
}
