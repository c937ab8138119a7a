// Command-line harness: parses flags, runs one experiment driver, prints
// records as CSV (default) or JSON lines.
//
// Exit codes: 0 success, 1 numerical failure in a required solve, 2 usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "logsinkhorn/experiments.hpp"
#include "logsinkhorn/io.hpp"

namespace ls = logsinkhorn;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

struct GlobalFlags {
  std::uint64_t seed = 0;
  std::string precision = "single";
  std::string law = "bump";
  double tol = 1e-6;
  int max_iters = 10000;
  int check_interval = 10;
  std::size_t chunk_width = 32;
  std::size_t group_size = 256;
  std::string reduction = "hierarchical";
  bool transpose_beta = false;
  int workers = 0;
  int parallel_experiments = 1;
  int warmup = 3;
  int repeats = 10;
  std::string out;
  bool json = false;
};

ls::RunOptions run_options(const GlobalFlags& g, double eps) {
  ls::RunOptions o;
  o.seed = g.seed;
  o.law = ls::parse_grid_law(g.law);
  o.warmup = g.warmup;
  o.repeats = g.repeats;
  o.parallel_experiments = g.parallel_experiments;
  o.config.epsilon = eps;
  o.config.tolerance = g.tol;
  o.config.max_iterations = g.max_iters;
  o.config.check_interval = g.check_interval;
  o.config.chunk_width = g.chunk_width;
  o.config.group_size = g.group_size;
  o.config.reduction = g.reduction == "flat" ? ls::ReductionStrategy::kFlat : ls::ReductionStrategy::kHierarchical;
  o.config.transpose_for_beta = g.transpose_beta;
  o.config.precision = ls::parse_precision(g.precision);
  o.config.workers = g.workers;
  o.config.validate();
  return o;
}

void emit(const GlobalFlags& g, const std::vector<ls::ExperimentRecord>& records) {
  std::ofstream file;
  if (!g.out.empty()) {
    file.open(g.out);
    if (!file) throw ls::Error(ls::ErrorCode::kIo, "cannot open " + g.out + " for writing");
  }
  std::ostream& out = g.out.empty() ? std::cout : file;
  if (g.json) {
    ls::write_json_lines(out, records);
  } else {
    ls::write_csv(out, records);
  }
}

bool any_nan(const std::vector<ls::ExperimentRecord>& records) {
  for (const auto& r : records) {
    if (r.status == "nan") return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-domain entropic optimal transport experiments"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--seed", g.seed, "RNG seed");
  app.add_option("--precision", g.precision, "working precision")->check(CLI::IsMember({"single", "double"}));
  app.add_option("--law", g.law, "grid weight law")->check(CLI::IsMember({"bump", "uniform"}));
  app.add_option("--tol", g.tol, "marginal L1 tolerance")->check(CLI::PositiveNumber);
  app.add_option("--max-iters", g.max_iters, "iteration budget")->check(CLI::PositiveNumber);
  app.add_option("--check-interval", g.check_interval, "iterations between marginal checks")
      ->check(CLI::PositiveNumber);
  app.add_option("--chunk-width", g.chunk_width, "lanes per reduction chunk")->check(CLI::PositiveNumber);
  app.add_option("--group-size", g.group_size, "lanes per row reduction")->check(CLI::PositiveNumber);
  app.add_option("--reduction", g.reduction, "reduction strategy")->check(CLI::IsMember({"hierarchical", "flat"}));
  app.add_flag("--transpose-beta", g.transpose_beta, "keep a transposed cost copy for the beta update");
  app.add_option("--workers", g.workers, "threads per solve (0 = all)")->check(CLI::NonNegativeNumber);
  app.add_option("--parallel-experiments", g.parallel_experiments, "parameter points run concurrently")
      ->check(CLI::PositiveNumber);
  app.add_option("--warmup", g.warmup, "untimed solves before timing")->check(CLI::NonNegativeNumber);
  app.add_option("--repeats", g.repeats, "timed solves")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "write records here instead of stdout");
  app.add_flag("--json", g.json, "emit JSON lines instead of CSV");

  std::size_t bench_n = 512, bench_m = 0;
  double bench_eps = 0.01;
  auto* bench = app.add_subcommand("bench", "time one grid problem");
  bench->add_option("--n", bench_n, "source size")->check(CLI::PositiveNumber);
  bench->add_option("--m", bench_m, "target size (default n)")->check(CLI::PositiveNumber);
  bench->add_option("--eps", bench_eps, "regularisation")->check(CLI::PositiveNumber);

  std::vector<std::size_t> scale_sizes{64, 128, 256, 512, 1024, 2048};
  double scale_eps = 0.01;
  auto* scale = app.add_subcommand("scale", "sweep the problem size");
  scale->add_option("--sizes", scale_sizes, "problem sizes")->delimiter(',')->check(CLI::PositiveNumber);
  scale->add_option("--eps", scale_eps, "regularisation")->check(CLI::PositiveNumber);

  std::size_t ablate_n = 512;
  double ablate_eps = 0.01;
  auto* ablate = app.add_subcommand("ablate", "full configuration against single-knob variations");
  ablate->add_option("--n", ablate_n, "problem size")->check(CLI::PositiveNumber);
  ablate->add_option("--eps", ablate_eps, "regularisation")->check(CLI::PositiveNumber);

  std::size_t stab_n = 512;
  std::vector<double> stab_eps{1, 0.1, 0.01, 0.005, 0.001, 1e-4};
  std::vector<double> stab_cost{1, 10, 100};
  auto* stability = app.add_subcommand("stability", "log and standard solvers over an (eps, max C) grid");
  stability->add_option("--n", stab_n, "problem size")->check(CLI::PositiveNumber);
  stability->add_option("--eps", stab_eps, "regularisation grid")->delimiter(',')->check(CLI::PositiveNumber);
  stability->add_option("--max-cost", stab_cost, "cost scale grid")->delimiter(',')->check(CLI::PositiveNumber);

  std::vector<std::size_t> conv_sizes{256, 512, 1024};
  std::vector<double> conv_eps{0.1, 0.01, 0.001};
  auto* convergence = app.add_subcommand("convergence", "marginal-error traces");
  convergence->add_option("--sizes", conv_sizes, "problem sizes")->delimiter(',')->check(CLI::PositiveNumber);
  convergence->add_option("--eps", conv_eps, "regularisation values")->delimiter(',')->check(CLI::PositiveNumber);

  std::string ct_source, ct_target, ct_image;
  std::size_t ct_samples = 512;
  double ct_eps = 0.01;
  auto* color = app.add_subcommand("color-transfer", "recolour a PPM image with another's palette");
  color->add_option("--source", ct_source, "source PPM")->required()->check(CLI::ExistingFile);
  color->add_option("--target", ct_target, "target PPM")->required()->check(CLI::ExistingFile);
  color->add_option("--image", ct_image, "output PPM")->required();
  color->add_option("--samples", ct_samples, "pixels sampled per image")->check(CLI::PositiveNumber);
  color->add_option("--eps", ct_eps, "regularisation")->check(CLI::PositiveNumber);

  std::size_t pc_n = 200, pc_dim = 3;
  double pc_angle = 0.1, pc_sigma = 0.01, pc_eps = 0.01;
  std::vector<double> pc_translation;
  std::string pc_matches, pc_source_out, pc_target_out;
  auto* pointcloud = app.add_subcommand("pointcloud", "match a cloud against a noisy rigid copy");
  pointcloud->add_option("--n", pc_n, "points per cloud")->check(CLI::PositiveNumber);
  pointcloud->add_option("--dim", pc_dim, "2 or 3")->check(CLI::IsMember({2, 3}));
  pointcloud->add_option("--angle", pc_angle, "rotation in the xy-plane, radians");
  pointcloud->add_option("--translation", pc_translation, "offset (default 0.1,-0.2,0.05)")->delimiter(',');
  pointcloud->add_option("--sigma", pc_sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
  pointcloud->add_option("--eps", pc_eps, "regularisation")->check(CLI::PositiveNumber);
  pointcloud->add_option("--matches", pc_matches, "write 'i j weight' correspondences here");
  pointcloud->add_option("--source-out", pc_source_out, "write the source cloud here");
  pointcloud->add_option("--target-out", pc_target_out, "write the shuffled target cloud here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    std::vector<ls::ExperimentRecord> records;
    bool failed = false;
    if (*bench) {
      records = ls::run_bench(bench_n, bench_m ? bench_m : bench_n, run_options(g, bench_eps));
      failed = any_nan(records);
    } else if (*scale) {
      records = ls::run_scale(scale_sizes, run_options(g, scale_eps));
      failed = any_nan(records);
    } else if (*ablate) {
      records = ls::run_ablate(ablate_n, run_options(g, ablate_eps));
      failed = records.front().status == "nan";
    } else if (*stability) {
      // Failures are the measurement here, not an error.
      records = ls::run_stability(stab_n, stab_eps, stab_cost, run_options(g, stab_eps.front()));
    } else if (*convergence) {
      records = ls::run_convergence(conv_sizes, conv_eps, run_options(g, conv_eps.front()));
      failed = any_nan(records);
    } else if (*color) {
      const ls::RgbImage source = ls::read_ppm(std::filesystem::path(ct_source));
      const ls::RgbImage target = ls::read_ppm(std::filesystem::path(ct_target));
      auto outcome = ls::run_color_transfer(source, target, ct_samples, run_options(g, ct_eps));
      ls::write_ppm(std::filesystem::path(ct_image), outcome.image);
      records.push_back(std::move(outcome.record));
    } else if (*pointcloud) {
      if (pc_translation.empty()) pc_translation = {0.1, -0.2, 0.05};
      if (pc_translation.size() == 3 && pc_dim == 2) pc_translation.resize(2);
      auto outcome = ls::run_pointcloud(pc_n, pc_dim, pc_angle, pc_translation, pc_sigma, run_options(g, pc_eps));
      if (!pc_matches.empty()) {
        std::ofstream f(pc_matches);
        if (!f) throw ls::Error(ls::ErrorCode::kIo, "cannot open " + pc_matches + " for writing");
        ls::write_correspondences(f, outcome.matches);
      }
      if (!pc_source_out.empty()) {
        std::ofstream f(pc_source_out);
        if (!f) throw ls::Error(ls::ErrorCode::kIo, "cannot open " + pc_source_out + " for writing");
        ls::write_point_cloud(f, outcome.pair.source);
      }
      if (!pc_target_out.empty()) {
        std::ofstream f(pc_target_out);
        if (!f) throw ls::Error(ls::ErrorCode::kIo, "cannot open " + pc_target_out + " for writing");
        ls::write_point_cloud(f, outcome.pair.target);
      }
      records.push_back(std::move(outcome.record));
    }
    emit(g, records);
    if (failed) {
      std::cerr << "error: a required solve ended in numerical failure\n";
      return kExitNumerical;
    }
    return 0;
  } catch (const ls::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == ls::ErrorCode::kNonFiniteResult || e.code() == ls::ErrorCode::kZeroRowMass) return kExitNumerical;
    return kExitUsage;
  }
}
