#include "logsinkhorn/experiments.hpp"

#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <exception>
#include <functional>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "logsinkhorn/costs.hpp"
#include "logsinkhorn/solver.hpp"

namespace logsinkhorn {

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

std::string format_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kIo, "bad number '" + std::string(s) + "'");
  }
  return v;
}

template <typename I>
I parse_integer(std::string_view s) {
  I v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kIo, "bad integer '" + std::string(s) + "'");
  }
  return v;
}

std::string format_trace(const std::vector<TracePoint>& trace) {
  std::string out;
  for (std::size_t k = 0; k < trace.size(); ++k) {
    if (k) out.push_back(';');
    out += std::to_string(trace[k].iteration);
    out.push_back(':');
    out += format_double(trace[k].marginal_error);
  }
  return out;
}

std::vector<TracePoint> parse_trace(std::string_view s) {
  std::vector<TracePoint> out;
  while (!s.empty()) {
    const auto end = s.find(';');
    const std::string_view item = s.substr(0, end);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::kIo, "bad trace entry '" + std::string(item) + "'");
    out.push_back({parse_integer<int>(item.substr(0, colon)), parse_double(item.substr(colon + 1))});
    if (end == std::string_view::npos) break;
    s.remove_prefix(end + 1);
  }
  return out;
}

ExperimentRecord make_record(std::string experiment, std::string variant, std::string solver, std::size_t n,
                             std::size_t m, double max_cost, const RunOptions& opts, const SinkhornConfig& config) {
  ExperimentRecord r;
  r.experiment = std::move(experiment);
  r.variant = std::move(variant);
  r.solver = std::move(solver);
  r.n = n;
  r.m = m;
  r.epsilon = config.epsilon;
  r.max_cost = max_cost;
  r.seed = opts.seed;
  r.law = std::string(to_string(opts.law));
  r.precision = std::string(to_string(config.precision));
  r.tolerance = config.tolerance;
  r.max_iterations = config.max_iterations;
  r.check_interval = config.check_interval;
  r.chunk_width = config.chunk_width;
  r.group_size = config.group_size;
  r.reduction = config.reduction == ReductionStrategy::kFlat ? "flat" : "hierarchical";
  r.transpose_for_beta = config.transpose_for_beta;
  const std::size_t scalar = config.precision == Precision::kSingle ? sizeof(float) : sizeof(double);
  r.matrix_bytes = static_cast<std::uint64_t>(n) * m * scalar * (config.transpose_for_beta ? 2 : 1);
  return r;
}

void apply_report(ExperimentRecord& r, const SolveReport& report) {
  r.status = status_label(report.status);
  r.iterations = report.iterations;
  r.marginal_checks = report.marginal_checks;
  r.marginal_error = report.final_marginal_error;
  r.transport_cost = report.transport_cost;
  r.trace = report.error_trace;
  r.elapsed_ms = report.elapsed.count() * 1e3;
}

enum class SolverKind { kLog, kStandard };

SolveReport run_solver(SolverKind kind, const GridProblem& g, const SinkhornConfig& config) {
  return kind == SolverKind::kLog ? solve(g.cost, g.mu, g.nu, config).report
                                  : solve_standard_domain(g.cost, g.mu, g.nu, config).report;
}

// Untimed warmup solves, then `repeats` timed ones; numbers come from the first
// timed solve, elapsed_ms / elapsed_std_ms are the mean / sample deviation.
ExperimentRecord timed(ExperimentRecord r, SolverKind kind, const GridProblem& g, const SinkhornConfig& config,
                       const RunOptions& opts) {
  for (int k = 0; k < opts.warmup; ++k) run_solver(kind, g, config);
  const int repeats = std::max(1, opts.repeats);
  std::vector<double> ms;
  for (int k = 0; k < repeats; ++k) {
    const SolveReport report = run_solver(kind, g, config);
    if (k == 0) apply_report(r, report);
    ms.push_back(report.elapsed.count() * 1e3);
  }
  double mean = 0.0;
  for (double v : ms) mean += v;
  mean /= static_cast<double>(ms.size());
  double var = 0.0;
  for (double v : ms) var += (v - mean) * (v - mean);
  r.elapsed_ms = mean;
  r.elapsed_std_ms = ms.size() > 1 ? std::sqrt(var / static_cast<double>(ms.size() - 1)) : 0.0;
  return r;
}

// Runs independent tasks on up to `threads` threads; results keep task order.
std::vector<ExperimentRecord> run_tasks(const std::vector<std::function<ExperimentRecord()>>& tasks, int threads) {
  std::vector<ExperimentRecord> out(tasks.size());
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), tasks.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < tasks.size(); ++k) out[k] = tasks[k]();
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < tasks.size(); k = next++) {
        try {
          out[k] = tasks[k]();
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

GridProblem grid_with_max_cost(std::size_t n, std::uint64_t seed, GridLaw law, double max_cost) {
  GridProblem g = generate_grid_problem(n, n, seed, law);
  if (max_cost != 1.0) g.cost = normalize_cost(g.cost, max_cost).cost;
  return g;
}

}  // namespace

bool ExperimentRecord::same_numerics(const ExperimentRecord& o) const {
  return experiment == o.experiment && variant == o.variant && solver == o.solver && n == o.n && m == o.m &&
         same_bits(epsilon, o.epsilon) && same_bits(max_cost, o.max_cost) && seed == o.seed && law == o.law &&
         precision == o.precision && same_bits(tolerance, o.tolerance) && max_iterations == o.max_iterations &&
         check_interval == o.check_interval && chunk_width == o.chunk_width && group_size == o.group_size &&
         reduction == o.reduction && transpose_for_beta == o.transpose_for_beta && status == o.status &&
         iterations == o.iterations && marginal_checks == o.marginal_checks &&
         same_bits(marginal_error, o.marginal_error) && same_bits(transport_cost, o.transport_cost) &&
         matrix_bytes == o.matrix_bytes && same_bits(accuracy, o.accuracy) && trace.size() == o.trace.size() &&
         std::equal(trace.begin(), trace.end(), o.trace.begin(), [](const TracePoint& a, const TracePoint& b) {
           return a.iteration == b.iteration && same_bits(a.marginal_error, b.marginal_error);
         });
}

std::string status_label(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kNotConverged:
      return "diverged";
    case SolveStatus::kNumericalFailure:
      return "nan";
  }
  return "nan";
}

std::string csv_header() {
  return "experiment,variant,solver,n,m,epsilon,max_cost,seed,law,precision,tolerance,max_iterations,check_interval,"
         "chunk_width,group_size,reduction,transpose_for_beta,status,iterations,marginal_checks,marginal_error,"
         "transport_cost,matrix_bytes,accuracy,elapsed_ms,elapsed_std_ms,slowdown,trace";
}

namespace {

// RFC 4180 quoting, only when needed.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}

// Splits one record; a quoted field may span lines, which are pulled from `in`.
std::vector<std::string> split_csv_record(std::string line, std::istream& in) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  std::size_t k = 0;
  while (true) {
    if (k == line.size()) {
      if (!quoted) break;
      if (!std::getline(in, line)) throw Error(ErrorCode::kIo, "unterminated quoted CSV field");
      fields.back().push_back('\n');
      k = 0;
      continue;
    }
    const char c = line[k++];
    if (quoted) {
      if (c != '"') {
        fields.back().push_back(c);
      } else if (k < line.size() && line[k] == '"') {
        fields.back().push_back('"');
        ++k;
      } else {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back().push_back(c);
    }
  }
  return fields;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<ExperimentRecord>& records, bool with_header) {
  if (with_header) out << csv_header() << '\n';
  for (const auto& r : records) {
    out << csv_field(r.experiment) << ',' << csv_field(r.variant) << ',' << csv_field(r.solver) << ',' << r.n << ','
        << r.m << ',' << format_double(r.epsilon) << ',' << format_double(r.max_cost) << ',' << r.seed << ','
        << csv_field(r.law) << ',' << csv_field(r.precision) << ','
        << format_double(r.tolerance) << ',' << r.max_iterations << ',' << r.check_interval << ',' << r.chunk_width
        << ',' << r.group_size << ',' << csv_field(r.reduction) << ',' << (r.transpose_for_beta ? 1 : 0) << ','
        << csv_field(r.status)
        << ',' << r.iterations << ',' << r.marginal_checks << ',' << format_double(r.marginal_error) << ','
        << format_double(r.transport_cost) << ',' << r.matrix_bytes << ',' << format_double(r.accuracy) << ','
        << format_double(r.elapsed_ms) << ',' << format_double(r.elapsed_std_ms) << ','
        << format_double(r.slowdown) << ',' << format_trace(r.trace) << '\n';
  }
}

std::vector<ExperimentRecord> read_csv(std::istream& in) {
  std::vector<ExperimentRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (line != csv_header()) throw Error(ErrorCode::kIo, "unexpected CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_record(line, in);
    if (f.size() != 28) throw Error(ErrorCode::kIo, "CSV row has " + std::to_string(f.size()) + " fields, expected 28");
    ExperimentRecord r;
    r.experiment = f[0];
    r.variant = f[1];
    r.solver = f[2];
    r.n = parse_integer<std::size_t>(f[3]);
    r.m = parse_integer<std::size_t>(f[4]);
    r.epsilon = parse_double(f[5]);
    r.max_cost = parse_double(f[6]);
    r.seed = parse_integer<std::uint64_t>(f[7]);
    r.law = f[8];
    r.precision = f[9];
    r.tolerance = parse_double(f[10]);
    r.max_iterations = parse_integer<int>(f[11]);
    r.check_interval = parse_integer<int>(f[12]);
    r.chunk_width = parse_integer<std::size_t>(f[13]);
    r.group_size = parse_integer<std::size_t>(f[14]);
    r.reduction = f[15];
    r.transpose_for_beta = parse_integer<int>(f[16]) != 0;
    r.status = f[17];
    r.iterations = parse_integer<int>(f[18]);
    r.marginal_checks = parse_integer<int>(f[19]);
    r.marginal_error = parse_double(f[20]);
    r.transport_cost = parse_double(f[21]);
    r.matrix_bytes = parse_integer<std::uint64_t>(f[22]);
    r.accuracy = parse_double(f[23]);
    r.elapsed_ms = parse_double(f[24]);
    r.elapsed_std_ms = parse_double(f[25]);
    r.slowdown = parse_double(f[26]);
    r.trace = parse_trace(f[27]);
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

// JSON has no NaN; non-finite numbers are written as strings.
nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

double from_json_number(const nlohmann::json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  return j.get<double>();
}

}  // namespace

void write_json_lines(std::ostream& out, const std::vector<ExperimentRecord>& records) {
  for (const auto& r : records) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& t : r.trace) trace.push_back({t.iteration, json_number(t.marginal_error)});
    const nlohmann::json j = {
        {"experiment", r.experiment},
        {"variant", r.variant},
        {"solver", r.solver},
        {"n", r.n},
        {"m", r.m},
        {"epsilon", json_number(r.epsilon)},
        {"max_cost", json_number(r.max_cost)},
        {"seed", r.seed},
        {"law", r.law},
        {"precision", r.precision},
        {"tolerance", json_number(r.tolerance)},
        {"max_iterations", r.max_iterations},
        {"check_interval", r.check_interval},
        {"chunk_width", r.chunk_width},
        {"group_size", r.group_size},
        {"reduction", r.reduction},
        {"transpose_for_beta", r.transpose_for_beta},
        {"status", r.status},
        {"iterations", r.iterations},
        {"marginal_checks", r.marginal_checks},
        {"marginal_error", json_number(r.marginal_error)},
        {"transport_cost", json_number(r.transport_cost)},
        {"matrix_bytes", r.matrix_bytes},
        {"accuracy", json_number(r.accuracy)},
        {"elapsed_ms", json_number(r.elapsed_ms)},
        {"elapsed_std_ms", json_number(r.elapsed_std_ms)},
        {"slowdown", json_number(r.slowdown)},
        {"trace", trace},
    };
    out << j.dump() << '\n';
  }
}

std::vector<ExperimentRecord> read_json_lines(std::istream& in) {
  std::vector<ExperimentRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kIo, std::string("bad JSON line: ") + e.what());
    }
    ExperimentRecord r;
    try {
      r.experiment = j.at("experiment").get<std::string>();
      r.variant = j.at("variant").get<std::string>();
      r.solver = j.at("solver").get<std::string>();
      r.n = j.at("n").get<std::size_t>();
      r.m = j.at("m").get<std::size_t>();
      r.epsilon = from_json_number(j.at("epsilon"));
      r.max_cost = from_json_number(j.at("max_cost"));
      r.seed = j.at("seed").get<std::uint64_t>();
      r.law = j.at("law").get<std::string>();
      r.precision = j.at("precision").get<std::string>();
      r.tolerance = from_json_number(j.at("tolerance"));
      r.max_iterations = j.at("max_iterations").get<int>();
      r.check_interval = j.at("check_interval").get<int>();
      r.chunk_width = j.at("chunk_width").get<std::size_t>();
      r.group_size = j.at("group_size").get<std::size_t>();
      r.reduction = j.at("reduction").get<std::string>();
      r.transpose_for_beta = j.at("transpose_for_beta").get<bool>();
      r.status = j.at("status").get<std::string>();
      r.iterations = j.at("iterations").get<int>();
      r.marginal_checks = j.at("marginal_checks").get<int>();
      r.marginal_error = from_json_number(j.at("marginal_error"));
      r.transport_cost = from_json_number(j.at("transport_cost"));
      r.matrix_bytes = j.at("matrix_bytes").get<std::uint64_t>();
      r.accuracy = from_json_number(j.at("accuracy"));
      r.elapsed_ms = from_json_number(j.at("elapsed_ms"));
      r.elapsed_std_ms = from_json_number(j.at("elapsed_std_ms"));
      r.slowdown = from_json_number(j.at("slowdown"));
      for (const auto& t : j.at("trace")) r.trace.push_back({t.at(0).get<int>(), from_json_number(t.at(1))});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kIo, std::string("bad JSON record: ") + e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ExperimentRecord> run_bench(std::size_t n, std::size_t m, const RunOptions& opts) {
  opts.config.validate();
  const GridProblem g = generate_grid_problem(n, m, opts.seed, opts.law);
  ExperimentRecord r = make_record("bench", "full", "log", n, m, 1.0, opts, opts.config);
  return {timed(std::move(r), SolverKind::kLog, g, opts.config, opts)};
}

std::vector<ExperimentRecord> run_scale(const std::vector<std::size_t>& sizes, const RunOptions& opts) {
  opts.config.validate();
  std::vector<std::function<ExperimentRecord()>> tasks;
  for (std::size_t n : sizes) {
    tasks.emplace_back([n, &opts] {
      const GridProblem g = generate_grid_problem(n, n, opts.seed, opts.law);
      ExperimentRecord r = make_record("scale", "full", "log", n, n, 1.0, opts, opts.config);
      return timed(std::move(r), SolverKind::kLog, g, opts.config, opts);
    });
  }
  return run_tasks(tasks, opts.parallel_experiments);
}

std::vector<ExperimentRecord> run_ablate(std::size_t n, const RunOptions& opts) {
  opts.config.validate();
  struct Variation {
    std::string label;
    SinkhornConfig config;
    SolverKind kind = SolverKind::kLog;
  };
  std::vector<Variation> variations;
  variations.push_back({"full", opts.config});
  {
    SinkhornConfig c = opts.config;
    c.reduction = ReductionStrategy::kFlat;
    variations.push_back({"flat", c});
  }
  for (std::size_t gs : {64, 128, 256, 512}) {
    SinkhornConfig c = opts.config;
    c.group_size = gs;
    variations.push_back({"group_size=" + std::to_string(gs), c});
  }
  for (int ci : {1, 5, 10, 20}) {
    SinkhornConfig c = opts.config;
    c.check_interval = ci;
    variations.push_back({"check_interval=" + std::to_string(ci), c});
  }
  variations.push_back({"standard_domain", opts.config, SolverKind::kStandard});
  {
    SinkhornConfig c = opts.config;
    c.transpose_for_beta = !opts.config.transpose_for_beta;
    variations.push_back({c.transpose_for_beta ? "transpose_for_beta" : "strided_beta", c});
  }

  const GridProblem g = generate_grid_problem(n, n, opts.seed, opts.law);
  std::vector<std::function<ExperimentRecord()>> tasks;
  for (const auto& v : variations) {
    v.config.validate();
    tasks.emplace_back([&v, &g, &opts, n] {
      ExperimentRecord r = make_record("ablate", v.label, v.kind == SolverKind::kLog ? "log" : "standard", n, n, 1.0,
                                       opts, v.config);
      return timed(std::move(r), v.kind, g, v.config, opts);
    });
  }
  std::vector<ExperimentRecord> out = run_tasks(tasks, opts.parallel_experiments);
  const double base = out.front().elapsed_ms;
  for (auto& r : out) r.slowdown = base > 0.0 ? r.elapsed_ms / base : 0.0;
  return out;
}

std::vector<ExperimentRecord> run_stability(std::size_t n, const std::vector<double>& epsilons,
                                            const std::vector<double>& max_costs, const RunOptions& opts) {
  opts.config.validate();
  std::vector<std::function<ExperimentRecord()>> tasks;
  for (double eps : epsilons) {
    for (double max_cost : max_costs) {
      for (SolverKind kind : {SolverKind::kLog, SolverKind::kStandard}) {
        tasks.emplace_back([=, &opts] {
          SinkhornConfig c = opts.config;
          c.epsilon = eps;
          c.validate();
          const GridProblem g = grid_with_max_cost(n, opts.seed, opts.law, max_cost);
          const char* name = kind == SolverKind::kLog ? "log" : "standard";
          ExperimentRecord r = make_record("stability", name, name, n, n, max_cost, opts, c);
          apply_report(r, run_solver(kind, g, c));
          return r;
        });
      }
    }
  }
  return run_tasks(tasks, opts.parallel_experiments);
}

std::vector<ExperimentRecord> run_convergence(const std::vector<std::size_t>& sizes,
                                              const std::vector<double>& epsilons, const RunOptions& opts) {
  opts.config.validate();
  std::vector<std::function<ExperimentRecord()>> tasks;
  for (std::size_t n : sizes) {
    for (double eps : epsilons) {
      tasks.emplace_back([=, &opts] {
        SinkhornConfig c = opts.config;
        c.epsilon = eps;
        c.validate();
        const GridProblem g = generate_grid_problem(n, n, opts.seed, opts.law);
        ExperimentRecord r = make_record("convergence", "full", "log", n, n, 1.0, opts, c);
        apply_report(r, run_solver(SolverKind::kLog, g, c));
        return r;
      });
    }
  }
  return run_tasks(tasks, opts.parallel_experiments);
}

ColorTransferOutcome run_color_transfer(const RgbImage& source, const RgbImage& target, std::size_t sample_count,
                                        const RunOptions& opts) {
  ColorTransferOptions o;
  o.sample_count = sample_count;
  o.epsilon = opts.config.epsilon;
  o.seed = opts.seed;
  o.solver = opts.config;
  ColorTransferResult res = color_transfer(source, target, o);
  ExperimentRecord r = make_record("color-transfer", "full", "log", sample_count, sample_count, 0.0, opts, opts.config);
  r.law.clear();
  apply_report(r, res.report);
  return {std::move(r), std::move(res.image)};
}

PointCloudOutcome run_pointcloud(std::size_t n, std::size_t dimension, double angle,
                                 const std::vector<double>& translation, double sigma, const RunOptions& opts) {
  opts.config.validate();
  RigidPair pair = generate_rigid_pair(n, dimension, angle, translation, sigma, opts.seed);
  MatchResult res = match_point_clouds(pair.source, pair.target, opts.config.epsilon, opts.config);
  ExperimentRecord r = make_record("pointcloud", "full", "log", n, n, 0.0, opts, opts.config);
  r.law.clear();
  apply_report(r, res.report);
  r.accuracy = match_accuracy(res.correspondences, pair.ground_truth);
  return {std::move(r), std::move(pair), std::move(res.correspondences)};
}

}  // namespace logsinkhorn
