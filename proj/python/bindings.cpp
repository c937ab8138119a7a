#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "logsinkhorn/applications.hpp"
#include "logsinkhorn/costs.hpp"
#include "logsinkhorn/reduction.hpp"
#include "logsinkhorn/solver.hpp"

namespace py = pybind11;
using namespace logsinkhorn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

CostMatrix to_cost(const Array& c) {
  if (c.ndim() != 2) throw Error(ErrorCode::kDimensionMismatch, "cost must be a 2-D array");
  const auto n = static_cast<std::size_t>(c.shape(0)), m = static_cast<std::size_t>(c.shape(1));
  return make_cost_matrix(n, m, std::vector<double>(c.data(), c.data() + n * m));
}

DiscreteDistribution to_distribution(const Array& w) {
  if (w.ndim() != 1) throw Error(ErrorCode::kDimensionMismatch, "weights must be a 1-D array");
  return make_distribution(std::span<const double>(w.data(), static_cast<std::size_t>(w.shape(0))));
}

PointCloud to_cloud(const Array& x) {
  if (x.ndim() != 2) throw Error(ErrorCode::kDimensionMismatch, "points must be a 2-D array");
  const auto n = static_cast<std::size_t>(x.shape(0)), d = static_cast<std::size_t>(x.shape(1));
  return make_point_cloud(n, d, std::vector<double>(x.data(), x.data() + n * d));
}

py::array_t<double> to_array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

py::array_t<double> to_array(std::span<const double> v, std::size_t rows, std::size_t cols) {
  return py::array_t<double>({rows, cols}, v.data());
}

py::dict report_dict(const SolveReport& r) {
  py::list trace;
  for (const auto& t : r.error_trace) trace.append(py::make_tuple(t.iteration, t.marginal_error));
  py::dict d;
  d["status"] = std::string(to_string(r.status));
  d["iterations"] = r.iterations;
  d["marginal_error"] = r.final_marginal_error;
  d["transport_cost"] = r.transport_cost;
  d["marginal_checks"] = r.marginal_checks;
  d["trace"] = trace;
  d["elapsed_ms"] = r.elapsed.count() * 1e3;
  return d;
}

DualPotentials potentials(const Array& alpha, const Array& beta) {
  return {std::vector<double>(alpha.data(), alpha.data() + alpha.size()),
          std::vector<double>(beta.data(), beta.data() + beta.size())};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Log-domain entropic optimal transport";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::enum_<Precision>(m, "Precision").value("single", Precision::kSingle).value("double", Precision::kDouble);
  py::enum_<ReductionStrategy>(m, "Reduction")
      .value("hierarchical", ReductionStrategy::kHierarchical)
      .value("flat", ReductionStrategy::kFlat);

  py::class_<SinkhornConfig>(m, "SinkhornConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &SinkhornConfig::epsilon)
      .def_readwrite("tolerance", &SinkhornConfig::tolerance)
      .def_readwrite("max_iterations", &SinkhornConfig::max_iterations)
      .def_readwrite("check_interval", &SinkhornConfig::check_interval)
      .def_readwrite("chunk_width", &SinkhornConfig::chunk_width)
      .def_readwrite("group_size", &SinkhornConfig::group_size)
      .def_readwrite("reduction", &SinkhornConfig::reduction)
      .def_readwrite("transpose_for_beta", &SinkhornConfig::transpose_for_beta)
      .def_readwrite("precision", &SinkhornConfig::precision)
      .def_readwrite("workers", &SinkhornConfig::workers)
      .def("validate", &SinkhornConfig::validate);

  m.def(
      "solve",
      [](const Array& cost, const Array& mu, const Array& nu, const SinkhornConfig& config) {
        const auto c = to_cost(cost);
        const auto a = to_distribution(mu), b = to_distribution(nu);
        SolveResult r;
        {
          py::gil_scoped_release release;
          r = solve(c, a, b, config);
        }
        return py::make_tuple(report_dict(r.report), to_array(r.potentials.alpha), to_array(r.potentials.beta));
      },
      py::arg("cost"), py::arg("mu"), py::arg("nu"), py::arg("config") = SinkhornConfig{},
      "Returns (report, alpha, beta).");

  m.def(
      "solve_standard_domain",
      [](const Array& cost, const Array& mu, const Array& nu, const SinkhornConfig& config) {
        const auto r = solve_standard_domain(to_cost(cost), to_distribution(mu), to_distribution(nu), config);
        return py::make_tuple(report_dict(r.report), to_array(r.u), to_array(r.v));
      },
      py::arg("cost"), py::arg("mu"), py::arg("nu"), py::arg("config") = SinkhornConfig{},
      "Returns (report, u, v).");

  m.def(
      "materialize_plan",
      [](const Array& cost, const Array& mu, const Array& nu, const Array& alpha, const Array& beta, double eps) {
        const auto p =
            materialize_plan(to_cost(cost), to_distribution(mu), to_distribution(nu), potentials(alpha, beta), eps);
        return to_array(p.values, p.rows, p.cols);
      },
      py::arg("cost"), py::arg("mu"), py::arg("nu"), py::arg("alpha"), py::arg("beta"), py::arg("eps"));

  m.def(
      "kkt_residual",
      [](const Array& cost, const Array& mu, const Array& nu, const Array& plan, const Array& alpha,
         const Array& beta, double eps) {
        const auto c = to_cost(cost);
        const TransportPlan p{c.rows(), c.cols(), std::vector<double>(plan.data(), plan.data() + plan.size())};
        return kkt_residual(c, to_distribution(mu), to_distribution(nu), p, potentials(alpha, beta), eps);
      },
      py::arg("cost"), py::arg("mu"), py::arg("nu"), py::arg("plan"), py::arg("alpha"), py::arg("beta"),
      py::arg("eps"));

  m.def(
      "contraction_rate_bound",
      [](double range, double eps) {
        const auto b = contraction_rate_bound(range, eps);
        return py::make_tuple(b.lambda_exp, b.lambda_tanh);
      },
      py::arg("cost_range"), py::arg("eps"), "Returns (lambda_exp, lambda_tanh).");

  m.def(
      "log_sum_exp",
      [](const Array& x) {
        return log_sum_exp<double>(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                                   ReductionPlan{});
      },
      py::arg("x"));

  m.def(
      "generate_grid_problem",
      [](std::size_t n, std::size_t mm, std::uint64_t seed, const std::string& law) {
        const auto g = generate_grid_problem(n, mm, seed, parse_grid_law(law));
        return py::make_tuple(to_array(g.cost.values(), n, mm),
                              to_array(std::vector<double>(g.mu.weights().begin(), g.mu.weights().end())),
                              to_array(std::vector<double>(g.nu.weights().begin(), g.nu.weights().end())));
      },
      py::arg("n"), py::arg("m"), py::arg("seed") = 0, py::arg("law") = "bump", "Returns (cost, mu, nu).");

  m.def(
      "squared_euclidean_cost",
      [](const Array& x, const Array& y) {
        const auto c = squared_euclidean_cost(to_cloud(x), to_cloud(y));
        return to_array(c.values(), c.rows(), c.cols());
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "generate_rigid_pair",
      [](std::size_t n, std::size_t dim, double angle, const std::vector<double>& t, double sigma,
         std::uint64_t seed) {
        const auto p = generate_rigid_pair(n, dim, angle, t, sigma, seed);
        return py::make_tuple(to_array(p.source.coordinates, n, dim), to_array(p.target.coordinates, n, dim),
                              p.ground_truth);
      },
      py::arg("n"), py::arg("dim"), py::arg("angle"), py::arg("translation"), py::arg("sigma"),
      py::arg("seed") = 0, "Returns (source, target, ground_truth).");

  m.def(
      "match_point_clouds",
      [](const Array& x, const Array& y, double eps, const SinkhornConfig& config) {
        const auto r = match_point_clouds(to_cloud(x), to_cloud(y), eps, config);
        py::list out;
        for (const auto& c : r.correspondences) out.append(py::make_tuple(c.source_index, c.target_index, c.weight));
        return py::make_tuple(out, report_dict(r.report));
      },
      py::arg("x"), py::arg("y"), py::arg("eps"), py::arg("config") = SinkhornConfig{},
      "Returns ([(i, j, weight), ...], report).");
}
