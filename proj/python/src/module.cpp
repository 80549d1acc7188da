#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "json.hpp"
#include "percoz/asymptotics.hpp"
#include "percoz/combinatorics.hpp"
#include "percoz/exact.hpp"
#include "percoz/renewal.hpp"
#include "percoz/sampler.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace percoz;

namespace {

py::object to_py(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return py::none();
    case json::value_t::boolean: return py::bool_(j.get<bool>());
    case json::value_t::number_integer: return py::int_(j.get<std::int64_t>());
    case json::value_t::number_unsigned: return py::int_(j.get<std::uint64_t>());
    case json::value_t::number_float: return py::float_(j.get<double>());
    case json::value_t::string: return py::str(j.get<std::string>());
    case json::value_t::array: {
      py::list l;
      for (const auto& e : j) l.append(to_py(e));
      return l;
    }
    default: {
      py::dict d;
      for (const auto& [k, v] : j.items()) d[py::str(k)] = to_py(v);
      return d;
    }
  }
}

json from_py(py::handle h) {
  if (h.is_none()) return nullptr;
  if (py::isinstance<py::bool_>(h)) return h.cast<bool>();
  if (py::isinstance<py::int_>(h)) return h.cast<std::int64_t>();
  if (py::isinstance<py::float_>(h)) return h.cast<double>();
  if (py::isinstance<py::str>(h)) return h.cast<std::string>();
  if (py::isinstance<py::dict>(h)) {
    json o = json::object();
    for (auto [k, v] : h.cast<py::dict>()) o[py::str(k).cast<std::string>()] = from_py(v);
    return o;
  }
  if (py::isinstance<py::sequence>(h)) {
    json a = json::array();
    for (auto e : h.cast<py::sequence>()) a.push_back(from_py(e));
    return a;
  }
  throw py::type_error("cannot convert " + py::repr(h).cast<std::string>() + " to JSON");
}

Point to_point(const std::vector<int>& c) { return Point::from(c); }

std::vector<int> from_point(const Point& p) { return {p.c.begin(), p.c.begin() + p.dim}; }

Direction direction_or_axis(const std::optional<std::vector<int>>& t, int dim) {
  return t ? Direction::from_integer(to_point(*t)) : Direction::axis(dim, 0);
}

py::dict py_phi(const std::vector<int>& x, int max_volume) {
  const Point p = to_point(x);
  const auto r = phi_exact(p, max_volume > 0 ? max_volume : static_cast<int>(p.norm1()) + 2);
  py::dict d;
  d["phi"] = r.phi;
  d["psi"] = r.psi;
  d["upsilon"] = r.upsilon;
  d["certified"] = r.certified;
  d["animals_visited"] = r.animals_visited;
  return d;
}

py::dict py_estimate(int dim, double p, int half_width, std::uint64_t samples, std::uint64_t seed,
                     const std::vector<std::vector<int>>& displacements, const std::vector<std::string>& kinds,
                     const std::optional<std::vector<int>>& t, int margin, int threads) {
  SamplerParams prm;
  prm.dim = dim;
  prm.p = p;
  prm.t = direction_or_axis(t, dim);
  prm.box = Box::centered(dim, half_width);
  prm.margin = margin;
  prm.samples = samples;
  prm.seed = seed;
  prm.threads = threads;
  prm.kinds = 0;
  for (const auto& k : kinds) prm.kinds |= event_kind_bit(k);
  std::vector<Point> xs;
  for (const auto& x : displacements) xs.push_back(to_point(x));
  KernelEstimates est;
  {
    py::gil_scoped_release release;
    est = estimate_kernels(prm, xs);
  }
  py::dict out;
  for (const auto& [name, by_x] : est.results) {
    py::dict per;
    for (const auto& [x, r] : by_x) {
      py::dict e;
      e["value"] = r.value;
      e["std_error"] = r.std_error;
      e["hits"] = r.hits;
      e["n"] = r.n_samples;
      per[py::tuple(py::cast(from_point(x)))] = e;
    }
    out[py::str(name)] = per;
  }
  out["implication_violations"] = est.implication_violations;
  return out;
}

py::object py_exact(const std::string& event, const std::vector<int>& lo, const std::vector<int>& hi,
                    const std::vector<int>& x, const std::optional<std::vector<int>>& t, int margin,
                    const std::vector<double>& ps) {
  const Box b(to_point(lo), to_point(hi));
  const auto ev = named_event(event, b, to_point(x), direction_or_axis(t, b.dim()), margin);
  const auto r = enumerate_event(b, ev.edges, ev.predicate, event);
  py::dict d = to_py(r.to_json(ps));
  py::list counts;
  for (const auto& c : r.poly.counts) counts.append(py::int_(py::str(c.str())));
  d["counts_by_open_edges"] = counts;
  return std::move(d);
}

py::object py_synthetic_kernel(py::dict spec) { return to_py(synthetic::from_spec(from_py(spec)).to_json()); }

py::object py_renewal_solve(py::dict kernel, int half_width) {
  const Kernel f = Kernel::from_json(from_py(kernel));
  const auto h = renewal_solve_dense(f, Box::centered(f.dim, half_width), Direction::axis(f.dim, 0));
  return to_py(h.to_sparse("h").to_json());
}

py::dict py_oz_model(py::dict kernel, const std::vector<double>& direction) {
  const Kernel f = Kernel::from_json(from_py(kernel));
  Eigen::VectorXd dir = Eigen::Map<const Eigen::VectorXd>(direction.data(), static_cast<Eigen::Index>(direction.size()));
  const auto m = build_model(f, dir);
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  py::list cov;
  for (Eigen::Index i = 0; i < m.cov.rows(); ++i) cov.append(vec(m.cov.row(i).transpose()));
  py::dict d;
  d["s_star"] = vec(m.s_star);
  d["mu"] = vec(m.mu);
  d["cov"] = cov;
  d["phi"] = m.phi_prefactor;
  return d;
}

py::dict py_oz_fit(py::dict series, int dim) {
  const auto s = DecaySeries::from_json(from_py(series));
  const auto f = oz_fit(s, dim);
  py::dict d;
  d["tau"] = f.tau;
  d["tau_error"] = f.tau_error;
  d["phi"] = f.phi;
  d["phi_error"] = f.phi_error;
  d["kappa"] = f.kappa;
  d["model_mismatch"] = f.model_mismatch;
  d["residuals_shrink"] = f.residuals_shrink;
  d["naive_tau"] = f.naive_tau;
  return d;
}

}  // namespace

PYBIND11_MODULE(_percoz, m) {
  m.doc() = "percoz core bindings";
  m.attr("__version__") = PERCOZ_VERSION;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  m.def("phi", &py_phi, py::arg("x"), py::arg("max_volume") = 0,
        "Minimal external boundary phi(x), path length psi(x) and certification flag.");
  m.def("estimate", &py_estimate, py::arg("dim"), py::arg("p"), py::arg("half_width"), py::arg("samples"),
        py::arg("seed") = 1, py::arg("displacements") = std::vector<std::vector<int>>{{1, 0, 0}},
        py::arg("kinds") = std::vector<std::string>{"two-point", "h", "f"}, py::arg("t") = py::none(),
        py::arg("margin") = 1, py::arg("threads") = 1);
  m.def("exact", &py_exact, py::arg("event"), py::arg("lo"), py::arg("hi"), py::arg("x"), py::arg("t") = py::none(),
        py::arg("margin") = 1, py::arg("p") = std::vector<double>{});
  m.def("synthetic_kernel", &py_synthetic_kernel, py::arg("spec"));
  m.def("renewal_solve", &py_renewal_solve, py::arg("kernel"), py::arg("half_width"));
  m.def("oz_model", &py_oz_model, py::arg("kernel"), py::arg("direction"));
  m.def("oz_fit", &py_oz_fit, py::arg("series"), py::arg("dim"));
}
