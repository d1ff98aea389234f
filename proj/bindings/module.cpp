#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "transtab/field_scan.hpp"
#include "transtab/models.hpp"
#include "transtab/monitor.hpp"
#include "transtab/run.hpp"

namespace py = pybind11;
using namespace transtab;

namespace {

IntegratorConfig make_cfg(double h, const std::string& jacobian_mode,
                          double fd_epsilon) {
  IntegratorConfig cfg;
  cfg.h = h;
  if (jacobian_mode == "variational")
    cfg.jacobian_mode = JacobianMode::variational;
  else if (jacobian_mode == "finite-difference")
    cfg.jacobian_mode = JacobianMode::finite_difference;
  else
    throw ConfigError("unknown jacobian_mode '" + jacobian_mode + "'");
  cfg.fd_epsilon = fd_epsilon;
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Finite-time transient stability analysis core";

  // Translators run newest-first, so the base class goes in first.
  py::register_exception<Error>(m, "TranstabError");
  py::register_exception<NonFiniteState>(m, "NonFiniteStateError");
  py::register_exception<NoConvergence>(m, "NoConvergenceError");

  py::class_<VectorField, std::shared_ptr<VectorField>>(m, "VectorField")
      .def_property_readonly("dim", &VectorField::dim)
      .def("eval", [](const VectorField& vf, const Vec& x) { return vf.eval(x); })
      .def("jacobian", [](const VectorField& vf, const Vec& x) { return vf.jacobian(x); });

  m.def("make_field", &make_field_from_json, py::arg("json_text"));
  m.def("load_field", &load_field, py::arg("path"));

  py::class_<IntegratorConfig>(m, "IntegratorConfig")
      .def(py::init(&make_cfg), py::arg("h") = 1e-3,
           py::arg("jacobian_mode") = "variational", py::arg("fd_epsilon") = 1e-5)
      .def_readonly("h", &IntegratorConfig::h)
      .def_readonly("fd_epsilon", &IntegratorConfig::fd_epsilon);

  py::class_<Trajectory>(m, "Trajectory")
      .def_property_readonly("times", [](const Trajectory& t) { return t.times; })
      .def_property_readonly("states", [](const Trajectory& t) { return t.states; })
      .def("__len__", &Trajectory::size);

  m.def(
      "integrate",
      [](const VectorField& vf, const Vec& x0, double t_end, const IntegratorConfig& cfg) {
        return integrate(vf, x0, t_end, cfg);
      },
      py::arg("field"), py::arg("x0"), py::arg("t_end"),
      py::arg("cfg") = IntegratorConfig{});

  m.def(
      "flow_with_gradient",
      [](const VectorField& vf, const Vec& x0, double t, const IntegratorConfig& cfg) {
        const FlowSample fs = flow_with_gradient(vf, x0, t, cfg);
        return py::make_tuple(fs.phi, fs.grad_phi);
      },
      py::arg("field"), py::arg("x0"), py::arg("t"),
      py::arg("cfg") = IntegratorConfig{});

  py::class_<CauchyGreenTensor>(m, "CauchyGreenTensor")
      .def_readonly("t", &CauchyGreenTensor::t)
      .def_readonly("C", &CauchyGreenTensor::C)
      .def_readonly("eigenvalues", &CauchyGreenTensor::lambda)
      .def_readonly("eigenvectors", &CauchyGreenTensor::xi);

  m.def(
      "cauchy_green",
      [](const VectorField& vf, const Vec& x0, double t, const IntegratorConfig& cfg) {
        return cauchy_green(vf, x0, t, cfg);
      },
      py::arg("field"), py::arg("x0"), py::arg("t"),
      py::arg("cfg") = IntegratorConfig{});

  m.def("repulsion_rate", &repulsion_rate, py::arg("cg"), py::arg("n0"));
  m.def("repulsion_ratio", &repulsion_ratio, py::arg("cg"), py::arg("n0"),
        py::arg("tangent_basis"));
  m.def("max_stretch_rho",
        [](const CauchyGreenTensor& cg) { return max_stretch_certificate(cg).rho; });
  m.def("ftle", &ftle, py::arg("cg"));
  m.def("alignment_angle", &alignment_angle, py::arg("cg"), py::arg("n0"));

  py::class_<EquilibriumInfo>(m, "EquilibriumInfo")
      .def_readonly("x_star", &EquilibriumInfo::x_star)
      .def_readonly("eigenvalues", &EquilibriumInfo::eigenvalues)
      .def_readonly("hyperbolic", &EquilibriumInfo::hyperbolic)
      .def_property_readonly("kind", &EquilibriumInfo::kind_string);

  m.def(
      "find_equilibrium",
      [](const VectorField& vf, const Vec& guess) { return find_equilibrium(vf, guess); },
      py::arg("field"), py::arg("x_guess"));

  py::class_<ScalarFieldGrid>(m, "ScalarFieldGrid")
      .def_property_readonly("values",
                             [](const ScalarFieldGrid& g) {
                               Mat m(g.spec.ni, g.spec.nj);
                               for (int i = 0; i < g.spec.ni; ++i)
                                 for (int j = 0; j < g.spec.nj; ++j) m(i, j) = g.at(i, j);
                               return m;
                             })
      .def_property_readonly("failed",
                             [](const ScalarFieldGrid& g) {
                               Mat m(g.spec.ni, g.spec.nj);
                               for (int i = 0; i < g.spec.ni; ++i)
                                 for (int j = 0; j < g.spec.nj; ++j)
                                   m(i, j) = g.is_failed(i, j) ? 1.0 : 0.0;
                               return m;
                             })
      .def_property_readonly("ridge", [](const ScalarFieldGrid& g) {
        Mat m(g.spec.ni, g.spec.nj);
        for (int i = 0; i < g.spec.ni; ++i)
          for (int j = 0; j < g.spec.nj; ++j) m(i, j) = g.is_ridge(i, j) ? 1.0 : 0.0;
        return m;
      });

  m.def(
      "scan_field",
      [](const VectorField& vf, int axis_i, int axis_j,
         std::pair<double, double> range_i, std::pair<double, double> range_j,
         std::pair<int, int> resolution, const Vec& base_point, double window,
         const std::string& quantity, const IntegratorConfig& cfg, int jobs) {
        GridSpec spec;
        spec.axis_i = axis_i;
        spec.axis_j = axis_j;
        spec.lo_i = range_i.first;
        spec.hi_i = range_i.second;
        spec.lo_j = range_j.first;
        spec.hi_j = range_j.second;
        spec.ni = resolution.first;
        spec.nj = resolution.second;
        spec.base_point = base_point;
        spec.window = window;
        return scan_field(vf, spec,
                          quantity == "ftle" ? FieldQuantity::ftle : FieldQuantity::rho,
                          cfg, jobs);
      },
      py::arg("field"), py::arg("axis_i"), py::arg("axis_j"), py::arg("range_i"),
      py::arg("range_j"), py::arg("resolution"), py::arg("base_point"),
      py::arg("window"), py::arg("quantity") = "rho",
      py::arg("cfg") = IntegratorConfig{}, py::arg("jobs") = 1);

  m.def(
      "extract_ridges",
      [](ScalarFieldGrid& grid, double threshold) {
        const RidgeSet r = extract_ridges(grid, threshold);
        return r.components;
      },
      py::arg("grid"), py::arg("threshold"));

  py::class_<CertificateSeries>(m, "CertificateSeries")
      .def_readonly("times", &CertificateSeries::times)
      .def_readonly("rho", &CertificateSeries::rho)
      .def_readonly("gamma", &CertificateSeries::gamma)
      .def_readonly("margin", &CertificateSeries::margin)
      .def_readonly("truncated", &CertificateSeries::truncated)
      .def_property_readonly("verdicts", [](const CertificateSeries& s) {
        std::vector<std::string> out;
        for (Verdict v : s.verdict) out.push_back(to_string(v));
        return out;
      });

  m.def(
      "certificate_rho",
      [](const VectorField& vf, const Vec& x_P, double horizon, double sample_every,
         const IntegratorConfig& cfg, const std::string& mode) {
        return certificate_rho(vf, x_P, horizon, sample_every, cfg, {},
                               mode == "chained" ? GradientMode::chained
                                                 : GradientMode::reintegrate);
      },
      py::arg("field"), py::arg("x_P"), py::arg("horizon"), py::arg("sample_every"),
      py::arg("cfg") = IntegratorConfig{}, py::arg("mode") = "reintegrate");

  m.def(
      "model_free_le",
      [](const std::vector<double>& times, const std::vector<Vec>& states,
         double delta_t, double t) {
        TimeSeriesWindow w;
        w.times = times;
        w.states = states;
        w.h_s = times.size() > 1 ? times[1] - times[0] : 0.0;
        w.delta_t = delta_t;
        return model_free_le(w, t);
      },
      py::arg("times"), py::arg("states"), py::arg("delta_t"), py::arg("t"));

  m.def(
      "run_config",
      [](const std::string& path, const std::vector<std::string>& overrides, int jobs) {
        return run_config(path, overrides, jobs);
      },
      py::arg("config_path"), py::arg("overrides") = std::vector<std::string>{},
      py::arg("jobs") = 0);
}
