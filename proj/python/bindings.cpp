#include "bobsled/aero.hpp"
#include "bobsled/cli.hpp"
#include "bobsled/common.hpp"
#include "bobsled/fitting.hpp"
#include "bobsled/friction.hpp"
#include "bobsled/icehouse.hpp"
#include "bobsled/kinematics.hpp"
#include "bobsled/kvtext.hpp"
#include "bobsled/sim.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace bobsled;

namespace {

fitting::Dataset to_dataset(py::array_t<double> alpha, py::array_t<double> F_z, py::array_t<double> F_y) {
    auto a = alpha.unchecked<1>(), z = F_z.unchecked<1>(), y = F_y.unchecked<1>();
    if (a.shape(0) != z.shape(0) || a.shape(0) != y.shape(0)) throw std::invalid_argument("array lengths differ");
    fitting::Dataset d;
    d.reserve(static_cast<std::size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i) d.push_back({a(i), z(i), y(i)});
    return d;
}

py::dict simulate_file(const std::string& path, std::optional<std::uint64_t> seed) {
    auto file = sim::scenario_from(kv::Document::load(path));
    if (seed) file.scenario.noise.seed = *seed;
    const auto result = sim::simulate(file.scenario, file.models);
    const auto n = static_cast<py::ssize_t>(result.log.size());
    py::array_t<double> t(n), s(n), v(n), beta(n), psi_dot(n), F_y_f(n), F_z_f(n), F_y_r(n), F_z_r(n);
    auto put = [](py::array_t<double>& a, py::ssize_t i, double x) { a.mutable_at(i) = x; };
    for (py::ssize_t i = 0; i < n; ++i) {
        const auto& e = result.log[static_cast<std::size_t>(i)];
        put(t, i, e.state.t);
        put(s, i, e.state.s);
        put(v, i, e.state.v);
        put(beta, i, e.state.beta);
        put(psi_dot, i, e.state.psi_dot);
        put(F_y_f, i, e.F_f.y());
        put(F_z_f, i, e.F_f.z());
        put(F_y_r, i, e.F_r.y());
        put(F_z_r, i, e.F_r.z());
    }
    py::dict out;
    out["t"] = t;
    out["s"] = s;
    out["v"] = v;
    out["beta"] = beta;
    out["psi_dot"] = psi_dot;
    out["F_y_f"] = F_y_f;
    out["F_z_f"] = F_z_f;
    out["F_y_r"] = F_y_r;
    out["F_z_r"] = F_z_r;
    out["energy_residual"] = result.energy_residual;
    out["energy_dissipated"] = result.energy_scale;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Bobsled runner friction, reconstruction and driver evaluation";
    m.attr("__version__") = BOBSLED_VERSION;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<friction::LongitudinalFrictionParams>(m, "LongitudinalFrictionParams")
        .def(py::init<>())
        .def_readwrite("B_x", &friction::LongitudinalFrictionParams::B_x)
        .def_readwrite("C_x", &friction::LongitudinalFrictionParams::C_x)
        .def_readwrite("D_x", &friction::LongitudinalFrictionParams::D_x)
        .def_readwrite("E_x", &friction::LongitudinalFrictionParams::E_x)
        .def_readwrite("zeta_x", &friction::LongitudinalFrictionParams::zeta_x);

    py::class_<friction::LateralFrictionParams>(m, "LateralFrictionParams")
        .def(py::init<>())
        .def(py::init([](double mu, double C, double E, double K) {
                 return friction::LateralFrictionParams{mu, C, E, K, 1.0};
             }),
             py::arg("mu_zeta_y"), py::arg("C_y"), py::arg("E_y"), py::arg("K_y"))
        .def_static("front_reference", &friction::LateralFrictionParams::front_reference)
        .def_static("rear_reference", &friction::LateralFrictionParams::rear_reference)
        .def_readwrite("mu_zeta_y", &friction::LateralFrictionParams::mu_zeta_y)
        .def_readwrite("C_y", &friction::LateralFrictionParams::C_y)
        .def_readwrite("E_y", &friction::LateralFrictionParams::E_y)
        .def_readwrite("K_y", &friction::LateralFrictionParams::K_y)
        .def("__repr__", [](const friction::LateralFrictionParams& p) {
            std::ostringstream s;
            s << "LateralFrictionParams(mu_zeta_y=" << p.mu_zeta_y << ", C_y=" << p.C_y << ", E_y=" << p.E_y
              << ", K_y=" << p.K_y << ")";
            return s.str();
        });

    m.def("mu_x", &friction::mu_x, py::arg("p_mpa"), py::arg("params") = friction::LongitudinalFrictionParams{});
    m.def("force_y", py::vectorize([](double F_z, double alpha, friction::LateralFrictionParams p) {
              return friction::force_y(F_z, alpha, p);
          }),
          py::arg("F_z"), py::arg("alpha"), py::arg("params"));
    m.def("force_y_braghin", py::vectorize(&friction::force_y_braghin), py::arg("F_z"), py::arg("alpha"));
    m.def("track_radius_y", &friction::track_radius_y, py::arg("v"), py::arg("theta_dot"));

    m.def("drag_force",
          [](double v, double CxAx, double p_air, double T, double R) {
              return aero::drag_force(v, CxAx, aero::AirState{p_air, T, R});
          },
          py::arg("v"), py::arg("CxAx"), py::arg("p_air") = 94700.0, py::arg("T") = 275.15, py::arg("R") = 287.05);
    m.def("drag_area_at_beta",
          [](double CxAx, double beta, double yaw_sensitivity) {
              aero::AeroModel model;
              model.CxAx = CxAx;
              model.yaw_sensitivity = yaw_sensitivity;
              return aero::drag_area_at_beta(model, beta);
          },
          py::arg("CxAx"), py::arg("beta"), py::arg("yaw_sensitivity") = aero::kBobYawSensitivityPerDeg);

    m.def("rotation_gamma", &kinematics::rotation_gamma, py::arg("gamma"));
    m.def("rotation_delta", &kinematics::rotation_delta, py::arg("gamma"), py::arg("delta"));
    m.def("rotation_f0_to_f", &kinematics::rotation_f0_to_f, py::arg("gamma"), py::arg("delta"));

    m.def("mu_from_force", &icehouse::mu_from_force, py::arg("F_ice"), py::arg("m"), py::arg("kappa") = 0.0);
    m.def("estimate_glide_friction",
          [](const std::string& path, double window) { return icehouse::estimate_friction(icehouse::GlideRun::load(path), window).mu; },
          py::arg("path"), py::arg("window_fraction") = 0.6);
    m.def("fit_quadratic_mu_p",
          [](const std::vector<double>& p, const std::vector<double>& mu, double E_x) {
              if (p.size() != mu.size()) throw std::invalid_argument("p and mu lengths differ");
              std::vector<icehouse::PressurePoint> pts;
              for (std::size_t i = 0; i < p.size(); ++i) pts.push_back({p[i], mu[i]});
              return icehouse::fit_quadratic_mu_p(pts, E_x);
          },
          py::arg("p"), py::arg("mu"), py::arg("E_x") = 0.007);

    m.def("fit_lateral",
          [](py::array_t<double> alpha, py::array_t<double> F_z, py::array_t<double> F_y, double E_y,
             std::optional<double> fixed_K_y) {
              fitting::FitConfig cfg;
              cfg.E_y = E_y;
              cfg.fixed_K_y = fixed_K_y;
              const auto r = fitting::fit_lateral(to_dataset(alpha, F_z, F_y), cfg);
              py::dict out;
              out["params"] = r.params;
              out["rms"] = r.rms;
              out["count"] = r.count;
              out["iterations"] = r.iterations;
              out["converged"] = r.status == fitting::FitStatus::Converged;
              out["covariance"] = Eigen::Matrix3d(r.covariance);
              return out;
          },
          py::arg("alpha"), py::arg("F_z"), py::arg("F_y"), py::arg("E_y") = 0.99, py::arg("fixed_K_y") = py::none());

    m.def("simulate", &simulate_file, py::arg("scenario_path"), py::arg("seed") = py::none());

    m.def("run_cli",
          [](std::vector<std::string> args) {
              args.insert(args.begin(), "bobsled");
              std::ostringstream out, err;
              const int code = cli::run(args, out, err);
              return py::make_tuple(code, out.str(), err.str());
          },
          py::arg("args"));
}
