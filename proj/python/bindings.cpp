#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "qergo/certify.hpp"
#include "qergo/config.hpp"
#include "qergo/errors.hpp"
#include "qergo/estimate.hpp"
#include "qergo/experiments.hpp"

namespace py = pybind11;
using namespace qergo;

namespace {

py::array_t<double> to_array(std::span<const double> values) {
  return py::array_t<double>(static_cast<py::ssize_t>(values.size()), values.data());
}

py::dict certificate_dict(const DriftCertificate& c) {
  py::dict d;
  d["beta_bar"] = c.beta_bar;
  d["mS"] = c.mS;
  d["gamma_bar"] = c.gamma_bar;
  d["gamma_bar_std_error"] = c.gamma_bar_std_error;
  d["epsilon"] = c.epsilon;
  d["R"] = c.R;
  d["h"] = c.h;
  d["alpha_mode"] = to_string(c.alpha_mode);
  d["alpha_const"] = c.alpha_const;
  d["C4"] = c.C4;
  d["C5"] = c.C5;
  d["theta"] = c.theta;
  d["theta_selected"] = c.theta_selected;
  d["kappa_exp"] = c.kappa_exp;
  d["lambda_at_beta_bar"] = c.lambda_at_beta_bar;
  d["H"] = c.H;
  d["env_bound"] = c.env_bound;
  return d;
}

}  // namespace

PYBIND11_MODULE(_qergo, m) {
  m.doc() = "Lindley recursion in a stationary random environment";
  m.attr("__version__") = version();

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<StabilityError>(m, "StabilityError", base.ptr());
  py::register_exception<CertificationError>(m, "CertificationError", base.ptr());

  py::enum_<TheoremMode>(m, "TheoremMode")
      .value("NONE", TheoremMode::None)
      .value("BOUNDED_ENV", TheoremMode::BoundedEnv)
      .value("LIGHT_TAIL_ENV", TheoremMode::LightTailEnv);
  py::enum_<Stability>(m, "Stability")
      .value("SUBCRITICAL", Stability::Subcritical)
      .value("CRITICAL", Stability::Critical)
      .value("SUPERCRITICAL", Stability::Supercritical);
  py::enum_<ReferenceKind>(m, "ReferenceKind")
      .value("FORWARD", ReferenceKind::Forward)
      .value("LOYNES", ReferenceKind::Loynes);

  py::class_<Marginal>(m, "Marginal")
      .def_static("degenerate", &Marginal::degenerate, py::arg("value"))
      .def_static("exponential", &Marginal::exponential, py::arg("rate"))
      .def_static("uniform", &Marginal::uniform, py::arg("lo"), py::arg("hi"))
      .def_static("truncated_exponential", &Marginal::truncated_exponential, py::arg("rate"), py::arg("bound"))
      .def_static("doubly_exponential", &Marginal::doubly_exponential, py::arg("c2"), py::arg("c3"))
      .def_property_readonly("name", &Marginal::name)
      .def("mean", &Marginal::mean)
      .def("cdf", &Marginal::cdf)
      .def("quantile", &Marginal::quantile)
      .def("log_mgf", &Marginal::log_mgf)
      .def("__repr__", [](const Marginal& x) { return "Marginal(" + x.name() + ")"; });

  py::class_<EnvironmentSpec>(m, "Environment")
      .def_static("iid", &EnvironmentSpec::iid, py::arg("marginal"))
      .def_static("markov_modulated", &EnvironmentSpec::markov_modulated, py::arg("states"), py::arg("transition"))
      .def_static("copula_ar1", &EnvironmentSpec::copula_ar1, py::arg("ar_coefficient"), py::arg("marginal"))
      .def_property_readonly("stationary", &EnvironmentSpec::stationary)
      .def_property_readonly("bound", &EnvironmentSpec::bound)
      .def("mean", &EnvironmentSpec::mean)
      .def("cgf_limit", [](const EnvironmentSpec& e, double alpha) { return exact_cgf_limit(e, alpha); },
           py::arg("alpha"))
      .def("reversed", [](const EnvironmentSpec& e) { return reversed_spec(e); })
      .def("sample_path",
           [](const EnvironmentSpec& e, std::size_t n, std::uint64_t seed) {
             return to_array(sample_path(e, n, seed).values);
           },
           py::arg("n"), py::arg("seed"));

  py::class_<ServiceSpec>(m, "Service")
      .def_static("degenerate", &ServiceSpec::degenerate, py::arg("value"), py::arg("mode") = TheoremMode::None)
      .def_static("exponential", &ServiceSpec::exponential, py::arg("rate"), py::arg("mode") = TheoremMode::None)
      .def_static("gamma", &ServiceSpec::gamma, py::arg("shape"), py::arg("rate"),
                  py::arg("mode") = TheoremMode::None)
      .def_static("uniform_shifted", &ServiceSpec::uniform_shifted, py::arg("lo"), py::arg("hi"),
                  py::arg("mode") = TheoremMode::None)
      .def_static("exponential_mixture", &ServiceSpec::exponential_mixture, py::arg("weights"), py::arg("rates"),
                  py::arg("mode") = TheoremMode::None)
      .def_property_readonly("name", &ServiceSpec::name)
      .def("mean", &ServiceSpec::mean)
      .def("mgf", &ServiceSpec::mgf)
      .def("cdf", &ServiceSpec::cdf)
      .def("__repr__", [](const ServiceSpec& s) { return "Service(" + s.name() + ")"; });

  py::class_<QueueModel>(m, "Model")
      .def(py::init([](EnvironmentSpec env, ServiceSpec service) { return QueueModel{std::move(env), std::move(service)}; }),
           py::arg("environment"), py::arg("service"))
      .def_readonly("environment", &QueueModel::environment)
      .def_readonly("service", &QueueModel::service)
      .def("drift", &QueueModel::drift)
      .def("stability", &QueueModel::stability);

  m.def(
      "simulate",
      [](const QueueModel& model, double w0, std::size_t n, std::uint64_t seed, std::uint64_t replica) {
        return to_array(simulate(model, w0, n, replica_seeds(seed, replica)).waits);
      },
      py::arg("model"), py::arg("w0"), py::arg("n"), py::arg("seed"), py::arg("replica") = 0,
      "W_0..W_n along one replica.");

  m.def(
      "loynes",
      [](const QueueModel& model, std::size_t horizon, std::size_t replicas, std::uint64_t seed, unsigned workers) {
        const auto r = loynes_backward(model, horizon, replicas, seed, workers);
        return py::make_tuple(to_array(r.law.samples()), r.stabilized);
      },
      py::arg("model"), py::arg("horizon"), py::arg("replicas"), py::arg("seed"), py::arg("workers") = 0,
      "Backward-supremum draws of the stationary wait and whether the running max stabilized.");

  m.def("lambda_fn", &lambda_fn, py::arg("model"), py::arg("beta"));
  m.def(
      "certificate",
      [](const QueueModel& model, std::optional<double> theta, unsigned workers) {
        CertifyOptions options;
        options.theta = theta;
        return certificate_dict(build_certificate(model, options, workers));
      },
      py::arg("model"), py::arg("theta") = py::none(), py::arg("workers") = 0);

  m.def(
      "tv_decay",
      [](const QueueModel& model, std::vector<std::size_t> n_grid, std::size_t replicas, std::uint64_t seed,
         double w0, ReferenceKind reference, unsigned workers) {
        TvDecayOptions options;
        options.w0 = w0;
        options.reference = reference;
        const auto curve = tv_decay_curve(model, n_grid, replicas, seed, options, workers);
        py::list points;
        for (const auto& p : curve.points) points.append(py::make_tuple(p.n, p.tv, p.std_error));
        py::dict d;
        d["points"] = points;
        d["noise_floor"] = curve.noise_floor;
        d["bins"] = curve.bins;
        return d;
      },
      py::arg("model"), py::arg("n_grid"), py::arg("replicas"), py::arg("seed"), py::arg("w0") = 0.0,
      py::arg("reference") = ReferenceKind::Forward, py::arg("workers") = 0,
      "Rows (n, tv, stderr) plus the noise floor.");

  m.def(
      "fit_rate",
      [](const std::vector<std::tuple<double, double>>& points, double noise_floor, std::optional<double> p) {
        std::vector<CurvePoint> curve;
        for (const auto& [n, tv] : points) curve.push_back({n, tv, 0.0});
        const auto fit = fit_rate(curve, noise_floor, p);
        py::dict d;
        d["c1"] = fit.c1;
        d["c2"] = fit.c2;
        d["p"] = fit.p;
        d["r_squared"] = fit.r_squared;
        d["used_n"] = fit.used_n;
        return d;
      },
      py::arg("points"), py::arg("noise_floor") = 0.0, py::arg("p") = py::none(),
      "Fits tv = c1 exp(-c2 n^p) to (n, tv) pairs; p=None searches 0.1..1.0.");

  m.def(
      "validate_config",
      [](const std::string& text) { return validate_config_text(text).violations; }, py::arg("text"),
      "Violations of a TOML config, empty when valid.");

  m.def(
      "run",
      [](const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> out,
         unsigned workers) {
        RunOverrides overrides;
        overrides.seed = seed;
        if (out) overrides.out = *out;
        overrides.workers = workers;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_config_file(path, overrides);
        }
        py::dict d;
        d["exit_code"] = r.exit_code;
        d["pass"] = r.pass;
        d["out"] = r.out.string();
        d["files"] = r.files;
        d["summary"] = r.summary.dump();
        d["message"] = r.message;
        return d;
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("out") = py::none(), py::arg("workers") = 0,
      "Runs a config or manifest file; 'summary' is a JSON string.");
}
