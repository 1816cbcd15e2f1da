#include "qergo/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "qergo/errors.hpp"
#include "qergo/parallel.hpp"

#ifndef QERGO_VERSION
#define QERGO_VERSION "0.0.0"
#endif

namespace qergo {

using nlohmann::json;
namespace fs = std::filesystem;

const char* version() { return QERGO_VERSION; }

namespace {

// Auxiliary substreams of the master seed, one per independent use inside an experiment.
enum AuxStream : std::uint64_t {
  kAuxCgf = 0,
  kAuxAlpha = 1,
  kAuxZSamples = 2,
  kAuxReference = 3,
};

std::uint64_t aux_seed(std::uint64_t master, AuxStream which) {
  return derive_seed(master, which, StreamRole::Auxiliary);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& files() const { return files_; }

  void csv(const std::string& name, const std::string& header, const std::vector<std::vector<double>>& rows) {
    std::ofstream out = open(name);
    out << header << '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
      out << '\n';
    }
    finish(out, name);
  }

  void write_json(const std::string& name, const json& value) {
    std::ofstream out = open(name);
    out << value.dump(2) << '\n';
    finish(out, name);
  }

 private:
  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    return out;
  }

  void finish(std::ofstream& out, const std::string& name) {
    out.close();
    if (!out) throw ConfigError("failed writing '" + (dir_ / name).string() + "'");
    files_.push_back(name);
  }

  fs::path dir_;
  std::vector<std::string> files_;
};

std::vector<std::vector<double>> binned_rows(const BinnedLaw& binned) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < binned.masses.size(); ++i)
    rows.push_back({binned.edges[i], binned.edges[i + 1], binned.masses[i]});
  return rows;
}

json report_json(const VerificationReport& r) {
  return {{"check", r.check},
          {"grid", r.grid},
          {"nodes", r.nodes},
          {"worst_margin", r.worst_margin},
          {"worst_node", r.worst_node},
          {"error_allowance", r.error_allowance},
          {"max_numeric_error", r.max_numeric_error},
          {"pass", r.pass}};
}

json certificate_json(const DriftCertificate& c) {
  json out{{"beta_bar", c.beta_bar},
           {"mS", c.mS},
           {"gamma_bar", c.gamma_bar},
           {"gamma_bar_std_error", c.gamma_bar_std_error},
           {"gamma_method", c.gamma_method == GammaMethod::Exact ? "exact" : "monte_carlo"},
           {"lambda_at_beta_bar", c.lambda_at_beta_bar},
           {"grid_step", c.grid_step},
           {"epsilon", c.epsilon},
           {"R", c.R},
           {"h", c.h},
           {"alpha_mode", to_string(c.alpha_mode)},
           {"theta", c.theta},
           {"theta_selected", c.theta_selected},
           {"kappa_exp", c.kappa_exp},
           {"env_bound", std::isfinite(c.env_bound) ? json(c.env_bound) : json("inf")}};
  if (c.alpha_mode == AlphaMode::ConstantBounded) {
    out["alpha_const"] = c.alpha_const;
  } else {
    out["C4"] = c.C4;
    out["C5"] = c.C5;
    out["H"] = c.H;
  }
  if (c.env_tail) out["env_tail"] = {{"c1", c.env_tail->c1}, {"c2", c.env_tail->c2}, {"c3", c.env_tail->c3}};
  return out;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return out;
}

// True when tv never rises by more than 2 stderr from one grid point to the next.
bool nonincreasing(std::span<const CurvePoint> points) {
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double slack = 2.0 * std::hypot(points[i].std_error, points[i - 1].std_error);
    if (points[i].tv > points[i - 1].tv + slack) return false;
  }
  return true;
}

std::vector<double> stationary_z_samples(const EnvironmentSpec& env, std::size_t count, std::uint64_t seed) {
  Stream stream(seed);
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    EnvSampler sampler(env);
    out.push_back(sampler.start_stationary(stream));
  }
  return out;
}

struct Context {
  const ExperimentConfig& config;
  const ExperimentSettings& e;
  unsigned workers;
  Outputs& out;
  json& summary;
  json& seeds;
};

bool run_simulate(Context& c) {
  const auto& model = c.config.model;
  model.require_subcritical("simulate");
  const auto first = simulate(model, c.e.w0, c.e.horizon, replica_seeds(c.e.seed, 0));
  std::vector<std::vector<double>> rows;
  rows.reserve(first.waits.size());
  for (std::size_t k = 0; k < first.waits.size(); ++k) rows.push_back({static_cast<double>(k), first.waits[k]});
  c.out.csv("trajectory.csv", "step,wait", rows);
  c.seeds["replica_0"] = {{"environment", first.seeds.environment}, {"service", first.seeds.service}};

  const double average = functional_average(first, c.e.threshold, c.e.horizon);
  c.summary["final_wait"] = first.waits.back();
  c.summary["time_average_tail"] = average;
  c.summary["threshold"] = c.e.threshold;
  c.summary["drift"] = model.drift();

  if (c.e.replicas > 1) {
    std::vector<double> finals(c.e.replicas);
    const std::size_t step[] = {c.e.horizon};
    parallel_for(c.e.replicas, c.workers, [&](std::size_t r) {
      finals[r] = waits_at(model, c.e.w0, step, replica_seeds(c.e.seed, r))[0];
    });
    EmpiricalLaw law(finals);
    std::vector<std::vector<double>> sample_rows;
    for (double w : finals) sample_rows.push_back({w});
    c.out.csv("final_waits.csv", "sample", sample_rows);
    c.summary["final_mean"] = law.mean();
    c.summary["final_tail"] = law.tail(c.e.threshold);
  }
  return true;
}

bool run_certify(Context& c) {
  const auto& model = c.config.model;
  const auto& e = c.e;
  CertifyOptions options;
  options.theta = e.theta;
  options.alpha_mode = e.alpha_mode;
  options.H = e.H;
  options.beta.step = e.grid_step;
  options.beta.beta_cap = e.beta_cap;
  options.beta.mc = {e.mc_n, e.mc_replicas, aux_seed(e.seed, kAuxCgf)};
  options.alpha_moment = {e.alpha_samples, aux_seed(e.seed, kAuxAlpha)};
  c.seeds["cgf"] = options.beta.mc.seed;
  c.seeds["alpha_moment"] = options.alpha_moment.seed;
  c.seeds["z_samples"] = aux_seed(e.seed, kAuxZSamples);

  const auto cert = build_certificate(model, options, c.workers);

  const auto& env = model.environment;
  double z_max = 0.0;
  if (e.z_max) {
    z_max = *e.z_max;
  } else if (std::isfinite(env.bound())) {
    z_max = env.bound();
  } else {
    z_max = env.family() == EnvironmentFamily::MarkovModulated ? env.bound()
                                                              : env.marginal().quantile(1.0 - 1e-6);
  }
  const double w_max = e.w_max.value_or(5.0 * cert.h);
  const auto z_grid = linspace(0.0, z_max, e.z_points);
  const auto w_grid = linspace(0.0, w_max, e.w_points);
  const auto drift = verify_drift(cert, model.service, z_grid, w_grid, e.precision, c.workers);
  const auto z_samples = stationary_z_samples(env, e.z_samples, aux_seed(e.seed, kAuxZSamples));
  const auto minor =
      verify_minorization(cert, model.service, z_samples, e.partitions, e.minorization_w_points, c.workers);
  const auto identities = verify_self_consistency(cert);

  bool pass = drift.pass && minor.pass && identities.pass;
  json cert_json = certificate_json(cert);
  c.out.write_json("certificate.json", cert_json);
  c.summary["certificate"] = cert_json;
  c.summary["drift"] = report_json(drift);
  c.summary["minorization"] = report_json(minor);
  c.summary["self_consistency"] = report_json(identities);

  if (cert.alpha_mode == AlphaMode::ExponentialUnbounded) {
    const auto n_list = default_alpha_n_list();
    const auto curve = alpha_moment_curve(cert, env, cert.theta, n_list, options.alpha_moment);
    std::vector<std::vector<double>> rows;
    for (const auto& p : curve) rows.push_back({p.n, p.value, p.std_error, p.ess, p.bound});
    c.out.csv("alpha_moment.csv", "n,value,stderr,ess,bound", rows);
    const bool decreasing = nonincreasing_after(curve, 10.0);
    c.summary["alpha_moment_nonincreasing"] = decreasing;
    pass = pass && decreasing;
  }
  return pass;
}

bool run_tv_decay(Context& c) {
  const auto& e = c.e;
  TvDecayOptions options{e.w0, e.n_star, e.reference, e.loynes_horizon, e.bootstrap};
  const auto curve = tv_decay_curve(c.config.model, e.n_grid, e.replicas, e.seed, options, c.workers);
  std::vector<std::vector<double>> rows;
  for (const auto& p : curve.points) rows.push_back({p.n, p.tv, p.std_error});
  c.out.csv("tv_decay.csv", "n,tv,stderr", rows);
  c.out.csv("reference_law.csv", "bin_lo,bin_hi,mass", binned_rows(curve.reference_law.binned(curve.edges)));

  const bool decreasing = nonincreasing(curve.points);
  c.summary["noise_floor"] = curve.noise_floor;
  c.summary["bins"] = curve.bins;
  c.summary["n_star"] = curve.n_star;
  c.summary["reference"] = to_string(curve.reference);
  c.summary["overflow"] = curve.overflow;
  c.summary["nonincreasing"] = decreasing;
  bool fit_ok = false;
  try {
    const auto fit = fit_rate(curve, e.fit_exponent);
    fit_ok = fit.r_squared >= e.min_r_squared;
    c.summary["fit"] = {{"c1", fit.c1},         {"c2", fit.c2},         {"p", fit.p},
                        {"r_squared", fit.r_squared}, {"used_n", fit.used_n}, {"residuals", fit.residuals},
                        {"pass", fit_ok}};
  } catch (const FitError& err) {
    c.summary["fit"] = {{"error", err.what()}, {"pass", false}};
  }
  return decreasing && fit_ok;
}

bool run_lln(Context& c) {
  const auto& e = c.e;
  const auto& model = c.config.model;
  model.require_subcritical("lln");
  const auto ref_seed = aux_seed(e.seed, kAuxReference);
  c.seeds["reference"] = ref_seed;
  std::optional<EmpiricalLaw> reference;
  if (e.reference == ReferenceKind::Loynes) {
    reference = loynes_backward(model, e.loynes_horizon, e.reference_replicas, ref_seed, c.workers).law;
  } else {
    const std::size_t n_star = e.n_star > 0 ? e.n_star : 10000;
    std::vector<double> w(e.reference_replicas);
    const std::size_t step[] = {n_star};
    parallel_for(w.size(), c.workers,
                 [&](std::size_t r) { w[r] = waits_at(model, 0.0, step, replica_seeds(ref_seed, r))[0]; });
    reference = EmpiricalLaw(std::move(w));
  }
  const auto points = lln_curve(model, e.threshold, e.n_grid, e.replicas, e.seed, {e.w0, reference}, c.workers);
  std::vector<std::vector<double>> rows;
  for (const auto& p : points) rows.push_back({p.n, p.mean, p.stdev, p.reference});
  c.out.csv("lln.csv", "n,mean,stdev,ref", rows);

  const auto& last = points.back();
  const bool converged = std::abs(last.mean - last.reference) <= e.tolerance;
  // stdev should shrink like 1/sqrt(n); accept a factor 2 either way between consecutive points
  bool shrinkage = true;
  json ratios = json::array();
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double observed = points[i - 1].stdev / points[i].stdev;
    const double expected = std::sqrt(points[i].n / points[i - 1].n);
    ratios.push_back({{"n", points[i].n}, {"observed", observed}, {"expected", expected}});
    if (!(observed >= expected / 2.0 && observed <= expected * 2.0)) shrinkage = false;
  }
  c.summary["reference"] = last.reference;
  c.summary["reference_kind"] = to_string(e.reference);
  c.summary["final_mean"] = last.mean;
  c.summary["converged"] = converged;
  c.summary["stdev_ratios"] = ratios;
  c.summary["sqrt_n_shrinkage"] = shrinkage;
  return converged && shrinkage;
}

bool run_loynes_compare(Context& c) {
  const auto& e = c.e;
  const auto& model = c.config.model;
  model.require_subcritical("loynes-compare");
  const auto ref_seed = aux_seed(e.seed, kAuxReference);
  c.seeds["loynes"] = ref_seed;
  std::vector<double> w(e.replicas);
  const std::size_t step[] = {e.horizon};
  parallel_for(w.size(), c.workers,
               [&](std::size_t r) { w[r] = waits_at(model, 0.0, step, replica_seeds(e.seed, r))[0]; });
  EmpiricalLaw forward(std::move(w));
  const auto loynes = loynes_backward(model, e.loynes_horizon, e.replicas, ref_seed, c.workers);

  const std::size_t bins = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(e.replicas))));
  const auto edges = equal_mass_edges(loynes.law, bins);
  c.out.csv("forward_law.csv", "bin_lo,bin_hi,mass", binned_rows(forward.binned(edges)));
  c.out.csv("loynes_law.csv", "bin_lo,bin_hi,mass", binned_rows(loynes.law.binned(edges)));

  const double tail_f = forward.tail(e.threshold);
  const double tail_l = loynes.law.tail(e.threshold);
  const double ks = ks_distance(forward, loynes.law);
  const bool tails_agree = std::abs(tail_f - tail_l) <= e.tolerance;
  const bool ks_ok = ks <= e.tolerance;
  c.summary["forward"] = {{"tail", tail_f}, {"mean", forward.mean()}};
  c.summary["loynes"] = {{"tail", tail_l},
                         {"mean", loynes.law.mean()},
                         {"late_increase_fraction", loynes.late_increase_fraction},
                         {"stabilized", loynes.stabilized}};
  c.summary["threshold"] = e.threshold;
  c.summary["ks"] = ks;
  c.summary["tv_binned"] = tv_binned(forward, loynes.law, edges).distance;
  c.summary["tails_agree"] = tails_agree;
  c.summary["ks_within_tolerance"] = ks_ok;
  return tails_agree && ks_ok && loynes.stabilized;
}

bool run_borovkov(Context& c) {
  const auto& e = c.e;
  BorovkovCompareOptions options;
  options.tv = {0.0, e.n_star, e.reference, e.loynes_horizon, e.bootstrap};
  options.rhs = {e.loynes_horizon, e.event};
  const auto table = borovkov_compare(c.config.model, e.n_grid, e.replicas, e.seed, options, c.workers);
  std::vector<std::vector<double>> rows;
  json detail = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({r.n, r.tv, r.rhs, r.margin});
    detail.push_back({{"n", r.n},
                      {"tv", r.tv},
                      {"tv_stderr", r.tv_std_error},
                      {"rhs", r.rhs},
                      {"rhs_stderr", r.rhs_std_error},
                      {"margin", r.margin},
                      {"allowance", r.allowance},
                      {"pass", r.pass}});
  }
  c.out.csv("borovkov.csv", "n,tv,rhs,margin", rows);
  c.summary["rows"] = detail;
  c.summary["noise_floor"] = table.noise_floor;
  c.summary["event"] = e.event == BorovkovEvent::Coupling ? "coupling" : "as_printed";
  return table.pass;
}

bool run_ge_limit(Context& c) {
  const auto& e = c.e;
  const auto& env = c.config.model.environment;
  const auto sums = replica_sums(env, e.n, e.replicas, e.seed, c.workers);
  const bool has_exact = env.family() != EnvironmentFamily::CopulaAR1;
  auto exact = [&](double a) { return has_exact ? exact_cgf_limit(env, a) : std::nan(""); };

  auto alphas = e.alphas;
  std::sort(alphas.begin(), alphas.end());
  std::vector<std::vector<double>> rows;
  bool within = true;
  json checks = json::array();
  for (double a : alphas) {
    const auto mc = log_mean_exp_cgf(sums, a, e.n);
    const double ex = exact(a);
    rows.push_back({a, ex, mc.estimate, mc.std_error});
    if (has_exact) {
      const bool ok = std::abs(mc.estimate - ex) <= 3.0 * mc.std_error;
      within = within && ok;
      checks.push_back({{"alpha", a}, {"z", (mc.estimate - ex) / mc.std_error}, {"pass", ok}});
    }
  }
  c.out.csv("ge_limit.csv", "alpha,exact,mc,stderr", rows);

  const double at_zero = has_exact ? exact_cgf_limit(env, 0.0) : log_mean_exp_cgf(sums, 0.0, e.n).estimate;
  const bool zero_ok = at_zero == 0.0;
  // midpoint convexity of the exact limit on a grid spanning the requested alphas
  bool convex = true;
  if (has_exact && !alphas.empty()) {
    const double lo = std::min(alphas.front(), -0.5);
    const double hi = std::max(alphas.back(), 0.5);
    const auto grid = linspace(lo, hi, 41);
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      const double mid = exact(grid[i]);
      const double chord = 0.5 * (exact(grid[i - 1]) + exact(grid[i + 1]));
      if (mid > chord + 1e-12 * (1.0 + std::abs(chord))) convex = false;
    }
  }
  c.summary["n"] = e.n;
  c.summary["exact_available"] = has_exact;
  c.summary["checks"] = checks;
  c.summary["gamma_at_zero"] = at_zero;
  c.summary["gamma_at_zero_exact"] = zero_ok;
  c.summary["convex"] = convex;
  return within && zero_ok && convex;
}

std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run_experiment(ExperimentConfig config, const RunOverrides& overrides) {
  RunResult result;
  if (overrides.seed) {
    config.experiment.seed = *overrides.seed;
    config.resolved["experiment"]["seed"] = *overrides.seed;
  }
  if (overrides.out) {
    config.experiment.output = overrides.out->string();
    config.resolved["experiment"]["output"] = config.experiment.output;
  }
  const auto& e = config.experiment;
  result.out = e.output;
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    std::error_code ec;
    fs::create_directories(result.out, ec);
    if (ec) throw ConfigError("cannot create output directory '" + result.out.string() + "': " + ec.message());
    Outputs out(result.out);
    json summary{{"kind", to_string(e.kind)}};
    json seeds{{"master", e.seed}};
    Context ctx{config, e, overrides.workers, out, summary, seeds};
    bool pass = false;
    switch (e.kind) {
      case ExperimentKind::Simulate:
        pass = run_simulate(ctx);
        break;
      case ExperimentKind::Certify:
        pass = run_certify(ctx);
        break;
      case ExperimentKind::TvDecay:
        pass = run_tv_decay(ctx);
        break;
      case ExperimentKind::Lln:
        pass = run_lln(ctx);
        break;
      case ExperimentKind::LoynesCompare:
        pass = run_loynes_compare(ctx);
        break;
      case ExperimentKind::Borovkov:
        pass = run_borovkov(ctx);
        break;
      case ExperimentKind::GeLimit:
        pass = run_ge_limit(ctx);
        break;
    }
    summary["pass"] = pass;
    out.write_json("summary.json", summary);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::vector<std::string> files = out.files();
    files.push_back("manifest.json");
    json manifest{{"tool", "qergo"},
                  {"version", version()},
                  {"config", config.resolved},
                  {"seeds", seeds},
                  {"started_utc", utc_timestamp(started)},
                  {"wall_clock_seconds", wall},
                  {"workers", overrides.workers == 0 ? default_workers() : overrides.workers},
                  {"files", files},
                  {"pass", pass}};
    out.write_json("manifest.json", manifest);
    result.files = std::move(files);
    result.summary = std::move(summary);
    result.pass = pass;
    result.exit_code = pass ? kExitOk : kExitCheckFailed;
  } catch (const StabilityError& err) {
    result.exit_code = kExitStability;
    result.message = err.what();
  } catch (const CertificationError& err) {
    result.exit_code = kExitStability;
    result.message = err.what();
  } catch (const ConfigError& err) {
    result.exit_code = kExitConfig;
    result.message = err.what();
  } catch (const DomainError& err) {
    result.exit_code = kExitConfig;
    result.message = err.what();
  } catch (const Error& err) {
    result.exit_code = kExitCheckFailed;
    result.message = err.what();
  }
  return result;
}

RunResult run_config_file(const std::string& path, const RunOverrides& overrides) {
  try {
    if (fs::path(path).extension() == ".json") {
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot read manifest '" + path + "'");
      json manifest;
      try {
        manifest = json::parse(in);
      } catch (const json::exception& err) {
        throw ConfigError(path + ": " + err.what());
      }
      if (!manifest.contains("config")) throw ConfigError(path + ": manifest has no \"config\" entry");
      return run_experiment(load_config_json(manifest["config"]), overrides);
    }
    return run_experiment(load_config_file(path), overrides);
  } catch (const ConfigError& err) {
    RunResult result;
    result.exit_code = kExitConfig;
    result.message = err.what();
    return result;
  }
}

}  // namespace qergo
