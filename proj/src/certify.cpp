#include "qergo/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qergo/errors.hpp"
#include "qergo/parallel.hpp"
#include "qergo/quadrature.hpp"

namespace qergo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLambdaNegativity = 1e-6;

bool has_exact_cgf(const EnvironmentSpec& env) { return env.family() != EnvironmentFamily::CopulaAR1; }

// 1 - alpha(z), computed directly to avoid cancellation.
double minorization_mass(const DriftCertificate& cert, double z) {
  if (cert.alpha_mode == AlphaMode::ConstantBounded) return 1.0 - cert.alpha_const;
  return std::min(1.0, cert.C4 * std::exp(-cert.C5 * (z + cert.h + 1.0)));
}

std::string describe_grid(const char* name, std::span<const double> grid) {
  std::ostringstream out;
  out << name << ": " << grid.size() << " nodes";
  if (!grid.empty()) out << " in [" << *std::min_element(grid.begin(), grid.end()) << ", "
                         << *std::max_element(grid.begin(), grid.end()) << "]";
  return out.str();
}

double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (m == -kInfinity) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

const char* to_string(AlphaMode mode) {
  return mode == AlphaMode::ConstantBounded ? "constant_bounded" : "exponential_unbounded";
}

double lambda_fn(const QueueModel& model, double beta) {
  if (beta == 0.0) return 0.0;
  return exact_cgf_limit(model.environment, -beta) + model.service.log_mgf(beta);
}

LambdaValue lambda_fn_mc(const QueueModel& model, double beta, const MonteCarloCgf& mc, unsigned workers) {
  if (beta == 0.0) return {0.0, 0.0, false};
  const auto est = mc_cgf_estimate(model.environment, -beta, mc.n, mc.replicas, mc.seed, workers);
  return {est.estimate + model.service.log_mgf(beta), est.std_error, false};
}

double lambda_slope_at_zero(const QueueModel& model) { return model.drift(); }

BetaSearch find_beta_bar(const QueueModel& model, const BetaSearchOptions& options, unsigned workers) {
  if (!(options.step > 0.0) || !(options.beta_cap > 0.0)) throw ConfigError("find_beta_bar: step and beta_cap must be > 0");
  const double slope = lambda_slope_at_zero(model);
  if (slope >= 0.0) {
    std::ostringstream msg;
    msg << "cannot certify: " << (slope == 0.0 ? "critical" : "supercritical") << " model (E[S] - E[Z] = " << slope
        << ")";
    throw CertificationError(slope == 0.0 ? CertificationError::Reason::Critical
                                          : CertificationError::Reason::Supercritical,
                             msg.str());
  }
  BetaSearch out;
  out.step = options.step;
  out.upper = 0.9 * std::min(model.service.beta0(), options.beta_cap);
  out.exact = has_exact_cgf(model.environment);
  const auto points = static_cast<std::size_t>(std::floor(out.upper / options.step + 1e-9));

  std::vector<double> sums;
  if (!out.exact) sums = replica_sums(model.environment, options.mc.n, options.mc.replicas, options.mc.seed, workers);
  auto lambda = [&](double beta) {
    if (out.exact) return lambda_fn(model, beta);
    return log_mean_exp_cgf(sums, -beta, options.mc.n).estimate + model.service.log_mgf(beta);
  };

  double best = kInfinity;
  double best_beta = 0.0;
  for (std::size_t k = 1; k <= points; ++k) {
    const double beta = static_cast<double>(k) * options.step;
    const double value = lambda(beta);
    if (value < best) {
      best = value;
      best_beta = beta;
    }
  }
  if (!(best < -kLambdaNegativity)) {
    std::ostringstream msg;
    msg << "cannot certify: no grid point with lambda < -1e-6 (step " << options.step << ", slope " << slope
        << "); refine the grid";
    throw CertificationError(CertificationError::Reason::GridResolution, msg.str());
  }
  out.beta_bar = best_beta;
  out.lambda = best;
  return out;
}

SmallSet small_set_parameters(double gamma_bar, double beta_bar) {
  if (!(gamma_bar > 0.0 && gamma_bar < 1.0)) throw DomainError("small_set_parameters: gamma_bar must lie in (0, 1)");
  if (!(beta_bar > 0.0)) throw DomainError("small_set_parameters: beta_bar must be > 0");
  SmallSet s;
  s.epsilon = (1.0 / std::sqrt(gamma_bar) - 1.0) / 2.0;
  s.R = 2.0 / s.epsilon;
  s.h = std::log1p(2.0 / s.epsilon) / beta_bar;
  return s;
}

double DriftCertificate::alpha(double z) const {
  if (alpha_mode == AlphaMode::ConstantBounded) return alpha_const;
  return 1.0 - std::min(1.0, C4 * std::exp(-C5 * (z + h + 1.0)));
}

double gamma_K(double z, const DriftCertificate& cert) { return std::exp(-cert.beta_bar * z) * cert.mS; }

GammaBar contractivity_gamma_bar(const EnvironmentSpec& env, double beta_bar, double mS, GammaMethod method,
                                 const MonteCarloCgf& mc, unsigned workers) {
  if (method == GammaMethod::Exact) {
    switch (env.family()) {
      case EnvironmentFamily::IID:
        return {mS * std::exp(env.marginal().log_mgf(-beta_bar)), 0.0, GammaMethod::Exact};
      case EnvironmentFamily::MarkovModulated:
        return {mS * perron_root(tilted_matrix(env, -beta_bar)), 0.0, GammaMethod::Exact};
      case EnvironmentFamily::CopulaAR1:
        throw UnsupportedError("contractivity_gamma_bar: no exact method for copula_ar1; use the Monte Carlo method");
    }
  }
  const auto est = mc_cgf_estimate(env, -beta_bar, mc.n, mc.replicas, mc.seed, workers);
  const double value = mS * std::exp(est.estimate);
  return {value, value * est.std_error, GammaMethod::MonteCarlo};
}

std::vector<AlphaMomentPoint> alpha_moment_curve(const DriftCertificate& cert, const EnvironmentSpec& env,
                                                 double theta, std::span<const double> n_list,
                                                 const AlphaMomentOptions& options) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("alpha_moment_curve: theta must lie in (0, 1)");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (!(n_list[i] > n_list[i - 1])) throw DomainError("alpha_moment_curve: n_list must be increasing");
  std::vector<AlphaMomentPoint> out;
  out.reserve(n_list.size());

  if (cert.alpha_mode == AlphaMode::ConstantBounded) {
    const double log_alpha = std::log(cert.alpha_const);
    for (double n : n_list)
      out.push_back({n, std::exp(std::pow(n, 1.0 - theta) * log_alpha), 0.0, kNaN, false, kNaN, kNaN});
    return out;
  }

  if (options.samples < 2) throw ConfigError("alpha_moment_curve: need at least 2 samples");
  Stream stream(options.seed);
  EnvSampler sampler(env);
  std::vector<double> log_alpha(options.samples);
  for (auto& la : log_alpha) la = std::log1p(-minorization_mass(cert, sampler.start_stationary(stream)));

  const double c6 = cert.C4 * std::exp(-cert.C5 * (cert.h + 1.0));
  std::vector<double> weights(options.samples);
  for (double n : n_list) {
    AlphaMomentPoint p;
    p.n = n;
    const double scale = std::pow(n, theta);
    double top = -kInfinity;
    for (double la : log_alpha) top = std::max(top, n * la);
    CompensatedSum sw;
    CompensatedSum sw2;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      weights[i] = std::exp(n * log_alpha[i] - top);
      sw.add(weights[i]);
      sw2.add(weights[i] * weights[i]);
    }
    const auto moments = sample_moments(weights);
    const double nd = static_cast<double>(weights.size());
    const double log_mean = top + std::log(moments.mean);
    p.value = std::exp(log_mean / scale);
    p.ess = sw.value() * sw.value() / sw2.value();
    double se_log = moments.stdev / (std::sqrt(nd) * moments.mean);
    if (p.ess < 100.0) {
      p.low_ess = true;
      se_log *= std::sqrt(nd / p.ess);
    }
    p.std_error = p.value * se_log / scale;
    if (cert.env_tail && n > 1.0) {
      const auto& t = *cert.env_tail;
      const double first = std::log(cert.H * std::log(n)) - c6 * std::pow(n, 1.0 - cert.C5 * cert.H);
      const double second = std::log(t.c1) - t.c2 * std::pow(n, t.c3 * cert.H);
      const double log_bound = log_sum_exp(first, second);
      p.moment_bound = std::exp(log_bound);
      p.bound = std::exp(log_bound / scale);
    } else {
      p.moment_bound = kNaN;
      p.bound = kNaN;
    }
    out.push_back(p);
  }
  return out;
}

bool nonincreasing_after(std::span<const AlphaMomentPoint> curve, double n_after) {
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i - 1].n < n_after || curve[i].n <= n_after) continue;
    const double allowance = 2.0 * std::hypot(curve[i - 1].std_error, curve[i].std_error) + 1e-12 * curve[i - 1].value;
    if (curve[i].value > curve[i - 1].value + allowance) return false;
  }
  return true;
}

std::optional<double> select_theta(const DriftCertificate& cert, const EnvironmentSpec& env,
                                   std::span<const double> n_list, const AlphaMomentOptions& options) {
  double limit = 1.0;
  if (cert.alpha_mode == AlphaMode::ExponentialUnbounded) {
    limit = 1.0 - cert.C5 * cert.H;
    if (cert.env_tail) limit = std::min(limit, cert.env_tail->c3 * cert.H);
  }
  for (int k = 9; k >= 1; --k) {
    const double theta = k / 10.0;
    if (!(theta < limit)) continue;
    const auto curve = alpha_moment_curve(cert, env, theta, n_list, options);
    if (nonincreasing_after(curve, 10.0) && curve.back().value < curve.front().value) return theta;
  }
  return std::nullopt;
}

std::vector<double> default_alpha_n_list() {
  std::vector<double> out;
  for (int k = 1; k <= 320; ++k) {
    const double n = std::round(std::pow(10.0, k / 4.0));
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  return out;
}

DriftCertificate build_certificate(const QueueModel& model, const CertifyOptions& options, unsigned workers) {
  model.require_subcritical("build_certificate");
  if (options.theta && !(*options.theta > 0.0 && *options.theta < 1.0))
    throw ConfigError("build_certificate: theta must lie in (0, 1)");
  const auto& env = model.environment;
  const auto& svc = model.service;

  DriftCertificate cert;
  const auto beta = find_beta_bar(model, options.beta, workers);
  cert.beta_bar = beta.beta_bar;
  cert.lambda_at_beta_bar = beta.lambda;
  cert.grid_step = beta.step;
  cert.mS = svc.mgf(cert.beta_bar);
  const auto gb = contractivity_gamma_bar(env, cert.beta_bar, cert.mS,
                                          has_exact_cgf(env) ? GammaMethod::Exact : GammaMethod::MonteCarlo,
                                          options.beta.mc, workers);
  cert.gamma_bar = gb.value;
  cert.gamma_bar_std_error = gb.std_error;
  cert.gamma_method = gb.method;
  if (!(cert.gamma_bar > 0.0 && cert.gamma_bar < 1.0)) {
    std::ostringstream msg;
    msg << "cannot certify: gamma_bar = " << cert.gamma_bar << " is not in (0, 1)";
    throw NumericError(msg.str());
  }
  const auto small = small_set_parameters(cert.gamma_bar, cert.beta_bar);
  cert.epsilon = small.epsilon;
  cert.R = small.R;
  cert.h = small.h;
  cert.env_bound = env.bound();
  cert.env_tail = env.doubly_exponential_tail();

  if (options.alpha_mode) {
    cert.alpha_mode = *options.alpha_mode;
  } else if (svc.mode() == TheoremMode::BoundedEnv) {
    cert.alpha_mode = AlphaMode::ConstantBounded;
  } else if (svc.mode() == TheoremMode::LightTailEnv) {
    cert.alpha_mode = AlphaMode::ExponentialUnbounded;
  } else {
    cert.alpha_mode = std::isfinite(cert.env_bound) ? AlphaMode::ConstantBounded : AlphaMode::ExponentialUnbounded;
  }

  if (cert.alpha_mode == AlphaMode::ConstantBounded) {
    if (!std::isfinite(cert.env_bound))
      throw ConfigError("build_certificate: constant_bounded alpha requires a bounded environment");
    const double right = cert.env_bound + cert.h + 1.0;
    const double floor = svc.has_density() ? svc.density_infimum(0.0, right) : 0.0;
    if (!(floor > 0.0)) {
      std::ostringstream msg;
      msg << "minorization unobtainable: service density infimum on [0, " << right << "] is 0";
      throw CertificationError(CertificationError::Reason::MinorizationUnobtainable, msg.str());
    }
    cert.alpha_const = 1.0 - floor;
    cert.theta = options.theta.value_or(0.5);
    cert.H = kNaN;
  } else {
    const auto& floor = svc.density_floor();
    if (!floor) {
      throw CertificationError(CertificationError::Reason::MissingDensityFloor,
                               "minorization unobtainable: " + svc.name() +
                                   " service has no nonincreasing density with an exponential floor");
    }
    cert.C4 = floor->c4;
    cert.C5 = floor->c5;
    cert.alpha_const = kNaN;
    cert.H = options.H.value_or(1.0 / (2.0 * cert.C5));
    if (!(cert.H > 0.0 && cert.C5 * cert.H < 1.0)) throw ConfigError("build_certificate: H must satisfy 0 < C5 H < 1");
    if (options.theta) {
      cert.theta = *options.theta;
    } else {
      const auto n_list = default_alpha_n_list();
      const auto selected = select_theta(cert, env, n_list, options.alpha_moment);
      if (!selected)
        throw CertificationError(CertificationError::Reason::ThetaUnavailable,
                                 "no theta in {0.1, ..., 0.9} gives a nonincreasing alpha-moment curve");
      cert.theta = *selected;
      cert.theta_selected = true;
    }
  }
  cert.kappa_exp = 1.0 / (3.0 * (1.0 - cert.theta));
  return cert;
}

namespace {

// e^{-beta_bar w} [Q(z)V](w), whose size is at most mS at every node, with absolute error <= precision.
Quadrature scaled_drift_lhs(const DriftCertificate& cert, const ServiceSpec& service, double z, double w,
                            double precision) {
  if (!(precision > 0.0)) throw DomainError("drift_lhs: precision must be > 0");
  const double beta = cert.beta_bar;
  const double c = z - w;
  const double damp = std::exp(-beta * w);
  // E[e^{beta (S - c)_+}] = P(S <= c) + E[e^{beta (S - c)}; S > c].
  if (!service.has_density()) return {damp * std::expm1(beta * std::max(service.mean() - c, 0.0)), 0.0};
  const double lo = std::max(c, 0.0);
  double hi = service.support_upper();
  double tail = 0.0;
  if (!std::isfinite(hi)) {
    // Chernoff: E[e^{beta (S - z)}; S > t] <= e^{-beta z} E[e^{b S}] e^{-(b - beta) t} for beta < b < beta0.
    const double b = 0.5 * (beta + service.beta0());
    const double target = precision / 10.0;
    hi = std::max(lo, (service.log_mgf(b) - beta * z - std::log(target)) / (b - beta));
    tail = std::exp(service.log_mgf(b) - beta * z - (b - beta) * hi);
  }
  double value = damp * (service.cdf(c) - 1.0);
  double error = tail;
  if (const auto* u = std::get_if<service::UniformShifted>(&service.law())) {
    // Integrate only where the density is positive; it jumps at both support edges.
    const double a = std::max(lo, u->lo);
    const double b = std::min(hi, u->hi);
    if (b > a) {
      const double f = 1.0 / (u->hi - u->lo);
      value += f * (std::exp(beta * (b - z)) - std::exp(beta * (a - z))) / beta;
    }
  } else if (hi > lo) {
    auto integrand = [&](double s) { return std::exp(beta * (s - z)) * service.density(s); };
    const auto rule = (lo == 0.0 && service.density_singular_at_zero()) ? QuadratureRule::TanhSinh
                                                                        : QuadratureRule::GaussKronrod;
    const auto q = integrate(integrand, lo, hi, precision / 10.0, 0.0, rule);
    value += q.value;
    error += q.error;
  }
  return {value, error};
}

}  // namespace

Quadrature drift_lhs(const DriftCertificate& cert, const ServiceSpec& service, double z, double w, double precision) {
  const double grow = std::exp(cert.beta_bar * w);
  const auto q = scaled_drift_lhs(cert, service, z, w, precision / grow);
  return {grow * q.value, grow * q.error};
}

VerificationReport verify_drift(const DriftCertificate& cert, const ServiceSpec& service,
                                std::span<const double> z_grid, std::span<const double> w_grid, double precision,
                                unsigned workers) {
  if (z_grid.empty() || w_grid.empty()) throw ConfigError("verify_drift: grids must be nonempty");
  if (!(precision > 0.0)) throw ConfigError("verify_drift: precision must be > 0");
  struct Local {
    double margin = kInfinity;
    double w = 0.0;
    double error = 0.0;
  };
  std::vector<Local> per_z(z_grid.size());
  parallel_for(z_grid.size(), workers, [&](std::size_t i) {
    const double z = z_grid[i];
    Local local;
    for (double w : w_grid) {
      // Both sides carry the factor e^{beta_bar w}; compare with it divided out.
      const auto lhs = scaled_drift_lhs(cert, service, z, w, precision);
      // gamma(z) V(w) + K(z) = mS e^{beta_bar (w - z)}
      const double rhs = cert.mS * std::exp(-cert.beta_bar * z);
      const double margin = rhs - (lhs.value + lhs.error);
      local.error = std::max(local.error, lhs.error);
      if (margin < local.margin) {
        local.margin = margin;
        local.w = w;
      }
    }
    per_z[i] = local;
  });
  VerificationReport report;
  report.check = "drift";
  report.grid = describe_grid("z", z_grid) + "; " + describe_grid("w", w_grid);
  report.nodes = z_grid.size() * w_grid.size();
  report.error_allowance = precision;
  for (std::size_t i = 0; i < per_z.size(); ++i) {
    report.max_numeric_error = std::max(report.max_numeric_error, per_z[i].error);
    if (per_z[i].margin < report.worst_margin) {
      report.worst_margin = per_z[i].margin;
      report.worst_node = {z_grid[i], per_z[i].w};
    }
  }
  report.pass = report.worst_margin + report.error_allowance >= 0.0;
  return report;
}

VerificationReport verify_minorization(const DriftCertificate& cert, const ServiceSpec& service,
                                       std::span<const double> z_samples, std::size_t partitions,
                                       std::size_t w_points, unsigned workers) {
  if (z_samples.empty()) throw ConfigError("verify_minorization: z_samples must be nonempty");
  if (partitions < 1 || partitions > 64) throw ConfigError("verify_minorization: partitions must be in [1, 64]");
  if (w_points < 2) throw ConfigError("verify_minorization: need at least 2 w points");
  const double h = cert.h;
  std::vector<double> w_grid(w_points);
  for (std::size_t k = 0; k < w_points; ++k)
    w_grid[k] = k + 1 == w_points ? h : h * static_cast<double>(k) / static_cast<double>(w_points - 1);
  std::vector<double> edges(partitions + 1);
  for (std::size_t j = 0; j <= partitions; ++j)
    edges[j] = j == partitions ? h + 1.0 : h + static_cast<double>(j) / static_cast<double>(partitions);

  struct Local {
    double margin = kInfinity;
    double w = 0.0;
    double a = 0.0;
  };
  std::vector<Local> per_z(z_samples.size());
  parallel_for(z_samples.size(), workers, [&](std::size_t i) {
    const double z = z_samples[i];
    const double mass = minorization_mass(cert, z);
    Local local;
    for (double w : w_grid) {
      for (std::size_t j = 0; j < partitions; ++j) {
        // A subset of [h, h+1] excludes 0, so the positive part of w + S - z plays no role.
        const double q = service.interval_probability(edges[j] - w + z, edges[j + 1] - w + z);
        const double margin = q - mass * (edges[j + 1] - edges[j]);
        if (margin < local.margin) local = {margin, w, edges[j]};
      }
    }
    per_z[i] = local;
  });
  VerificationReport report;
  report.check = "minorization";
  report.grid = describe_grid("z", z_samples) + "; w: " + std::to_string(w_points) + " points in [0, h]; A: " +
                std::to_string(partitions) + " subintervals of [h, h+1]";
  report.nodes = z_samples.size() * w_points * partitions;
  // Rounding in the CDF differences, relative to the subinterval mass.
  report.error_allowance = 64.0 * std::numeric_limits<double>::epsilon() / static_cast<double>(partitions);
  for (std::size_t i = 0; i < per_z.size(); ++i) {
    if (per_z[i].margin < report.worst_margin) {
      report.worst_margin = per_z[i].margin;
      report.worst_node = {z_samples[i], per_z[i].w, per_z[i].a};
    }
  }
  report.pass = report.worst_margin + report.error_allowance >= 0.0;
  return report;
}

VerificationReport verify_self_consistency(const DriftCertificate& cert, double tolerance) {
  const double identities[] = {
      std::expm1(cert.beta_bar * cert.h) - cert.R,
      cert.R - 2.0 / cert.epsilon,
      cert.epsilon - (1.0 / std::sqrt(cert.gamma_bar) - 1.0) / 2.0,
      cert.kappa_exp - 1.0 / (3.0 * (1.0 - cert.theta)),
  };
  VerificationReport report;
  report.check = "self_consistency";
  report.grid = "e^{beta_bar h} - 1 = R; R = 2/epsilon; epsilon = (1/sqrt(gamma_bar) - 1)/2; kappa = 1/(3(1 - theta))";
  report.nodes = std::size(identities);
  report.error_allowance = tolerance;
  report.worst_margin = 0.0;
  for (double d : identities) report.worst_margin = std::min(report.worst_margin, -std::abs(d));
  report.pass = report.worst_margin + tolerance >= 0.0 && cert.lambda_at_beta_bar < 0.0 && cert.gamma_bar < 1.0;
  return report;
}

}  // namespace qergo
