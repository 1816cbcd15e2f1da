#include "qergo/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qergo/errors.hpp"
#include "qergo/parallel.hpp"

namespace qergo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> sorted_grid(std::span<const std::size_t> n_grid, const char* what) {
  if (n_grid.empty()) throw ConfigError(std::string(what) + ": n grid is empty");
  std::vector<std::size_t> grid(n_grid.begin(), n_grid.end());
  std::sort(grid.begin(), grid.end());
  return grid;
}

std::vector<std::uint32_t> bin_indices(std::span<const double> samples, std::span<const double> edges) {
  const std::size_t bins = edges.size() - 1;
  std::vector<std::uint32_t> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto it = std::upper_bound(edges.begin(), edges.end(), samples[i]);
    const auto pos = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
    out[i] = static_cast<std::uint32_t>(std::clamp<std::ptrdiff_t>(pos, 0, static_cast<std::ptrdiff_t>(bins) - 1));
  }
  return out;
}

std::vector<double> resampled_masses(std::span<const std::uint32_t> idx, std::size_t bins, Stream& stream) {
  std::vector<double> masses(bins, 0.0);
  const double unit = 1.0 / static_cast<double>(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) masses[idx[stream.index(idx.size())]] += unit;
  return masses;
}

}  // namespace

const char* to_string(ReferenceKind kind) { return kind == ReferenceKind::Forward ? "forward" : "loynes"; }

TvCurve tv_decay_curve(const QueueModel& model, std::span<const std::size_t> n_grid, std::size_t replicas,
                       std::uint64_t seed, const TvDecayOptions& options, unsigned workers) {
  model.require_subcritical("tv_decay_curve");
  if (replicas < 1000) throw ConfigError("tv_decay_curve: replicas must be >= 1000 for the equal-mass bin rule");
  const auto grid = sorted_grid(n_grid, "tv_decay_curve");
  const std::size_t n_star =
      options.n_star > 0 ? options.n_star : std::max<std::size_t>(20 * grid.back(), 10000);
  if (n_star < grid.back()) throw ConfigError("tv_decay_curve: n_star must be >= max(n_grid)");

  // waits[g * replicas + r] = W_{grid[g]} of replica r.
  std::vector<double> waits(grid.size() * replicas);
  std::vector<double> reference(replicas);
  const auto reversed = reversed_spec(model.environment);
  parallel_for(replicas, workers, [&](std::size_t r) {
    const auto w = waits_at(model, options.w0, grid, replica_seeds(seed, r));
    for (std::size_t g = 0; g < grid.size(); ++g) waits[g * replicas + r] = w[g];
    const Seeds ref_seeds{derive_seed(seed, r, StreamRole::ReferenceEnvironment),
                          derive_seed(seed, r, StreamRole::ReferenceService)};
    if (options.reference == ReferenceKind::Forward) {
      const std::size_t steps[] = {n_star};
      reference[r] = waits_at(model, options.w0, steps, ref_seeds).front();
    } else {
      Stream ref_env(ref_seeds.environment);
      Stream ref_svc(ref_seeds.service);
      EnvSampler present(model.environment);
      present.start_stationary(ref_env);
      reference[r] = loynes_draw(model, reversed, options.loynes_horizon, present, ref_env, ref_svc).value;
    }
  });

  const auto bins = static_cast<std::size_t>(std::ceil(std::cbrt(static_cast<double>(replicas)) - 1e-9));
  const std::size_t half = replicas / 2;
  const EmpiricalLaw first_half({reference.begin(), reference.begin() + static_cast<std::ptrdiff_t>(half)});
  const EmpiricalLaw second_half({reference.begin() + static_cast<std::ptrdiff_t>(half), reference.end()});
  TvCurve curve{{}, 0.0, bins, n_star, options.reference, EmpiricalLaw(reference), {}, false};
  curve.edges = equal_mass_edges(curve.reference_law, bins);
  curve.noise_floor = tv_binned(first_half, second_half, curve.edges).distance;

  const std::size_t used_bins = curve.edges.size() - 1;
  const auto ref_idx = bin_indices(reference, curve.edges);
  std::vector<CurvePoint> points(grid.size());
  std::vector<char> overflow(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t g) {
    const std::span<const double> sample(waits.data() + g * replicas, replicas);
    const EmpiricalLaw law({sample.begin(), sample.end()});
    const auto tv = tv_binned(law, curve.reference_law, curve.edges);
    overflow[g] = tv.overflow() ? 1 : 0;
    const auto idx = bin_indices(sample, curve.edges);
    std::vector<double> boot(options.bootstrap);
    for (std::size_t b = 0; b < options.bootstrap; ++b) {
      Stream stream(derive_seed(derive_seed(seed, g, StreamRole::Bootstrap), b, StreamRole::Bootstrap));
      const auto p = resampled_masses(idx, used_bins, stream);
      const auto q = resampled_masses(ref_idx, used_bins, stream);
      boot[b] = tv_masses(p, q);
    }
    const double se = options.bootstrap >= 2 ? sample_moments(boot).stdev : 0.0;
    points[g] = {static_cast<double>(grid[g]), tv.distance, se};
  });
  curve.points = std::move(points);
  curve.overflow = std::any_of(overflow.begin(), overflow.end(), [](char c) { return c != 0; });
  return curve;
}

namespace {

RateFit fit_fixed(std::span<const CurvePoint> usable, double p) {
  const double m = static_cast<double>(usable.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& pt : usable) {
    sx += std::pow(pt.n, p);
    sy += std::log(pt.tv);
  }
  const double mx = sx / m;
  const double my = sy / m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& pt : usable) {
    const double dx = std::pow(pt.n, p) - mx;
    const double dy = std::log(pt.tv) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw FitError("fit_rate: curve points share one n");
  const double slope = sxy / sxx;
  RateFit fit;
  fit.p = p;
  fit.c2 = -slope;
  fit.c1 = std::exp(my - slope * mx);
  double ss_res = 0.0;
  for (const auto& pt : usable) {
    const double r = std::log(pt.tv) - (my + slope * (std::pow(pt.n, p) - mx));
    fit.used_n.push_back(pt.n);
    fit.residuals.push_back(r);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return fit;
}

}  // namespace

RateFit fit_rate(std::span<const CurvePoint> curve, double noise_floor, std::optional<double> p) {
  if (p && !(*p > 0.0 && *p <= 1.0)) throw ConfigError("fit_rate: exponent p must lie in (0, 1]");
  std::vector<CurvePoint> usable;
  bool zero = false;
  for (const auto& pt : curve) {
    if (!(pt.tv > 0.0)) zero = true;
    if (pt.tv > 2.0 * noise_floor && pt.tv > 0.0) usable.push_back(pt);
  }
  if (usable.size() < 4) {
    std::ostringstream msg;
    msg << "fit_rate: " << usable.size() << " usable points above twice the noise floor (" << noise_floor
        << "), need 4" << (zero ? "; curve has zero values (log of zero)" : "");
    throw FitError(msg.str());
  }
  RateFit best;
  if (p) {
    best = fit_fixed(usable, *p);
  } else {
    best.r_squared = -1.0;
    for (int k = 1; k <= 10; ++k) {
      auto fit = fit_fixed(usable, k / 10.0);
      if (fit.r_squared > best.r_squared) best = std::move(fit);
    }
  }
  if (!(best.c2 > 0.0)) {
    std::ostringstream msg;
    msg << "fit_rate: fitted c2 = " << best.c2 << " is not positive (curve does not decay)";
    throw FitError(msg.str());
  }
  return best;
}

std::vector<LlnPoint> lln_curve(const QueueModel& model, const StepFunction& phi, double reference_value,
                                std::span<const std::size_t> n_grid, std::size_t replicas, std::uint64_t seed,
                                double w0, unsigned workers) {
  model.require_subcritical("lln_curve");
  if (replicas < 2) throw ConfigError("lln_curve: replicas must be >= 2");
  const auto grid = sorted_grid(n_grid, "lln_curve");
  if (grid.front() < 1) throw ConfigError("lln_curve: n must be >= 1");
  // averages[g * replicas + r]
  std::vector<double> averages(grid.size() * replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    const Seeds seeds = replica_seeds(seed, r);
    Stream env_stream(seeds.environment);
    Stream svc_stream(seeds.service);
    EnvSampler env(model.environment);
    env.start_stationary(env_stream);
    double w = w0;
    CompensatedSum sum;
    std::size_t k = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      for (; k < grid[g]; ++k) {
        const double s = model.service.sample(svc_stream);
        w = lindley_step(w, s, env.next(env_stream));
        sum.add(phi(w));
      }
      averages[g * replicas + r] = sum.value() / static_cast<double>(grid[g]);
    }
  });
  std::vector<LlnPoint> out;
  out.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto m = sample_moments(std::span<const double>(averages.data() + g * replicas, replicas));
    out.push_back({static_cast<double>(grid[g]), m.mean, m.stdev, reference_value});
  }
  return out;
}

std::vector<LlnPoint> lln_curve(const QueueModel& model, double threshold, std::span<const std::size_t> n_grid,
                                std::size_t replicas, std::uint64_t seed, const LlnOptions& options,
                                unsigned workers) {
  const double reference = options.reference ? tail_estimate(*options.reference, threshold) : kNaN;
  return lln_curve(model, StepFunction::indicator(threshold), reference, n_grid, replicas, seed, options.w0, workers);
}

BorovkovTable borovkov_compare(const QueueModel& model, std::span<const std::size_t> n_grid, std::size_t replicas,
                               std::uint64_t seed, const BorovkovCompareOptions& options, unsigned workers) {
  model.require_subcritical("borovkov_compare");
  const auto grid = sorted_grid(n_grid, "borovkov_compare");
  const auto curve = tv_decay_curve(model, grid, replicas, seed, options.tv, workers);
  const auto rhs = borovkov_rhs_curve(model, grid, replicas, derive_seed(seed, 0, StreamRole::Auxiliary),
                                      options.rhs, workers);
  BorovkovTable table;
  table.noise_floor = curve.noise_floor;
  table.pass = true;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    BorovkovRow row;
    row.n = static_cast<double>(grid[g]);
    row.tv = curve.points[g].tv;
    row.tv_std_error = curve.points[g].std_error;
    row.rhs = rhs[g].estimate;
    row.rhs_std_error = rhs[g].std_error;
    row.margin = 2.0 * row.rhs - row.tv;
    row.allowance = 3.0 * std::hypot(row.tv_std_error, 2.0 * row.rhs_std_error);
    row.pass = row.margin >= -row.allowance;
    table.pass = table.pass && row.pass;
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace qergo
