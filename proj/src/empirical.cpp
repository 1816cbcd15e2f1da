#include "qergo/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qergo/errors.hpp"
#include "qergo/parallel.hpp"

namespace qergo {

EmpiricalLaw::EmpiricalLaw(std::vector<double> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw DomainError("empirical law needs at least one sample");
  for (double x : samples_)
    if (!std::isfinite(x) || x < 0.0) throw DomainError("empirical law samples must be finite and >= 0");
  std::sort(samples_.begin(), samples_.end());
}

double EmpiricalLaw::cdf(double x) const {
  const auto it = std::upper_bound(samples_.begin(), samples_.end(), x);
  return static_cast<double>(it - samples_.begin()) / static_cast<double>(samples_.size());
}

double EmpiricalLaw::tail(double w0) const {
  const auto it = std::lower_bound(samples_.begin(), samples_.end(), w0);
  return static_cast<double>(samples_.end() - it) / static_cast<double>(samples_.size());
}

double EmpiricalLaw::mean() const {
  CompensatedSum sum;
  for (double x : samples_) sum.add(x);
  return sum.value() / static_cast<double>(samples_.size());
}

BinnedLaw EmpiricalLaw::binned(std::span<const double> edges) const {
  if (edges.size() < 2) throw DomainError("binning needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw DomainError("bin edges must be strictly increasing");
  const std::size_t bins = edges.size() - 1;
  const double n = static_cast<double>(samples_.size());
  // below[i] = number of samples strictly below edges[i].
  std::vector<std::size_t> below(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i)
    below[i] = static_cast<std::size_t>(std::lower_bound(samples_.begin(), samples_.end(), edges[i]) - samples_.begin());
  BinnedLaw out{{edges.begin(), edges.end()}, std::vector<double>(bins), below.front() + (samples_.size() - below.back())};
  for (std::size_t i = 0; i < bins; ++i) {
    std::size_t count = below[i + 1] - below[i];
    if (i == 0) count += below.front();
    if (i + 1 == bins) count += samples_.size() - below.back();
    out.masses[i] = static_cast<double>(count) / n;
  }
  return out;
}

double ks_distance(const EmpiricalLaw& a, const EmpiricalLaw& b) {
  const auto x = a.samples();
  const auto y = b.samples();
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double worst = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    worst = std::max(worst, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
  }
  return worst;
}

double tv_masses(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DomainError("tv_masses: mass vectors differ in length");
  CompensatedSum sum;
  for (std::size_t i = 0; i < p.size(); ++i) sum.add(std::abs(p[i] - q[i]));
  return sum.value();
}

TvResult tv_binned(const EmpiricalLaw& a, const EmpiricalLaw& b, std::span<const double> edges) {
  const auto pa = a.binned(edges);
  const auto pb = b.binned(edges);
  return {std::min(2.0, tv_masses(pa.masses, pb.masses)), pa.overflow_samples + pb.overflow_samples};
}

std::vector<double> equal_mass_edges(const EmpiricalLaw& reference, std::size_t bins) {
  if (bins == 0) throw DomainError("equal_mass_edges: bins must be >= 1");
  const auto s = reference.samples();
  std::vector<double> edges{0.0};
  for (std::size_t k = 1; k < bins; ++k) {
    const double q = s[k * s.size() / bins];
    if (q > edges.back()) edges.push_back(q);
  }
  edges.push_back(std::numeric_limits<double>::infinity());
  return edges;
}

double tail_estimate(const EmpiricalLaw& law, double w0) { return law.tail(w0); }

}  // namespace qergo
