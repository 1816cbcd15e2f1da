#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qergo {

/// Histogram of a law on shared edges; bins are [e_i, e_{i+1}).
struct BinnedLaw {
  std::vector<double> edges;
  std::vector<double> masses;
  /// Samples that fell below edges.front() or at/above edges.back() and were folded into the end bins.
  std::size_t overflow_samples = 0;
};

/// Sorted-sample representation of a law on [0, infinity).
class EmpiricalLaw {
 public:
  /// Sorts the samples. Throws DomainError if empty, negative or non-finite.
  explicit EmpiricalLaw(std::vector<double> samples);

  std::span<const double> samples() const { return samples_; }
  std::size_t size() const { return samples_.size(); }
  double min() const { return samples_.front(); }
  double max() const { return samples_.back(); }

  /// Fraction of samples <= x.
  double cdf(double x) const;
  /// Fraction of samples >= w0 (closed upper set).
  double tail(double w0) const;
  double mean() const;
  BinnedLaw binned(std::span<const double> edges) const;

 private:
  std::vector<double> samples_;
};

/// Sup-distance between the two empirical CDFs (merge scan).
double ks_distance(const EmpiricalLaw& a, const EmpiricalLaw& b);

struct TvResult {
  double distance = 0.0;  ///< sum over bins of |p_i - q_i|, in [0, 2]
  std::size_t overflow_samples = 0;
  bool overflow() const { return overflow_samples > 0; }
};

/// Full-variation distance of the two laws after binning on `edges` (strictly increasing, >= 2 entries).
TvResult tv_binned(const EmpiricalLaw& a, const EmpiricalLaw& b, std::span<const double> edges);
/// Same distance for already-binned mass vectors of equal length.
double tv_masses(std::span<const double> p, std::span<const double> q);

/// Edges {0, interior equal-mass quantiles of `reference`, +infinity}, duplicates removed.
std::vector<double> equal_mass_edges(const EmpiricalLaw& reference, std::size_t bins);

/// Fraction of samples >= w0.
double tail_estimate(const EmpiricalLaw& law, double w0);

}  // namespace qergo
