#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qergo/lindley.hpp"

namespace qergo {

/// Where the stand-in for the stationary law comes from.
enum class ReferenceKind {
  Forward,  ///< W_{n_star} from independent forward replicas
  Loynes,   ///< backward supremum draws
};

const char* to_string(ReferenceKind kind);

struct TvDecayOptions {
  double w0 = 0.0;
  /// 0 selects max(20 * max(n_grid), 10^4).
  std::size_t n_star = 0;
  ReferenceKind reference = ReferenceKind::Forward;
  std::size_t loynes_horizon = 1000;
  std::size_t bootstrap = 100;
};

struct CurvePoint {
  double n = 0.0;
  double tv = 0.0;
  double std_error = 0.0;
};

struct TvCurve {
  std::vector<CurvePoint> points;
  /// TV between the two halves of the reference sample.
  double noise_floor = 0.0;
  std::size_t bins = 0;
  std::size_t n_star = 0;
  ReferenceKind reference = ReferenceKind::Forward;
  EmpiricalLaw reference_law;
  std::vector<double> edges;
  bool overflow = false;
};

/// Binned-TV distance between the law of W_n (from w0) and a reference stationary sample, per n.
TvCurve tv_decay_curve(const QueueModel& model, std::span<const std::size_t> n_grid, std::size_t replicas,
                       std::uint64_t seed, const TvDecayOptions& options = {}, unsigned workers = 0);

struct RateFit {
  double c1 = 0.0;
  double c2 = 0.0;
  double p = 0.0;
  double r_squared = 0.0;
  std::vector<double> used_n;
  std::vector<double> residuals;
};

/// Least squares of ln TV = ln c1 - c2 n^p over points above twice the noise floor.
/// With p unset, p is chosen from {0.1, ..., 1.0} by maximal r^2.
RateFit fit_rate(std::span<const CurvePoint> curve, double noise_floor, std::optional<double> p);
inline RateFit fit_rate(const TvCurve& curve, std::optional<double> p) {
  return fit_rate(curve.points, curve.noise_floor, p);
}

struct LlnPoint {
  double n = 0.0;
  double mean = 0.0;
  double stdev = 0.0;
  double reference = 0.0;  ///< mu*(Phi) from the reference law, NaN without one
};

struct LlnOptions {
  double w0 = 0.0;
  std::optional<EmpiricalLaw> reference;
};

/// Running averages (Phi(W_1) + ... + Phi(W_n))/n across replicas for Phi = 1{w >= threshold}.
std::vector<LlnPoint> lln_curve(const QueueModel& model, double threshold, std::span<const std::size_t> n_grid,
                                std::size_t replicas, std::uint64_t seed, const LlnOptions& options = {},
                                unsigned workers = 0);
std::vector<LlnPoint> lln_curve(const QueueModel& model, const StepFunction& phi, double reference_value,
                                std::span<const std::size_t> n_grid, std::size_t replicas, std::uint64_t seed,
                                double w0 = 0.0, unsigned workers = 0);

struct BorovkovRow {
  double n = 0.0;
  double tv = 0.0;
  double tv_std_error = 0.0;
  double rhs = 0.0;
  double rhs_std_error = 0.0;
  double margin = 0.0;     ///< 2 rhs - tv
  double allowance = 0.0;  ///< 3 sqrt(se_tv^2 + (2 se_rhs)^2)
  bool pass = false;
};

struct BorovkovCompareOptions {
  TvDecayOptions tv;
  BorovkovOptions rhs;
};

struct BorovkovTable {
  std::vector<BorovkovRow> rows;
  double noise_floor = 0.0;
  bool pass = false;
};

/// Checks TV(L(W_n), mu*) <= 2 P(non-coupling by n) + 3 combined stderr at every n.
BorovkovTable borovkov_compare(const QueueModel& model, std::span<const std::size_t> n_grid, std::size_t replicas,
                               std::uint64_t seed, const BorovkovCompareOptions& options = {}, unsigned workers = 0);

}  // namespace qergo
