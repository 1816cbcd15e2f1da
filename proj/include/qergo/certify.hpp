#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qergo/lindley.hpp"
#include "qergo/quadrature.hpp"

namespace qergo {

enum class AlphaMode {
  ConstantBounded,       ///< bounded environment: alpha = 1 - inf f on [0, M + h + 1]
  ExponentialUnbounded,  ///< alpha(z) = 1 - C4 exp(-C5 (z + h + 1))
};

const char* to_string(AlphaMode mode);

enum class GammaMethod { Exact, MonteCarlo };

/// Monte Carlo settings used when the environment has no exact cumulant limit.
struct MonteCarloCgf {
  std::size_t n = 200;
  std::size_t replicas = 20000;
  std::uint64_t seed = 0x5eed;
};

struct LambdaValue {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = true;
};

/// lambda(beta) = Gamma(-beta) + ln E[e^{beta S}] with the exact cumulant limit.
double lambda_fn(const QueueModel& model, double beta);
/// Same with a Monte Carlo estimate of Gamma(-beta).
LambdaValue lambda_fn_mc(const QueueModel& model, double beta, const MonteCarloCgf& mc, unsigned workers = 0);
/// E[S] - E[Z].
double lambda_slope_at_zero(const QueueModel& model);

struct BetaSearch {
  double beta_bar = 0.0;
  double lambda = 0.0;
  double step = 0.0;
  double upper = 0.0;  ///< right edge of the grid, 0.9 * min(beta0, beta_cap)
  bool exact = true;
};

struct BetaSearchOptions {
  double step = 0.01;
  /// Stand-in for beta0 when the service MGF is entire.
  double beta_cap = 10.0;
  MonteCarloCgf mc;
};

/// Grid argmin of lambda over (0, 0.9 beta0]; smallest minimizer wins ties.
/// Throws CertificationError (Critical, Supercritical or GridResolution) if no value below -1e-6 is found.
BetaSearch find_beta_bar(const QueueModel& model, const BetaSearchOptions& options = {}, unsigned workers = 0);

struct SmallSet {
  double epsilon = 0.0;
  double R = 0.0;
  double h = 0.0;
};

/// epsilon = (1/sqrt(gamma_bar) - 1)/2, R = 2/epsilon, h = ln(2/epsilon + 1)/beta_bar.
SmallSet small_set_parameters(double gamma_bar, double beta_bar);

struct DriftCertificate {
  double beta_bar = 0.0;
  double mS = 0.0;  ///< E[e^{beta_bar S}]
  double gamma_bar = 0.0;
  double gamma_bar_std_error = 0.0;
  GammaMethod gamma_method = GammaMethod::Exact;
  double epsilon = 0.0;
  double R = 0.0;
  double h = 0.0;
  AlphaMode alpha_mode = AlphaMode::ConstantBounded;
  double alpha_const = 0.0;  ///< bounded mode only
  double C4 = 0.0;           ///< unbounded mode only
  double C5 = 0.0;
  double theta = 0.5;
  bool theta_selected = false;  ///< theta came from the measured alpha-moment curve
  double kappa_exp = 0.0;       ///< 1 / (3 (1 - theta))
  double lambda_at_beta_bar = 0.0;
  double grid_step = 0.0;
  double H = 0.0;            ///< constant of the analytic alpha-moment bound
  double env_bound = 0.0;    ///< M, +infinity if unbounded
  std::optional<DoublyExponentialTail> env_tail;

  /// alpha(z) of the minorization condition.
  double alpha(double z) const;
};

/// K(z) = gamma(z) = e^{-beta_bar z} mS.
double gamma_K(double z, const DriftCertificate& cert);

struct GammaBar {
  double value = 0.0;
  double std_error = 0.0;
  GammaMethod method = GammaMethod::Exact;
};

/// gamma_bar = mS * exp(Gamma(-beta_bar)); exact for IID and MarkovModulated.
GammaBar contractivity_gamma_bar(const EnvironmentSpec& env, double beta_bar, double mS, GammaMethod method,
                                 const MonteCarloCgf& mc = {}, unsigned workers = 0);

struct AlphaMomentPoint {
  double n = 0.0;
  double value = 0.0;  ///< E^{1/n^theta}[alpha(Z_0)^n]
  double std_error = 0.0;
  double ess = 0.0;  ///< effective sample size of the importance weights (Monte Carlo only)
  bool low_ess = false;
  /// H ln(n) exp(-C6 n^{1-C5 H}) + C1 exp(-C2 n^{C3 H}), a bound on E[alpha^n]; NaN when unavailable.
  double moment_bound = 0.0;
  /// moment_bound^{1/n^theta}, on the same scale as value.
  double bound = 0.0;
};

struct AlphaMomentOptions {
  std::size_t samples = 100000;
  std::uint64_t seed = 0xa1fa;
};

std::vector<AlphaMomentPoint> alpha_moment_curve(const DriftCertificate& cert, const EnvironmentSpec& env,
                                                 double theta, std::span<const double> n_list,
                                                 const AlphaMomentOptions& options = {});

/// True when the curve never increases on [n_after, infinity) (Monte Carlo noise allowance of 2 stderr).
bool nonincreasing_after(std::span<const AlphaMomentPoint> curve, double n_after);

/// Largest theta in {0.1, ..., 0.9} admissible for the analytic bound whose curve is nonincreasing beyond n = 10.
std::optional<double> select_theta(const DriftCertificate& cert, const EnvironmentSpec& env,
                                   std::span<const double> n_list, const AlphaMomentOptions& options = {});

/// Default log-spaced n grid for the alpha-moment curve.
std::vector<double> default_alpha_n_list();

struct CertifyOptions {
  std::optional<double> theta;
  std::optional<AlphaMode> alpha_mode;
  std::optional<double> H;
  BetaSearchOptions beta;
  AlphaMomentOptions alpha_moment;
};

/// Assembles the full certificate. Throws StabilityError for non-subcritical models and
/// CertificationError when a minorization constant cannot be obtained.
DriftCertificate build_certificate(const QueueModel& model, const CertifyOptions& options = {}, unsigned workers = 0);

struct VerificationReport {
  std::string check;
  std::string grid;
  std::size_t nodes = 0;
  double worst_margin = kInfinity;  ///< min over nodes of RHS - LHS
  std::vector<double> worst_node;   ///< coordinates of the worst node
  double error_allowance = 0.0;
  double max_numeric_error = 0.0;  ///< largest quadrature error bar seen
  bool pass = false;
};

/// Upper estimate of [Q(z)V](w) = E[e^{beta_bar (w + S - z)_+}] - 1 with a rigorous tail bound folded into the error.
Quadrature drift_lhs(const DriftCertificate& cert, const ServiceSpec& service, double z, double w, double precision);

/// Checks [Q(z)V](w) <= gamma(z) V(w) + K(z) at every node. Both sides are divided by e^{beta_bar w}
/// before comparing, so margins and the quadrature tolerance `precision` are on a scale bounded by mS.
VerificationReport verify_drift(const DriftCertificate& cert, const ServiceSpec& service,
                                std::span<const double> z_grid, std::span<const double> w_grid, double precision,
                                unsigned workers = 0);

VerificationReport verify_minorization(const DriftCertificate& cert, const ServiceSpec& service,
                                       std::span<const double> z_samples, std::size_t partitions,
                                       std::size_t w_points = 50, unsigned workers = 0);

/// Certificate identities: e^{beta_bar h} - 1 = R, R = 2/epsilon, epsilon = (1/sqrt(gamma_bar) - 1)/2, kappa.
VerificationReport verify_self_consistency(const DriftCertificate& cert, double tolerance = 1e-9);

}  // namespace qergo
