#include "qergo/config.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "qergo/errors.hpp"

namespace qergo {

using nlohmann::json;

namespace {

constexpr std::pair<ExperimentKind, const char*> kKindNames[] = {
    {ExperimentKind::Simulate, "simulate"}, {ExperimentKind::Certify, "certify"},
    {ExperimentKind::TvDecay, "tv-decay"},  {ExperimentKind::Lln, "lln"},
    {ExperimentKind::LoynesCompare, "loynes-compare"}, {ExperimentKind::Borovkov, "borovkov"},
    {ExperimentKind::GeLimit, "ge-limit"},
};

const std::set<std::string> kCommonKeys = {"kind", "seed", "output"};

const std::map<ExperimentKind, std::set<std::string>> kKindKeys = {
    {ExperimentKind::Simulate, {"horizon", "w0", "replicas", "threshold"}},
    {ExperimentKind::Certify,
     {"theta", "alpha_mode", "H", "grid_step", "beta_cap", "precision", "z_points", "w_points", "z_max", "w_max",
      "partitions", "z_samples", "minorization_w_points", "alpha_samples", "mc_n", "mc_replicas"}},
    {ExperimentKind::TvDecay,
     {"n_grid", "replicas", "n_star", "w0", "reference", "loynes_horizon", "bootstrap", "fit_exponent",
      "min_r_squared"}},
    {ExperimentKind::Lln,
     {"threshold", "n_grid", "replicas", "w0", "reference", "reference_replicas", "loynes_horizon", "n_star",
      "tolerance"}},
    {ExperimentKind::LoynesCompare, {"horizon", "loynes_horizon", "replicas", "threshold", "tolerance"}},
    {ExperimentKind::Borovkov,
     {"n_grid", "replicas", "reference", "n_star", "loynes_horizon", "event", "bootstrap"}},
    {ExperimentKind::GeLimit, {"alphas", "n", "replicas"}},
};

// Reads typed values out of a toml table, recording every problem instead of stopping at the first.
class Reader {
 public:
  Reader(const toml::table& table, std::string path, std::vector<std::string>& violations)
      : table_(table), path_(std::move(path)), violations_(violations) {}

  void fail(const std::string& key, const std::string& what) const {
    violations_.push_back(join(key) + ": " + what);
  }

  bool has(const std::string& key) const { return table_.contains(key); }

  void reject_unknown(const std::set<std::string>& allowed) const {
    for (const auto& [key, node] : table_) {
      const std::string k(key.str());
      if (!allowed.count(k)) fail(k, "unknown key");
    }
  }

  std::optional<double> number(const std::string& key, bool required = false) const {
    const auto* node = table_.get(key);
    if (!node) {
      if (required) fail(key, "missing required number");
      return std::nullopt;
    }
    if (auto v = node->value<double>(); v && (node->is_floating_point() || node->is_integer())) {
      if (!std::isfinite(*v)) {
        fail(key, "must be finite");
        return std::nullopt;
      }
      return v;
    }
    fail(key, "must be a number");
    return std::nullopt;
  }

  std::optional<std::int64_t> integer(const std::string& key, bool required = false) const {
    const auto* node = table_.get(key);
    if (!node) {
      if (required) fail(key, "missing required integer");
      return std::nullopt;
    }
    if (!node->is_integer()) {
      fail(key, "must be an integer");
      return std::nullopt;
    }
    return node->value<std::int64_t>();
  }

  std::optional<std::size_t> count(const std::string& key, std::size_t minimum, bool required = false) const {
    const auto v = integer(key, required);
    if (!v) return std::nullopt;
    if (*v < static_cast<std::int64_t>(minimum)) {
      fail(key, "must be >= " + std::to_string(minimum));
      return std::nullopt;
    }
    return static_cast<std::size_t>(*v);
  }

  std::optional<std::string> string(const std::string& key, bool required = false) const {
    const auto* node = table_.get(key);
    if (!node) {
      if (required) fail(key, "missing required string");
      return std::nullopt;
    }
    if (!node->is_string()) {
      fail(key, "must be a string");
      return std::nullopt;
    }
    return node->value<std::string>();
  }

  std::optional<std::vector<double>> numbers(const std::string& key, bool required = false) const {
    const auto* node = table_.get(key);
    if (!node) {
      if (required) fail(key, "missing required array of numbers");
      return std::nullopt;
    }
    const auto* arr = node->as_array();
    if (!arr) {
      fail(key, "must be an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& item : *arr) {
      const auto v = item.value<double>();
      if (!v || !(item.is_integer() || item.is_floating_point()) || !std::isfinite(*v)) {
        fail(key, "must be an array of finite numbers");
        return std::nullopt;
      }
      out.push_back(*v);
    }
    return out;
  }

  std::optional<std::vector<std::vector<double>>> matrix(const std::string& key, bool required = false) const {
    const auto* node = table_.get(key);
    if (!node) {
      if (required) fail(key, "missing required matrix (array of arrays)");
      return std::nullopt;
    }
    const auto* arr = node->as_array();
    if (!arr) {
      fail(key, "must be an array of arrays of numbers");
      return std::nullopt;
    }
    std::vector<std::vector<double>> out;
    for (const auto& row_node : *arr) {
      const auto* row = row_node.as_array();
      if (!row) {
        fail(key, "must be an array of arrays of numbers");
        return std::nullopt;
      }
      std::vector<double> values;
      for (const auto& item : *row) {
        const auto v = item.value<double>();
        if (!v || !(item.is_integer() || item.is_floating_point()) || !std::isfinite(*v)) {
          fail(key, "entries must be finite numbers");
          return std::nullopt;
        }
        values.push_back(*v);
      }
      out.push_back(std::move(values));
    }
    return out;
  }

  std::optional<Reader> child(const std::string& key, bool required) const {
    const auto* t = subtable(key, required);
    if (!t) return std::nullopt;
    return Reader(*t, join(key), violations_);
  }

  const toml::table* subtable(const std::string& key, bool required) const {
    const auto* node = table_.get(key);
    if (!node) {
      if (required) fail(key, "missing required table");
      return nullptr;
    }
    if (!node->is_table()) {
      fail(key, "must be a table");
      return nullptr;
    }
    return node->as_table();
  }

  const std::string& path() const { return path_; }
  const toml::table& table() const { return table_; }

 private:
  std::string join(const std::string& key) const {
    if (key.empty()) return path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const toml::table& table_;
  std::string path_;
  std::vector<std::string>& violations_;
};

template <class Fn>
auto guarded(const Reader& reader, const std::string& key, Fn&& fn) -> std::optional<decltype(fn())> {
  try {
    return fn();
  } catch (const Error& e) {
    reader.fail(key, e.what());
    return std::nullopt;
  }
}

std::optional<Marginal> read_marginal(const Reader& parent, json& out) {
  const auto r = parent.child("marginal", true);
  if (!r) return std::nullopt;
  const auto law = r->string("law", true);
  if (!law) return std::nullopt;
  out["law"] = *law;
  auto param = [&](const char* key) {
    const auto v = r->number(key, true);
    if (v) out[key] = *v;
    return v;
  };
  std::optional<Marginal> m;
  if (*law == "degenerate") {
    r->reject_unknown({"law", "value"});
    if (const auto v = param("value")) m = guarded(*r, "", [&] { return Marginal::degenerate(*v); });
  } else if (*law == "exponential") {
    r->reject_unknown({"law", "rate"});
    if (const auto v = param("rate")) m = guarded(*r, "", [&] { return Marginal::exponential(*v); });
  } else if (*law == "uniform") {
    r->reject_unknown({"law", "lo", "hi"});
    const auto lo = param("lo");
    const auto hi = param("hi");
    if (lo && hi) m = guarded(*r, "", [&] { return Marginal::uniform(*lo, *hi); });
  } else if (*law == "truncated_exponential") {
    r->reject_unknown({"law", "rate", "bound"});
    const auto rate = param("rate");
    const auto bound = param("bound");
    if (rate && bound) m = guarded(*r, "", [&] { return Marginal::truncated_exponential(*rate, *bound); });
  } else if (*law == "doubly_exponential") {
    r->reject_unknown({"law", "c2", "c3"});
    const auto c2 = param("c2");
    const auto c3 = param("c3");
    if (c2 && c3) m = guarded(*r, "", [&] { return Marginal::doubly_exponential(*c2, *c3); });
  } else {
    r->fail("law", "unknown law '" + *law +
                       "' (expected degenerate, exponential, uniform, truncated_exponential, doubly_exponential)");
  }
  return m;
}

std::optional<EnvironmentSpec> read_environment(const Reader& root, json& out) {
  const auto r = root.child("environment", true);
  if (!r) return std::nullopt;
  const auto family = r->string("family", true);
  if (!family) return std::nullopt;
  out["family"] = *family;
  if (*family == "iid") {
    r->reject_unknown({"family", "marginal"});
    json marginal;
    const auto m = read_marginal(*r, marginal);
    out["marginal"] = marginal;
    if (m) return EnvironmentSpec::iid(*m);
    return std::nullopt;
  }
  if (*family == "copula_ar1") {
    r->reject_unknown({"family", "marginal", "ar_coefficient"});
    json marginal;
    const auto m = read_marginal(*r, marginal);
    out["marginal"] = marginal;
    const auto rho = r->number("ar_coefficient", true);
    if (rho) out["ar_coefficient"] = *rho;
    if (m && rho) return guarded(*r, "ar_coefficient", [&] { return EnvironmentSpec::copula_ar1(*rho, *m); });
    return std::nullopt;
  }
  if (*family == "markov_modulated") {
    r->reject_unknown({"family", "states", "transition"});
    const auto states = r->numbers("states", true);
    const auto rows = r->matrix("transition", true);
    if (states) out["states"] = *states;
    if (rows) out["transition"] = *rows;
    if (!states || !rows) return std::nullopt;
    bool shape_ok = rows->size() == states->size();
    if (!shape_ok) r->fail("transition", "must have one row per state");
    for (std::size_t i = 0; i < states->size(); ++i)
      if ((*states)[i] < 0.0) r->fail("states", "value " + std::to_string(i) + " is negative");
    for (std::size_t i = 0; i < rows->size(); ++i) {
      const auto& row = (*rows)[i];
      if (row.size() != states->size()) {
        r->fail("transition", "row " + std::to_string(i) + " has " + std::to_string(row.size()) + " entries, expected " +
                                  std::to_string(states->size()));
        shape_ok = false;
        continue;
      }
      double sum = 0.0;
      for (double v : row) {
        if (v < 0.0) r->fail("transition", "row " + std::to_string(i) + " has a negative entry");
        sum += v;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "row " << i << " sums to " << sum << ", not 1 (non-stochastic transition row)";
        r->fail("transition", msg.str());
      }
    }
    if (!shape_ok) return std::nullopt;
    Eigen::MatrixXd p(static_cast<Eigen::Index>(states->size()), static_cast<Eigen::Index>(states->size()));
    for (std::size_t i = 0; i < states->size(); ++i)
      for (std::size_t j = 0; j < states->size(); ++j)
        p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*rows)[i][j];
    return guarded(*r, "transition", [&] { return EnvironmentSpec::markov_modulated(*states, p); });
  }
  r->fail("family", "unknown family '" + *family + "' (expected iid, markov_modulated, copula_ar1)");
  return std::nullopt;
}

std::optional<ServiceSpec> read_service(const Reader& root, json& out) {
  const auto r = root.child("service", true);
  if (!r) return std::nullopt;
  const auto family = r->string("family", true);
  auto mode = TheoremMode::None;
  if (const auto m = r->string("theorem_mode")) {
    if (*m == "none") {
      mode = TheoremMode::None;
    } else if (*m == "bounded_env") {
      mode = TheoremMode::BoundedEnv;
    } else if (*m == "light_tail_env") {
      mode = TheoremMode::LightTailEnv;
    } else {
      r->fail("theorem_mode", "unknown mode '" + *m + "' (expected none, bounded_env, light_tail_env)");
    }
  }
  out["theorem_mode"] = to_string(mode);
  if (!family) return std::nullopt;
  out["family"] = *family;
  auto param = [&](const char* key) {
    const auto v = r->number(key, true);
    if (v) out[key] = *v;
    return v;
  };
  std::optional<ServiceSpec> s;
  if (*family == "degenerate") {
    r->reject_unknown({"family", "theorem_mode", "value"});
    if (const auto v = param("value")) s = guarded(*r, "", [&] { return ServiceSpec::degenerate(*v, mode); });
  } else if (*family == "exponential") {
    r->reject_unknown({"family", "theorem_mode", "rate"});
    if (const auto v = param("rate")) s = guarded(*r, "", [&] { return ServiceSpec::exponential(*v, mode); });
  } else if (*family == "gamma") {
    r->reject_unknown({"family", "theorem_mode", "shape", "rate"});
    const auto k = param("shape");
    const auto mu = param("rate");
    if (k && mu) s = guarded(*r, "", [&] { return ServiceSpec::gamma(*k, *mu, mode); });
  } else if (*family == "uniform_shifted") {
    r->reject_unknown({"family", "theorem_mode", "lo", "hi"});
    const auto lo = param("lo");
    const auto hi = param("hi");
    if (lo && hi) s = guarded(*r, "", [&] { return ServiceSpec::uniform_shifted(*lo, *hi, mode); });
  } else if (*family == "exponential_mixture") {
    r->reject_unknown({"family", "theorem_mode", "weights", "rates"});
    const auto w = r->numbers("weights", true);
    const auto rates = r->numbers("rates", true);
    if (w) out["weights"] = *w;
    if (rates) out["rates"] = *rates;
    if (w && rates) s = guarded(*r, "", [&] { return ServiceSpec::exponential_mixture(*w, *rates, mode); });
  } else {
    r->fail("family", "unknown family '" + *family +
                          "' (expected degenerate, exponential, gamma, uniform_shifted, exponential_mixture)");
  }
  return s;
}

void apply_kind_defaults(ExperimentSettings& e) {
  switch (e.kind) {
    case ExperimentKind::Simulate:
      e.horizon = 1000;
      e.replicas = 1;
      break;
    case ExperimentKind::Certify:
      break;
    case ExperimentKind::TvDecay:
      e.n_grid = {1, 2, 5, 10, 20, 50};
      e.replicas = 100000;
      e.reference = ReferenceKind::Forward;
      break;
    case ExperimentKind::Lln:
      e.n_grid = {1000, 10000, 100000};
      e.replicas = 400;
      e.reference = ReferenceKind::Loynes;
      e.tolerance = 0.005;
      break;
    case ExperimentKind::LoynesCompare:
      e.horizon = 10000;
      e.replicas = 100000;
      e.tolerance = 0.01;
      break;
    case ExperimentKind::Borovkov:
      e.n_grid = {2, 5, 10, 20};
      e.replicas = 100000;
      e.reference = ReferenceKind::Loynes;
      break;
    case ExperimentKind::GeLimit:
      e.alphas = {-0.5, -0.2, 0.2, 0.5};
      e.n = 10;
      e.replicas = 100000;
      break;
  }
}

std::optional<ExperimentSettings> read_experiment(const Reader& root, json& out) {
  const auto r = root.child("experiment", true);
  if (!r) return std::nullopt;
  ExperimentSettings e;
  const auto kind_name = r->string("kind", true);
  std::optional<std::uint64_t> seed;
  if (!r->has("seed")) {
    r->fail("seed", "missing required seed");
  } else if (const auto* node = r->table().get("seed"); node->is_string()) {
    // Seeds above 2^63 - 1 do not fit a TOML integer and are written as decimal strings.
    const auto text = node->value<std::string>().value_or("");
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size() || text.empty())
      r->fail("seed", "must be an unsigned 64-bit integer");
    else
      seed = v;
  } else if (const auto v = r->integer("seed")) {
    if (*v < 0)
      r->fail("seed", "must be >= 0");
    else
      seed = static_cast<std::uint64_t>(*v);
  }
  if (!kind_name) return std::nullopt;
  const auto kind = parse_experiment_kind(*kind_name);
  if (!kind) {
    r->fail("kind", "unknown kind '" + *kind_name +
                        "' (expected simulate, certify, tv-decay, lln, loynes-compare, borovkov, ge-limit)");
    return std::nullopt;
  }
  e.kind = *kind;
  apply_kind_defaults(e);
  auto allowed = kCommonKeys;
  allowed.insert(kKindKeys.at(e.kind).begin(), kKindKeys.at(e.kind).end());
  for (const auto& [key, node] : r->table()) {
    const std::string k(key.str());
    if (!allowed.count(k)) {
      const bool known_elsewhere = std::any_of(kKindKeys.begin(), kKindKeys.end(),
                                               [&](const auto& kv) { return kv.second.count(k) > 0; });
      r->fail(k, known_elsewhere ? "not used by kind '" + *kind_name + "'" : "unknown key");
    }
  }
  if (seed) e.seed = *seed;
  if (auto v = r->string("output")) e.output = *v;

  auto size = [&](const char* key, std::size_t& field, std::size_t minimum) {
    if (const auto v = r->count(key, minimum)) field = *v;
  };
  auto real = [&](const char* key, double& field) {
    if (const auto v = r->number(key)) field = *v;
  };
  auto nonneg = [&](const char* key, double& field) {
    if (const auto v = r->number(key)) {
      if (*v < 0.0)
        r->fail(key, "must be >= 0");
      else
        field = *v;
    }
  };
  auto positive = [&](const char* key, double& field) {
    if (const auto v = r->number(key)) {
      if (!(*v > 0.0))
        r->fail(key, "must be > 0");
      else
        field = *v;
    }
  };
  size("horizon", e.horizon, 1);
  size("replicas", e.replicas, 1);
  size("n_star", e.n_star, 0);
  size("reference_replicas", e.reference_replicas, 2);
  size("loynes_horizon", e.loynes_horizon, 1);
  size("bootstrap", e.bootstrap, 0);
  size("z_points", e.z_points, 1);
  size("w_points", e.w_points, 1);
  size("partitions", e.partitions, 1);
  size("z_samples", e.z_samples, 1);
  size("minorization_w_points", e.minorization_w_points, 2);
  size("alpha_samples", e.alpha_samples, 2);
  size("mc_n", e.mc_n, 1);
  size("mc_replicas", e.mc_replicas, 2);
  size("n", e.n, 1);
  nonneg("w0", e.w0);
  nonneg("threshold", e.threshold);
  positive("tolerance", e.tolerance);
  real("min_r_squared", e.min_r_squared);
  positive("grid_step", e.grid_step);
  positive("beta_cap", e.beta_cap);
  positive("precision", e.precision);
  if (const auto v = r->number("theta")) {
    if (*v > 0.0 && *v < 1.0)
      e.theta = *v;
    else
      r->fail("theta", "must lie in (0, 1)");
  }
  if (const auto v = r->number("H")) {
    if (*v > 0.0)
      e.H = *v;
    else
      r->fail("H", "must be > 0");
  }
  if (const auto v = r->number("z_max")) e.z_max = *v;
  if (const auto v = r->number("w_max")) e.w_max = *v;
  if (r->has("n_grid")) {
    if (const auto v = r->numbers("n_grid")) {
      e.n_grid.clear();
      for (double x : *v) {
        if (x < 1.0 || x != std::floor(x)) {
          r->fail("n_grid", "entries must be positive integers");
          break;
        }
        e.n_grid.push_back(static_cast<std::size_t>(x));
      }
      if (v->empty()) r->fail("n_grid", "must be nonempty");
    }
  }
  if (r->has("alphas")) {
    if (const auto v = r->numbers("alphas")) e.alphas = *v;
  }
  if (const auto v = r->string("reference")) {
    if (*v == "forward")
      e.reference = ReferenceKind::Forward;
    else if (*v == "loynes")
      e.reference = ReferenceKind::Loynes;
    else
      r->fail("reference", "expected 'forward' or 'loynes'");
  }
  if (const auto v = r->string("event")) {
    if (*v == "coupling")
      e.event = BorovkovEvent::Coupling;
    else if (*v == "as_printed")
      e.event = BorovkovEvent::AsPrinted;
    else
      r->fail("event", "expected 'coupling' or 'as_printed'");
  }
  if (const auto v = r->string("alpha_mode")) {
    if (*v == "constant_bounded")
      e.alpha_mode = AlphaMode::ConstantBounded;
    else if (*v == "exponential_unbounded")
      e.alpha_mode = AlphaMode::ExponentialUnbounded;
    else
      r->fail("alpha_mode", "expected 'constant_bounded' or 'exponential_unbounded'");
  }
  if (r->has("fit_exponent")) {
    const auto* node = r->table().get("fit_exponent");
    if (node->is_string() && node->value<std::string>() == "free") {
      e.fit_exponent.reset();
    } else if (const auto v = r->number("fit_exponent")) {
      if (*v > 0.0 && *v <= 1.0)
        e.fit_exponent = *v;
      else
        r->fail("fit_exponent", "must lie in (0, 1] or be \"free\"");
    }
  }

  out["kind"] = to_string(e.kind);
  if (e.seed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
    out["seed"] = std::to_string(e.seed);
  else
    out["seed"] = e.seed;
  out["output"] = e.output;
  const auto& keys = kKindKeys.at(e.kind);
  auto put = [&](const char* key, const json& value) {
    if (keys.count(key)) out[key] = value;
  };
  put("horizon", e.horizon);
  put("replicas", e.replicas);
  put("n_grid", e.n_grid);
  put("w0", e.w0);
  put("threshold", e.threshold);
  put("n_star", e.n_star);
  put("reference", to_string(e.reference));
  put("reference_replicas", e.reference_replicas);
  put("loynes_horizon", e.loynes_horizon);
  put("bootstrap", e.bootstrap);
  put("tolerance", e.tolerance);
  put("fit_exponent", e.fit_exponent ? json(*e.fit_exponent) : json("free"));
  put("min_r_squared", e.min_r_squared);
  put("event", e.event == BorovkovEvent::Coupling ? "coupling" : "as_printed");
  if (e.theta) put("theta", *e.theta);
  if (e.alpha_mode) put("alpha_mode", to_string(*e.alpha_mode));
  if (e.H) put("H", *e.H);
  put("grid_step", e.grid_step);
  put("beta_cap", e.beta_cap);
  put("precision", e.precision);
  put("z_points", e.z_points);
  put("w_points", e.w_points);
  if (e.z_max) put("z_max", *e.z_max);
  if (e.w_max) put("w_max", *e.w_max);
  put("partitions", e.partitions);
  put("z_samples", e.z_samples);
  put("minorization_w_points", e.minorization_w_points);
  put("alpha_samples", e.alpha_samples);
  put("mc_n", e.mc_n);
  put("mc_replicas", e.mc_replicas);
  put("alphas", e.alphas);
  put("n", e.n);
  return e;
}

struct Parsed {
  std::optional<EnvironmentSpec> environment;
  std::optional<ServiceSpec> service;
  std::optional<ExperimentSettings> experiment;
  json resolved;
  std::vector<std::string> violations;
};

Parsed parse(std::string_view text, const std::string& source) {
  toml::table root;
  try {
    root = toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ConfigError(msg.str());
  }
  Parsed p;
  Reader reader(root, "", p.violations);
  for (const auto& [key, node] : root) {
    const std::string k(key.str());
    if (k != "environment" && k != "service" && k != "experiment") p.violations.push_back(k + ": unknown top-level key");
  }
  json env, svc, exp;
  p.environment = read_environment(reader, env);
  p.service = read_service(reader, svc);
  p.experiment = read_experiment(reader, exp);
  p.resolved = {{"environment", env}, {"service", svc}, {"experiment", exp}};
  if (p.environment && p.service && p.experiment) {
    const auto& e = *p.experiment;
    if ((e.kind == ExperimentKind::TvDecay || e.kind == ExperimentKind::Borovkov) && e.replicas < 1000)
      p.violations.push_back("experiment.replicas: must be >= 1000 for the equal-mass bin rule");
    if (e.kind == ExperimentKind::Borovkov) {
      for (std::size_t n : e.n_grid)
        if (n < 2) p.violations.push_back("experiment.n_grid: Borovkov bound needs n >= 2");
    }
    if (e.kind == ExperimentKind::GeLimit && e.replicas < 2)
      p.violations.push_back("experiment.replicas: must be >= 2");
    if (e.kind == ExperimentKind::Lln && e.replicas < 2) p.violations.push_back("experiment.replicas: must be >= 2");
  }
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

ExperimentConfig finish(Parsed p) {
  if (!p.violations.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration:";
    for (const auto& v : p.violations) msg << "\n  - " << v;
    throw ConfigError(msg.str());
  }
  return {QueueModel{std::move(*p.environment), std::move(*p.service)}, std::move(*p.experiment),
          std::move(p.resolved)};
}

}  // namespace

const char* to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames)
    if (k == kind) return name;
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (name == n) return k;
  return std::nullopt;
}

ValidationReport validate_config_text(std::string_view text) { return {parse(text, "<config>").violations}; }

ValidationReport validate_config_file(const std::string& path) { return {parse(read_file(path), path).violations}; }

ExperimentConfig load_config_text(std::string_view text) { return finish(parse(text, "<config>")); }

ExperimentConfig load_config_file(const std::string& path) { return finish(parse(read_file(path), path)); }

namespace {

toml::table toml_table(const json& object, const std::string& where);

toml::array toml_array(const json& array, const std::string& where) {
  toml::array out;
  for (const auto& item : array) {
    if (item.is_array())
      out.push_back(toml_array(item, where));
    else if (item.is_number_integer())
      out.push_back(item.get<std::int64_t>());
    else if (item.is_number())
      out.push_back(item.get<double>());
    else if (item.is_string())
      out.push_back(item.get<std::string>());
    else
      throw ConfigError(where + ": unsupported array entry");
  }
  return out;
}

toml::table toml_table(const json& object, const std::string& where) {
  if (!object.is_object()) throw ConfigError(where + ": expected an object");
  toml::table out;
  for (const auto& [key, value] : object.items()) {
    const std::string path = where + "." + key;
    if (value.is_object())
      out.insert(key, toml_table(value, path));
    else if (value.is_array())
      out.insert(key, toml_array(value, path));
    else if (value.is_boolean())
      out.insert(key, value.get<bool>());
    else if (value.is_number_unsigned() && value.get<std::uint64_t>() > static_cast<std::uint64_t>(
                                                                           std::numeric_limits<std::int64_t>::max()))
      out.insert(key, std::to_string(value.get<std::uint64_t>()));
    else if (value.is_number_integer())
      out.insert(key, value.get<std::int64_t>());
    else if (value.is_number())
      out.insert(key, value.get<double>());
    else if (value.is_string())
      out.insert(key, value.get<std::string>());
    else
      throw ConfigError(path + ": unsupported value");
  }
  return out;
}

}  // namespace

std::string to_toml(const json& resolved) {
  std::ostringstream text;
  text << toml_table(resolved, "config");
  return text.str();
}

ExperimentConfig load_config_json(const json& resolved) { return load_config_text(to_toml(resolved)); }

namespace {

json marginal_json(const Marginal& m) {
  return std::visit(
      [](const auto& law) -> json {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, law::Degenerate>) return {{"law", "degenerate"}, {"value", law.value}};
        if constexpr (std::is_same_v<T, law::Exponential>) return {{"law", "exponential"}, {"rate", law.rate}};
        if constexpr (std::is_same_v<T, law::Uniform>) return {{"law", "uniform"}, {"lo", law.lo}, {"hi", law.hi}};
        if constexpr (std::is_same_v<T, law::TruncatedExponential>)
          return {{"law", "truncated_exponential"}, {"rate", law.rate}, {"bound", law.bound}};
        if constexpr (std::is_same_v<T, law::DoublyExponential>)
          return {{"law", "doubly_exponential"}, {"c2", law.c2}, {"c3", law.c3}};
      },
      m.law());
}

}  // namespace

json to_json(const EnvironmentSpec& env) {
  json out{{"family", to_string(env.family())}};
  switch (env.family()) {
    case EnvironmentFamily::IID:
      out["marginal"] = marginal_json(env.marginal());
      break;
    case EnvironmentFamily::CopulaAR1:
      out["marginal"] = marginal_json(env.marginal());
      out["ar_coefficient"] = env.ar_coefficient();
      break;
    case EnvironmentFamily::MarkovModulated: {
      out["states"] = env.states();
      json rows = json::array();
      for (Eigen::Index i = 0; i < env.transition().rows(); ++i) {
        std::vector<double> row(env.transition().cols());
        for (Eigen::Index j = 0; j < env.transition().cols(); ++j) row[j] = env.transition()(i, j);
        rows.push_back(row);
      }
      out["transition"] = rows;
      out["stationary"] = std::vector<double>(env.stationary().data(), env.stationary().data() + env.stationary().size());
      break;
    }
  }
  return out;
}

json to_json(const ServiceSpec& service) {
  json out = std::visit(
      [](const auto& law) -> json {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, service::Degenerate>) return {{"family", "degenerate"}, {"value", law.value}};
        if constexpr (std::is_same_v<T, service::Exponential>) return {{"family", "exponential"}, {"rate", law.rate}};
        if constexpr (std::is_same_v<T, service::Gamma>)
          return {{"family", "gamma"}, {"shape", law.shape}, {"rate", law.rate}};
        if constexpr (std::is_same_v<T, service::UniformShifted>)
          return {{"family", "uniform_shifted"}, {"lo", law.lo}, {"hi", law.hi}};
        if constexpr (std::is_same_v<T, service::ExponentialMixture>)
          return {{"family", "exponential_mixture"}, {"weights", law.weights}, {"rates", law.rates}};
      },
      service.law());
  out["theorem_mode"] = to_string(service.mode());
  return out;
}

}  // namespace qergo
