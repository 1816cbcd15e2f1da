#pragma once

#include <boost/random/exponential_distribution.hpp>
#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cstdint>

namespace qergo {

/// Purpose of a random stream. Streams with different roles never share state.
enum class StreamRole : std::uint32_t {
  Environment = 1,
  Service = 2,
  EnvironmentPast = 3,
  ServicePast = 4,
  ReferenceEnvironment = 5,
  ReferenceService = 6,
  Bootstrap = 7,
  Auxiliary = 8,
};

/// Derives the seed of stream (replica, role) from a master seed.
///
/// Keyed through std::seed_seq, whose output is fixed by the standard, so the
/// derived seeds (and every stream built from them) are identical on every
/// platform and independent of the order in which replicas are evaluated.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica, StreamRole role);

/// A reproducible stream of random variates backed by MT19937-64.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  /// Unit-rate exponential (ziggurat).
  double exponential() { return boost::random::exponential_distribution<double>()(engine_); }

  /// Standard normal (ziggurat).
  double normal() { return boost::random::normal_distribution<double>()(engine_); }

  /// Uniform index in [0, n).
  std::uint64_t index(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  boost::random::mt19937_64 engine_;
};

}  // namespace qergo
