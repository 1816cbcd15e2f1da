#include "qergo/rng.hpp"

#include <array>
#include <random>

namespace qergo {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replica, StreamRole role) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32),
                    static_cast<std::uint32_t>(role)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace qergo
