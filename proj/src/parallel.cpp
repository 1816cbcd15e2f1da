#include "qergo/parallel.hpp"

namespace qergo {

unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

SampleMoments sample_moments(std::span<const double> values) {
  SampleMoments m;
  if (values.empty()) return m;
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  m.mean = sum.value() / static_cast<double>(values.size());
  if (values.size() < 2) return m;
  CompensatedSum sq;
  for (double v : values) sq.add((v - m.mean) * (v - m.mean));
  m.stdev = std::sqrt(sq.value() / static_cast<double>(values.size() - 1));
  return m;
}

}  // namespace qergo
