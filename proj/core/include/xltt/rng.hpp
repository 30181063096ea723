#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

#include "xltt/tensor.hpp"

namespace xltt {

// Seeded generator with hand-rolled real distributions so that streams are
// identical across standard libraries and can be checkpointed mid-run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without a cached spare, so the engine state alone captures
  // the stream position.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  // Uniform index in [0, n).
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  void fill_uniform(Tensor& t, double lo, double hi) {
    for (double& v : t.values()) v = uniform(lo, hi);
  }

  void fill_normal(Tensor& t, double mean, double stddev) {
    for (double& v : t.values()) v = normal(mean, stddev);
  }

  void save(std::ostream& os) const { os << engine_; }
  void load(std::istream& is) { is >> engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace xltt
