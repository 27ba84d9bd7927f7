#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace mfuq {

// Deterministic splittable random stream. The (seed, label) pair is hashed
// into a substream seed, so distinct labels give statistically independent
// streams and the same pair always reproduces the same sequence, on any
// platform. Draws use inverse-CDF transforms of the raw 64-bit output, never
// std::*_distribution, to keep sequences implementation-independent.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string_view label);

  std::uint64_t next_u64();

  // Uniform on [0, 1).
  double uniform();

  // Uniform on [lo, hi). Requires lo < hi.
  double uniform(double lo, double hi);

  // Standard normal via inverse CDF.
  double normal();

  double normal(double mean, double stddev);

  // Uniform integer in {0, 1, ..., n - 1}. Requires n > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  // Derived stream for a sub-task; deterministic in (this stream's identity,
  // sublabel) and independent of draw position.
  RngStream split(std::string_view sublabel) const;

  std::uint64_t seed() const { return seed_; }
  const std::string& label() const { return label_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::mt19937_64 engine_;
};

}  // namespace mfuq
