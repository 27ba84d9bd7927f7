#include "mfuq/rng.hpp"

#include "mfuq/errors.hpp"
#include "mfuq/stats.hpp"

namespace mfuq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t substream_seed(std::uint64_t seed, std::string_view label) {
  return splitmix64(splitmix64(seed) ^ fnv1a64(label));
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view label)
    : seed_(seed), label_(label), engine_(substream_seed(seed, label)) {}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) {
  if (!(lo < hi)) throw DomainError("uniform(lo, hi): requires lo < hi");
  return lo + (hi - lo) * uniform();
}

double RngStream::normal() {
  // Offset by 1/2 ulp so u is strictly inside (0, 1).
  double u = (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  return standard_normal_icdf(u);
}

double RngStream::normal(double mean, double stddev) {
  if (stddev < 0.0) throw DomainError("normal(mean, stddev): negative stddev");
  return mean + stddev * normal();
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw DomainError("uniform_index: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

RngStream RngStream::split(std::string_view sublabel) const {
  return RngStream(substream_seed(seed_, label_),
                   std::string(label_) + "/" + std::string(sublabel));
}

}  // namespace mfuq
