#include "zskd/rng.hpp"

#include <cmath>
#include <numbers>

#include "zskd/error.hpp"

namespace zskd {

namespace {

// splitmix64 finalizer; full avalanche, so consecutive counters give
// statistically independent words.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

uint64_t RngState::next_u64() {
  uint64_t word = mix64(seed_ ^ mix64(counter_));
  ++counter_;
  return word;
}

double RngState::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform_open() { return 1.0 - uniform(); }

uint64_t RngState::below(uint64_t n) {
  if (n == 0) throw ParameterError("RngState::below: n must be positive");
  // Rejection sampling over the top multiple of n keeps the draw unbiased.
  uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t word;
  do {
    word = next_u64();
  } while (word >= limit);
  return word % n;
}

double RngState::gaussian(double std_dev) {
  if (std_dev <= 0.0) {
    throw ParameterError("RngState::gaussian: std must be positive");
  }
  // Box-Muller, cosine branch only: two ticks per draw keeps the state a
  // pure (seed, counter) pair with no cached spare.
  double u1 = uniform_open();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return std_dev * r * std::cos(2.0 * std::numbers::pi * u2);
}

void RngState::fill_gaussian(double* out, size_t n, double std_dev) {
  for (size_t i = 0; i < n; ++i) out[i] = gaussian(std_dev);
}

RngState RngState::substream(std::string_view name) const {
  return RngState(mix64(seed_ ^ fnv1a(name)));
}

RngState RngState::substream(uint64_t index) const {
  return RngState(mix64(seed_ ^ mix64(index + 0x51ed2701)));
}

}  // namespace zskd
