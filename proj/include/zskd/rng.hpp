#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace zskd {

// Counter-based pseudo random stream. A draw is a pure function of
// (seed, counter), so state is two integers and streams can be split,
// saved and replayed exactly. Normal draws use Box-Muller on top of the
// uniform stream and always consume a fixed number of counter ticks.
class RngState {
public:
  RngState() : RngState(0) {}
  explicit RngState(uint64_t seed, uint64_t counter = 0)
      : seed_(seed), counter_(counter) {}

  uint64_t seed() const { return seed_; }
  uint64_t counter() const { return counter_; }

  // Next raw 64-bit word.
  uint64_t next_u64();

  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();

  // Uniform in (0, 1]; never returns 0 (safe for log()).
  double uniform_open();

  // Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n);

  // One N(0, std^2) draw. Consumes exactly two counter ticks.
  double gaussian(double std_dev);

  void fill_gaussian(double* out, size_t n, double std_dev);

  // Fisher-Yates shuffle driven by this stream.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Independent child stream derived from this stream's seed and a label.
  // Used to hand out per-purpose streams (teacher/gen/ood/distill) from
  // one experiment seed.
  RngState substream(std::string_view name) const;

  // Independent child stream by index (per-cell seeds in sweeps).
  RngState substream(uint64_t index) const;

private:
  uint64_t seed_;
  uint64_t counter_;
};

}  // namespace zskd
