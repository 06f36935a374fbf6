#pragma once

// AdamW with decoupled weight decay, plus the linear-to-zero learning-rate
// schedule every training loop shares.

#include <cstdint>
#include <vector>

#include "zskd/tensor.hpp"

namespace zskd {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class AdamW {
public:
  explicit AdamW(std::vector<Tensor> params, AdamWConfig config = {});

  // One update with the given rate: reads each parameter's accumulated
  // gradient (absent gradients count as zero), then clears them.
  void step(double lr);

  void zero_grad();
  int64_t step_count() const { return t_; }

private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamWConfig config_;
  int64_t t_ = 0;
};

// lr(update t, 1-based) = base * (1 - (t-1)/total); after the final update
// the rate has reached exactly zero. No warmup.
struct LinearDecay {
  double base = 0.0;
  int64_t total = 0;

  double rate_for_update(int64_t t) const;
  double rate_after(int64_t updates_done) const;
};

}  // namespace zskd
