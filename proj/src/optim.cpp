#include "zskd/optim.hpp"

#include <cmath>
#include <string>

#include "zskd/error.hpp"

namespace zskd {

AdamW::AdamW(std::vector<Tensor> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  if (params_.empty()) {
    throw ParameterError("AdamW: no parameters");
  }
  for (const Tensor& p : params_) {
    m_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
    v_.emplace_back(static_cast<size_t>(p.numel()), 0.0);
  }
}

void AdamW::step(double lr) {
  t_++;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const double* g = p.has_grad() ? p.grad().data() : nullptr;
    double* w = p.data();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t j = 0; j < m.size(); ++j) {
      double gj = g ? g[j] : 0.0;
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * gj;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * gj * gj;
      double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + config_.eps);
      w[j] -= lr * (update + config_.weight_decay * w[j]);
    }
  }
  zero_grad();
}

void AdamW::zero_grad() {
  for (Tensor& p : params_) {
    p.zero_grad();
  }
}

double LinearDecay::rate_for_update(int64_t t) const {
  if (total <= 0) {
    throw ParameterError("LinearDecay: total must be positive, got " +
                         std::to_string(total));
  }
  if (t < 1 || t > total) {
    throw ParameterError("LinearDecay: update index " + std::to_string(t) +
                         " outside 1.." + std::to_string(total));
  }
  return base * (1.0 - static_cast<double>(t - 1) / static_cast<double>(total));
}

double LinearDecay::rate_after(int64_t updates_done) const {
  if (total <= 0) {
    throw ParameterError("LinearDecay: total must be positive, got " +
                         std::to_string(total));
  }
  double frac = 1.0 - static_cast<double>(updates_done) /
                          static_cast<double>(total);
  return base * std::max(frac, 0.0);
}

}  // namespace zskd
