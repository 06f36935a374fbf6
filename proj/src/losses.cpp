#include "zskd/losses.hpp"

#include <cmath>
#include <string>

#include "zskd/error.hpp"
#include "zskd/ops.hpp"

namespace zskd {

namespace {

constexpr double kProbFloor = 1e-12;

double clamped_log(double p) { return std::log(std::max(p, kProbFloor)); }

void check_last_axis_pair(const Tensor& p, const Tensor& q, const char* what) {
  if (p.shape() != q.shape()) {
    throw DimensionError(std::string(what) + ": shapes differ, " +
                         shape_str(p.shape()) + " vs " + shape_str(q.shape()));
  }
  if (p.ndim() < 1) {
    throw DimensionError(std::string(what) + ": need at least one axis");
  }
}

}  // namespace

Tensor kl_div(const Tensor& p, const Tensor& q) {
  check_last_axis_pair(p, q, "kl_div");
  int64_t classes = p.shape()[p.ndim() - 1];
  int64_t rows = p.numel() / classes;
  const std::vector<double>& pd = p.vec();
  const std::vector<double>& qd = q.vec();
  double total = 0.0;
  for (int64_t i = 0; i < p.numel(); ++i) {
    double pv = pd[static_cast<size_t>(i)];
    double qv = qd[static_cast<size_t>(i)];
    if (pv < 0.0 || qv < 0.0) {
      throw DataError("kl_div: negative entry at flat index " +
                      std::to_string(i));
    }
    if (pv > 0.0) {
      total += pv * (clamped_log(pv) - clamped_log(qv));
    }
  }
  double inv_rows = 1.0 / static_cast<double>(rows);
  return make_op_result({1}, {total * inv_rows}, {p, q},
                        [inv_rows](TensorNode& self) {
    double g = self.grad[0] * inv_rows;
    TensorNode& pn = *self.parents[0];
    TensorNode& qn = *self.parents[1];
    for (size_t i = 0; i < pn.data.size(); ++i) {
      double pv = pn.data[i];
      double qv = qn.data[i];
      if (pn.needs_grad()) {
        double d = pv > 0.0 ? clamped_log(pv) - clamped_log(qv) + 1.0 : 0.0;
        pn.grad[i] += g * d;
      }
      if (qn.needs_grad()) {
        qn.grad[i] += -g * pv / std::max(qv, kProbFloor);
      }
    }
  });
}

Tensor nll_positions(const Tensor& probs, std::span<const int32_t> ids) {
  if (probs.ndim() < 2) {
    throw DimensionError("nll_positions: probs must be at least 2-D, got " +
                         shape_str(probs.shape()));
  }
  int64_t vocab = probs.shape()[probs.ndim() - 1];
  int64_t positions = probs.numel() / vocab;
  if (static_cast<int64_t>(ids.size()) != positions) {
    throw DimensionError("nll_positions: " + std::to_string(ids.size()) +
                         " ids for " + std::to_string(positions) +
                         " positions");
  }
  const std::vector<double>& pd = probs.vec();
  double total = 0.0;
  for (int64_t i = 0; i < positions; ++i) {
    int32_t id = ids[static_cast<size_t>(i)];
    if (id < 0 || static_cast<int64_t>(id) >= vocab) {
      throw DataError("nll_positions: id " + std::to_string(id) +
                      " at position " + std::to_string(i) +
                      " outside vocab of " + std::to_string(vocab));
    }
    total -= clamped_log(pd[static_cast<size_t>(i * vocab + id)]);
  }
  double inv_n = 1.0 / static_cast<double>(positions);
  std::vector<int32_t> saved_ids(ids.begin(), ids.end());
  return make_op_result(
      {1}, {total * inv_n}, {probs},
      [inv_n, saved_ids = std::move(saved_ids), vocab](TensorNode& self) {
        TensorNode& pn = *self.parents[0];
        if (!pn.needs_grad()) {
          return;
        }
        double g = self.grad[0] * inv_n;
        for (size_t i = 0; i < saved_ids.size(); ++i) {
          size_t at = i * static_cast<size_t>(vocab) +
                      static_cast<size_t>(saved_ids[i]);
          double pv = pn.data[at];
          if (pv > kProbFloor) {
            pn.grad[at] += -g / pv;
          }
        }
      });
}

SoftBatch gumbel_softmax(const Tensor& logits, double tau_g, RngState& rng) {
  if (tau_g <= 0.0) {
    throw ParameterError("gumbel_softmax: tau_g must be positive, got " +
                         std::to_string(tau_g));
  }
  if (logits.ndim() < 2) {
    throw DimensionError("gumbel_softmax: logits must be at least 2-D, got " +
                         shape_str(logits.shape()));
  }
  std::vector<double> noise(static_cast<size_t>(logits.numel()));
  for (double& g : noise) {
    // uniform_open can return exactly 1, where -ln(-ln(u)) is infinite;
    // the floor keeps the draw large-but-finite.
    double inner = std::max(-std::log(rng.uniform_open()), 1e-300);
    g = -std::log(inner);
  }
  Tensor gumbel = Tensor::from_data(logits.shape(), std::move(noise));
  SoftBatch out;
  out.probs = softmax(add(logits, gumbel), tau_g);
  int64_t vocab = logits.shape()[logits.ndim() - 1];
  out.mask.assign(static_cast<size_t>(logits.numel() / vocab), 1);
  return out;
}

Tensor kd_loss(std::span<const int32_t> labels, const Tensor& z_s,
               const Tensor& z_t, const KDLossConfig& cfg) {
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) {
    throw ParameterError("kd_loss: alpha must lie in [0,1], got " +
                         std::to_string(cfg.alpha));
  }
  if (cfg.tau <= 0.0) {
    throw ParameterError("kd_loss: tau must be positive, got " +
                         std::to_string(cfg.tau));
  }
  if (z_s.shape() != z_t.shape()) {
    throw DimensionError("kd_loss: logit shapes differ, " +
                         shape_str(z_s.shape()) + " vs " +
                         shape_str(z_t.shape()));
  }
  Tensor label_term = cross_entropy_with_logits(z_s, labels);
  Tensor distill_term =
      kl_div(softmax(z_t.detach(), cfg.tau), softmax(z_s, cfg.tau));
  return add(scale(label_term, cfg.alpha),
             scale(distill_term, 1.0 - cfg.alpha));
}

GeneratorLosses adv_generator_loss(const Tensor& t_out, const Tensor& s_out,
                                   const TokenBatch& x_k,
                                   const SoftBatch& x_p) {
  if (x_p.batch_size() != x_k.batch || x_p.seq_len() != x_k.len) {
    throw ContractError("adv_generator_loss: generated batch is " +
                        shape_str(x_p.probs.shape()) + " but the real batch is " +
                        std::to_string(x_k.batch) + "x" +
                        std::to_string(x_k.len));
  }
  GeneratorLosses out;
  out.adversarial = scale(kl_div(t_out, s_out), -1.0);
  out.fidelity = nll_positions(x_p.probs, x_k.ids);
  out.total = scale(add(out.adversarial, out.fidelity), 0.5);
  return out;
}

Tensor student_distill_loss(const Tensor& t_gen, const Tensor& s_gen,
                            const Tensor& t_ood, const Tensor& s_ood,
                            double alpha) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw ParameterError("student_distill_loss: alpha must lie in [0,1], got " +
                         std::to_string(alpha));
  }
  Tensor gen_term = kl_div(t_gen.detach(), s_gen);
  Tensor ood_term = kl_div(t_ood.detach(), s_ood);
  return add(scale(gen_term, alpha), scale(ood_term, 1.0 - alpha));
}

Tensor pretrain_loss(const TokenBatch& x_k, const SoftBatch& x_p) {
  if (x_p.batch_size() != x_k.batch || x_p.seq_len() != x_k.len) {
    throw ContractError("pretrain_loss: generated batch is " +
                        shape_str(x_p.probs.shape()) + " but the real batch is " +
                        std::to_string(x_k.batch) + "x" +
                        std::to_string(x_k.len));
  }
  return nll_positions(x_p.probs, x_k.ids);
}

}  // namespace zskd
