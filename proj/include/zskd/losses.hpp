#pragma once

// Training losses: KL divergence, Gumbel-Softmax sampling, the
// supervised+distillation mixture loss, and the adversarial generator /
// student objectives of the alternating distillation loop.

#include <span>

#include "zskd/batch.hpp"
#include "zskd/rng.hpp"
#include "zskd/tensor.hpp"

namespace zskd {

// Mixing weights for the supervised+distillation loss: alpha weights the
// label cross-entropy term, (1 - alpha) the temperature-smoothed KL to the
// teacher. tau smooths both logit sets in the KL term.
struct KDLossConfig {
  double alpha = 0.2;
  double tau = 2.0;
};

// Mean over leading axes of sum_i p_i * ln(p_i / q_i), with 0*ln(0) = 0 and
// both logs clamped at 1e-12. Inputs are distributions along the last axis.
// Gradients flow into both arguments. Negative entries raise DataError.
Tensor kl_div(const Tensor& p, const Tensor& q);

// Mean over batch and positions of -ln(probs[position, ids[position]]), the
// cross-entropy of hard tokens under per-position distributions (equal to
// the KL from the one-hot, which carries zero entropy). probs is [..., V];
// ids supplies one token per leading position. Probabilities are clamped
// at 1e-12 inside the log.
Tensor nll_positions(const Tensor& probs, std::span<const int32_t> ids);

// Reparameterized categorical relaxation: softmax((logits + g) / tau_g)
// with g = -ln(-ln(u)), u ~ Uniform(0,1). Gradients flow through logits.
// The returned batch has an all-ones mask (every position is generated).
SoftBatch gumbel_softmax(const Tensor& logits, double tau_g, RngState& rng);

// alpha * CE(labels, z_s at T=1) + (1-alpha) * KL(softmax(z_t / tau) ||
// softmax(z_s / tau)). Teacher logits are detached; only the student side
// receives gradients.
Tensor kd_loss(std::span<const int32_t> labels, const Tensor& z_s,
               const Tensor& z_t, const KDLossConfig& cfg);

// The generator's three objectives from one adversarial step.
struct GeneratorLosses {
  Tensor adversarial; // L_A = -KL(teacher || student) on the generated batch
  Tensor fidelity;    // L_F = token cross-entropy of the real batch under x_p
  Tensor total;       // L_T = (L_A + L_F) / 2
};

// t_out and s_out are the softmaxed teacher/student outputs on the generated
// batch x_p; x_k is the real batch the fidelity term anchors to. Both model
// outputs stay in the graph — the models' parameters are frozen during the
// adversarial step, so all gradient reaching them flows onward into x_p.
GeneratorLosses adv_generator_loss(const Tensor& t_out, const Tensor& s_out,
                                   const TokenBatch& x_k, const SoftBatch& x_p);

// alpha * KL(t_gen || s_gen) + (1-alpha) * KL(t_ood || s_ood) over softmaxed
// class distributions. Teacher outputs are detached.
Tensor student_distill_loss(const Tensor& t_gen, const Tensor& s_gen,
                            const Tensor& t_ood, const Tensor& s_ood,
                            double alpha);

// Generator pre-training objective: cross-entropy of the real batch's tokens
// under the generated distributions. Identical contract to the fidelity term.
Tensor pretrain_loss(const TokenBatch& x_k, const SoftBatch& x_p);

}  // namespace zskd
