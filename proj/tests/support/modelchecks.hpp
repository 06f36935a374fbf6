#pragma once

// Finite-difference checks of both model forward passes, shared by the
// unit suite and the acceptance suite. Tiny configs keep the central-
// difference sweep affordable; coordinates are subsampled per parameter.

#include "support/gradcheck.hpp"
#include "zskd/losses.hpp"
#include "zskd/models.hpp"
#include "zskd/ops.hpp"

namespace zskd::testing {

inline ClassifierConfig tiny_classifier_config() {
  return {/*vocab_size=*/12, /*max_len=*/5, /*layers=*/2, /*hidden=*/8,
          /*heads=*/2, /*classes=*/3};
}

inline GeneratorConfig tiny_generator_config() {
  return {/*vocab_size=*/12, /*seq_len=*/5, /*noise_dim=*/4, /*layers=*/2,
          /*hidden=*/8, /*heads=*/2};
}

inline TokenBatch tiny_batch(RngState& rng, int64_t batch, int64_t len,
                             int64_t vocab) {
  std::vector<std::vector<int32_t>> rows;
  for (int64_t b = 0; b < batch; ++b) {
    std::vector<int32_t> row = {kClsId};
    int64_t body = 1 + static_cast<int64_t>(rng.below(
                           static_cast<uint64_t>(len - 2)));
    for (int64_t i = 0; i < body; ++i) {
      row.push_back(static_cast<int32_t>(
          kReservedIds + rng.below(static_cast<uint64_t>(vocab - kReservedIds))));
    }
    row.push_back(kSepId);
    rows.push_back(std::move(row));
  }
  return make_token_batch(rows, {}, len);
}

// Loss of the hard classifier path against fixed labels; checked w.r.t.
// every model parameter.
inline GradCheck::Result check_classifier_hard(uint64_t instance) {
  RngState rng(3100 + instance);
  ClassifierModel model =
      ClassifierModel::init(tiny_classifier_config(), rng);
  TokenBatch batch = tiny_batch(rng, 3, 5, model.config.vocab_size);
  std::vector<int32_t> labels = {0, 2, 1};
  GradCheck gc;
  gc.max_coords = 6;
  return gc.run(
      [&] {
        return cross_entropy_with_logits(classify_hard(model, batch), labels);
      },
      model.parameters(), instance);
}

// KL-based loss of the soft path, checked w.r.t. the pre-softmax logits
// that produce the simplices (perturbing raw simplex entries would break
// the simplex contract the op enforces) and w.r.t. model parameters.
inline GradCheck::Result check_classifier_soft(uint64_t instance) {
  RngState rng(3200 + instance);
  ClassifierModel model =
      ClassifierModel::init(tiny_classifier_config(), rng);
  Tensor soft_logits =
      Tensor::gaussian({2, 5, model.config.vocab_size}, 1.0, rng, true);
  Tensor target;
  {
    NoGradGuard guard;
    target = softmax(Tensor::gaussian({2, model.config.classes}, 1.0, rng));
  }
  std::vector<Tensor> leaves = {soft_logits, model.embedding,
                                model.blocks[0].wq, model.head_w};
  GradCheck gc;
  gc.max_coords = 6;
  return gc.run(
      [&] {
        SoftBatch soft;
        soft.probs = softmax(soft_logits);
        soft.mask.assign(10, 1);
        return kl_div(target, softmax(classify_soft(model, soft)));
      },
      leaves, instance);
}

// Generator forward through Gumbel-Softmax into a pretraining-style loss,
// checked w.r.t. every generator parameter.
inline GradCheck::Result check_generator(uint64_t instance) {
  RngState rng(3300 + instance);
  GeneratorModel gen = GeneratorModel::init(tiny_generator_config(), rng);
  Tensor z = Tensor::gaussian({2, 5, 4}, 1.0, rng);
  TokenBatch anchor = tiny_batch(rng, 2, 5, gen.config.vocab_size);
  GradCheck gc;
  gc.max_coords = 6;
  return gc.run(
      [&] {
        RngState sample_rng(500 + instance);
        SoftBatch x_p =
            gumbel_softmax(generate_logits(gen, z), 1.0, sample_rng);
        return pretrain_loss(anchor, x_p);
      },
      gen.parameters(), instance);
}

}  // namespace zskd::testing
