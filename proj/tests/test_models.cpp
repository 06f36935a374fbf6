#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "support/modelchecks.hpp"
#include "zskd/error.hpp"
#include "zskd/losses.hpp"
#include "zskd/models.hpp"
#include "zskd/ops.hpp"

using namespace zskd;
using namespace zskd::testing;

TEST_CASE("config validation rejects bad fields") {
  ClassifierConfig c = tiny_classifier_config();
  c.heads = 3;  // 8 % 3 != 0
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = tiny_classifier_config();
  c.layers = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  GeneratorConfig g = tiny_generator_config();
  g.noise_dim = -1;
  CHECK_THROWS_AS(g.validate(), ParameterError);
}

TEST_CASE("soft path on one-hot input reproduces the hard path") {
  RngState rng(61);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  for (int trial = 0; trial < 20; ++trial) {
    TokenBatch batch = tiny_batch(rng, 4, 5, model.config.vocab_size);
    Tensor hard = classify_hard(model, batch);
    Tensor soft = classify_soft(model, one_hot(batch, model.config.vocab_size));
    REQUIRE(hard.shape() == soft.shape());
    for (int64_t i = 0; i < hard.numel(); ++i) {
      CHECK(std::abs(hard.vec()[i] - soft.vec()[i]) <= 1e-9);
    }
  }
}

TEST_CASE("an all-pad batch still yields finite logits") {
  RngState rng(62);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  TokenBatch batch;
  batch.batch = 2;
  batch.len = 5;
  batch.ids.assign(10, kPadId);
  batch.mask.assign(10, 0);
  Tensor logits = classify_hard(model, batch);
  for (double v : logits.vec()) {
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("permuting batch rows permutes logits identically") {
  RngState rng(63);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  TokenBatch batch = tiny_batch(rng, 4, 5, model.config.vocab_size);
  TokenBatch reversed = batch;
  for (int64_t r = 0; r < 4; ++r) {
    for (int64_t i = 0; i < 5; ++i) {
      reversed.ids[static_cast<size_t>(r * 5 + i)] = batch.id_at(3 - r, i);
      reversed.mask[static_cast<size_t>(r * 5 + i)] =
          batch.mask[static_cast<size_t>((3 - r) * 5 + i)];
    }
  }
  Tensor a = classify_hard(model, batch);
  Tensor b = classify_hard(model, reversed);
  for (int64_t r = 0; r < 4; ++r) {
    for (int64_t c = 0; c < model.config.classes; ++c) {
      CHECK(a.vec()[static_cast<size_t>(r * model.config.classes + c)] ==
            b.vec()[static_cast<size_t>((3 - r) * model.config.classes + c)]);
    }
  }
}

TEST_CASE("extra padding never changes the logits") {
  // Pad keys are masked out of attention and pad positions feed nothing
  // into the CLS read-out, so widening the pad tail is invisible.
  RngState rng(64);
  ClassifierConfig config = tiny_classifier_config();
  config.max_len = 8;
  ClassifierModel model = ClassifierModel::init(config, rng);
  std::vector<std::vector<int32_t>> rows = {{kClsId, 7, 9, kSepId},
                                            {kClsId, 5, kSepId}};
  Tensor narrow = classify_hard(model, make_token_batch(rows, {}, 4));
  Tensor wide = classify_hard(model, make_token_batch(rows, {}, 8));
  for (int64_t i = 0; i < narrow.numel(); ++i) {
    CHECK(narrow.vec()[i] ==
          doctest::Approx(wide.vec()[i]).epsilon(1e-12));
  }
}

TEST_CASE("hard path rejects out-of-range ids naming the position") {
  RngState rng(65);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  TokenBatch batch = tiny_batch(rng, 2, 5, model.config.vocab_size);
  batch.ids[7] = 99;
  try {
    classify_hard(model, batch);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    std::string msg = e.what();
    CHECK(msg.find("99") != std::string::npos);
    CHECK(msg.find("7") != std::string::npos);
  }
}

TEST_CASE("uniform simplices classify to finite logits") {
  RngState rng(66);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  int64_t v = model.config.vocab_size;
  SoftBatch soft;
  soft.probs = Tensor::full({2, 5, v}, 1.0 / static_cast<double>(v));
  soft.mask.assign(10, 1);
  Tensor logits = classify_soft(model, soft);
  for (double x : logits.vec()) {
    CHECK(std::isfinite(x));
  }
}

TEST_CASE("soft path rejects simplex violations") {
  RngState rng(67);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  SoftBatch soft;
  soft.probs = Tensor::full({1, 5, model.config.vocab_size}, 0.25);
  soft.mask.assign(5, 1);
  CHECK_THROWS_AS(classify_soft(model, soft), DataError);
}

TEST_CASE("generator output is deterministic and shape-checked") {
  RngState rng(68);
  GeneratorModel gen = GeneratorModel::init(tiny_generator_config(), rng);
  RngState za(5), zb(5);
  Tensor z1 = Tensor::gaussian({3, 5, 4}, 0.01, za);
  Tensor z2 = Tensor::gaussian({3, 5, 4}, 0.01, zb);
  Tensor a = generate_logits(gen, z1);
  Tensor b = generate_logits(gen, z2);
  CHECK(a.vec() == b.vec());
  CHECK(a.shape() == Shape{3, 5, 12});
  Tensor bad = Tensor::zeros({3, 4, 4});
  CHECK_THROWS_AS(generate_logits(gen, bad), DimensionError);
  for (double v : a.vec()) {
    CHECK(std::isfinite(v));
  }
}

TEST_CASE("hard classifier gradients match finite differences") {
  for (uint64_t inst = 0; inst < 2; ++inst) {
    auto result = check_classifier_hard(inst);
    INFO(result.detail);
    CHECK(result.ok);
  }
}

TEST_CASE("soft classifier gradients match finite differences") {
  for (uint64_t inst = 0; inst < 2; ++inst) {
    auto result = check_classifier_soft(inst);
    INFO(result.detail);
    CHECK(result.ok);
  }
}

TEST_CASE("generator gradients match finite differences") {
  for (uint64_t inst = 0; inst < 2; ++inst) {
    auto result = check_generator(inst);
    INFO(result.detail);
    CHECK(result.ok);
  }
}

TEST_CASE("desk presets keep a 20x parameter gap") {
  RngState rng(69);
  ClassifierModel teacher =
      ClassifierModel::init(teacher_preset(192, 3, 16), rng);
  ClassifierModel student =
      ClassifierModel::init(student_preset(192, 3, 16), rng);
  CHECK(teacher.param_count() >= 20 * student.param_count());
}

TEST_CASE("freezing flips requires_grad across all parameters") {
  RngState rng(70);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  model.set_trainable(false);
  for (const Tensor& p : model.parameters()) {
    CHECK_FALSE(p.requires_grad());
  }
  model.set_trainable(true);
  for (const Tensor& p : model.parameters()) {
    CHECK(p.requires_grad());
  }
}

TEST_CASE("a frozen model builds no graph on hard batches") {
  RngState rng(71);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  model.set_trainable(false);
  TokenBatch batch = tiny_batch(rng, 2, 5, model.config.vocab_size);
  Tensor logits = classify_hard(model, batch);
  CHECK_FALSE(logits.has_graph());
}

TEST_CASE("gradient flows through a frozen model into soft inputs") {
  RngState rng(72);
  ClassifierModel model = ClassifierModel::init(tiny_classifier_config(), rng);
  model.set_trainable(false);
  Tensor soft_logits =
      Tensor::gaussian({1, 5, model.config.vocab_size}, 1.0, rng, true);
  SoftBatch soft;
  soft.probs = softmax(soft_logits);
  soft.mask.assign(5, 1);
  Tensor loss = mean_all(mul(classify_soft(model, soft),
                             classify_soft(model, soft)));
  loss.backward();
  REQUIRE(soft_logits.has_grad());
  bool any = false;
  for (double g : soft_logits.grad()) {
    any = any || g != 0.0;
  }
  CHECK(any);
  CHECK_FALSE(model.embedding.has_grad());
}
