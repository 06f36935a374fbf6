#pragma once

// Transformer encoder classifiers (teacher and student) and the
// noise-conditioned generator, plus the soft-embedding path that lets a
// classifier consume probability simplices instead of token ids.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zskd/batch.hpp"
#include "zskd/rng.hpp"
#include "zskd/tensor.hpp"

namespace zskd {

struct ClassifierConfig {
  int64_t vocab_size = 0;
  int64_t max_len = 0;
  int64_t layers = 0;
  int64_t hidden = 0;
  int64_t heads = 0;
  int64_t classes = 0;

  void validate() const;  // positive fields, hidden divisible by heads
  bool operator==(const ClassifierConfig&) const = default;
};

struct GeneratorConfig {
  int64_t vocab_size = 0;
  int64_t seq_len = 0;
  int64_t noise_dim = 0;
  int64_t layers = 0;
  int64_t hidden = 0;
  int64_t heads = 0;

  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

// Post-norm encoder block: attention + residual + layer norm, then a
// GELU feed-forward (4x expansion) + residual + layer norm.
struct EncoderBlock {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln1_gain, ln1_shift;
  Tensor ff1_w, ff1_b, ff2_w, ff2_b;
  Tensor ln2_gain, ln2_shift;
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

struct ClassifierModel {
  ClassifierConfig config;
  Tensor embedding;   // [vocab, hidden]
  Tensor positional;  // [max_len, hidden]
  Tensor emb_ln_gain, emb_ln_shift;
  std::vector<EncoderBlock> blocks;
  Tensor head_w, head_b;  // [hidden, classes], [classes]

  static ClassifierModel init(const ClassifierConfig& config, RngState& rng);

  NamedParams named_parameters() const;
  std::vector<Tensor> parameters() const;
  void set_trainable(bool on);
  int64_t param_count() const;
};

struct GeneratorModel {
  GeneratorConfig config;
  Tensor in_w, in_b;  // noise projection [noise_dim, hidden]
  Tensor positional;  // [seq_len, hidden]
  std::vector<EncoderBlock> blocks;
  Tensor head_w, head_b;  // [hidden, vocab]

  static GeneratorModel init(const GeneratorConfig& config, RngState& rng);

  NamedParams named_parameters() const;
  std::vector<Tensor> parameters() const;
  void set_trainable(bool on);
  int64_t param_count() const;
};

// Raw class logits [batch, classes] from token ids. Pad positions are
// masked out of attention; the head reads the leading CLS position.
Tensor classify_hard(const ClassifierModel& model, const TokenBatch& batch);

// Same network consuming per-position simplices: each position embeds as
// the probability-weighted mixture of embedding rows, so gradients flow
// back into the probabilities. One-hot inputs reproduce classify_hard.
Tensor classify_soft(const ClassifierModel& model, const SoftBatch& soft);

// Per-position vocabulary logits [batch, seq_len, vocab] from a noise
// batch z [batch, seq_len, noise_dim]. Non-autoregressive: every output
// position attends over the whole noise sequence.
Tensor generate_logits(const GeneratorModel& gen, const Tensor& z);

// Desk-scale presets. The teacher is >= 20x the student in parameters.
ClassifierConfig teacher_preset(int64_t vocab_size, int64_t classes,
                                int64_t max_len);
ClassifierConfig student_preset(int64_t vocab_size, int64_t classes,
                                int64_t max_len);
GeneratorConfig generator_preset(int64_t vocab_size, int64_t seq_len);

}  // namespace zskd
