#include "zskd/models.hpp"

#include <cmath>
#include <string>

#include "zskd/error.hpp"
#include "zskd/ops.hpp"

namespace zskd {

namespace {

constexpr double kInitStd = 0.02;
constexpr int64_t kFfExpansion = 4;

void require_positive(int64_t value, const char* name) {
  if (value <= 0) {
    throw ParameterError(std::string(name) + " must be positive, got " +
                         std::to_string(value));
  }
}

EncoderBlock init_block(int64_t hidden, RngState& rng) {
  int64_t ff = hidden * kFfExpansion;
  EncoderBlock b;
  b.wq = Tensor::gaussian({hidden, hidden}, kInitStd, rng, true);
  b.bq = Tensor::zeros({hidden}, true);
  b.wk = Tensor::gaussian({hidden, hidden}, kInitStd, rng, true);
  b.bk = Tensor::zeros({hidden}, true);
  b.wv = Tensor::gaussian({hidden, hidden}, kInitStd, rng, true);
  b.bv = Tensor::zeros({hidden}, true);
  b.wo = Tensor::gaussian({hidden, hidden}, kInitStd, rng, true);
  b.bo = Tensor::zeros({hidden}, true);
  b.ln1_gain = Tensor::full({hidden}, 1.0, true);
  b.ln1_shift = Tensor::zeros({hidden}, true);
  b.ff1_w = Tensor::gaussian({hidden, ff}, kInitStd, rng, true);
  b.ff1_b = Tensor::zeros({ff}, true);
  b.ff2_w = Tensor::gaussian({ff, hidden}, kInitStd, rng, true);
  b.ff2_b = Tensor::zeros({hidden}, true);
  b.ln2_gain = Tensor::full({hidden}, 1.0, true);
  b.ln2_shift = Tensor::zeros({hidden}, true);
  return b;
}

void collect_block(const EncoderBlock& b, const std::string& prefix,
                   NamedParams& out) {
  out.emplace_back(prefix + ".wq", b.wq);
  out.emplace_back(prefix + ".bq", b.bq);
  out.emplace_back(prefix + ".wk", b.wk);
  out.emplace_back(prefix + ".bk", b.bk);
  out.emplace_back(prefix + ".wv", b.wv);
  out.emplace_back(prefix + ".bv", b.bv);
  out.emplace_back(prefix + ".wo", b.wo);
  out.emplace_back(prefix + ".bo", b.bo);
  out.emplace_back(prefix + ".ln1_gain", b.ln1_gain);
  out.emplace_back(prefix + ".ln1_shift", b.ln1_shift);
  out.emplace_back(prefix + ".ff1_w", b.ff1_w);
  out.emplace_back(prefix + ".ff1_b", b.ff1_b);
  out.emplace_back(prefix + ".ff2_w", b.ff2_w);
  out.emplace_back(prefix + ".ff2_b", b.ff2_b);
  out.emplace_back(prefix + ".ln2_gain", b.ln2_gain);
  out.emplace_back(prefix + ".ln2_shift", b.ln2_shift);
}

// One post-norm encoder block over x [B, L, H].
Tensor block_forward(const EncoderBlock& b, const Tensor& x,
                     const Tensor& attn_bias, int64_t heads) {
  int64_t head_dim = x.shape()[2] / heads;
  Tensor q = split_heads(add_bias(linear(x, b.wq), b.bq), heads);
  Tensor k = split_heads(add_bias(linear(x, b.wk), b.bk), heads);
  Tensor v = split_heads(add_bias(linear(x, b.wv), b.bv), heads);
  Tensor scores = scale(bmm(q, k, /*trans_b=*/true),
                        1.0 / std::sqrt(static_cast<double>(head_dim)));
  Tensor att = softmax(add_key_bias(scores, attn_bias, heads));
  Tensor ctx = merge_heads(bmm(att, v), heads);
  Tensor attended = add_bias(linear(ctx, b.wo), b.bo);
  Tensor h = layer_norm(add(x, attended), b.ln1_gain, b.ln1_shift);
  Tensor ff = add_bias(
      linear(gelu(add_bias(linear(h, b.ff1_w), b.ff1_b)), b.ff2_w), b.ff2_b);
  return layer_norm(add(h, ff), b.ln2_gain, b.ln2_shift);
}

Tensor encoder_forward(const std::vector<EncoderBlock>& blocks, Tensor x,
                       const Tensor& attn_bias, int64_t heads) {
  for (const EncoderBlock& b : blocks) {
    x = block_forward(b, x, attn_bias, heads);
  }
  return x;
}

// Shared tail for both classifier input paths.
Tensor classifier_tail(const ClassifierModel& model, Tensor x,
                       const Tensor& attn_bias) {
  x = add_positions(x, model.positional);
  x = layer_norm(x, model.emb_ln_gain, model.emb_ln_shift);
  x = encoder_forward(model.blocks, x, attn_bias, model.config.heads);
  Tensor cls = take_position(x, 0);
  return add_bias(matmul(cls, model.head_w), model.head_b);
}

int64_t count_params(const NamedParams& params) {
  int64_t total = 0;
  for (const auto& [name, p] : params) {
    total += p.numel();
  }
  return total;
}

void set_trainable_all(NamedParams params, bool on) {
  for (auto& [name, p] : params) {
    p.set_requires_grad(on);  // handles share storage with the model
  }
}

}  // namespace

void ClassifierConfig::validate() const {
  require_positive(vocab_size, "vocab_size");
  require_positive(max_len, "max_len");
  require_positive(layers, "layers");
  require_positive(hidden, "hidden");
  require_positive(heads, "heads");
  require_positive(classes, "classes");
  if (hidden % heads != 0) {
    throw ParameterError("hidden " + std::to_string(hidden) +
                         " not divisible by heads " + std::to_string(heads));
  }
}

void GeneratorConfig::validate() const {
  require_positive(vocab_size, "vocab_size");
  require_positive(seq_len, "seq_len");
  require_positive(noise_dim, "noise_dim");
  require_positive(layers, "layers");
  require_positive(hidden, "hidden");
  require_positive(heads, "heads");
  if (hidden % heads != 0) {
    throw ParameterError("hidden " + std::to_string(hidden) +
                         " not divisible by heads " + std::to_string(heads));
  }
}

ClassifierModel ClassifierModel::init(const ClassifierConfig& config,
                                      RngState& rng) {
  config.validate();
  ClassifierModel m;
  m.config = config;
  m.embedding =
      Tensor::gaussian({config.vocab_size, config.hidden}, kInitStd, rng, true);
  m.positional =
      Tensor::gaussian({config.max_len, config.hidden}, kInitStd, rng, true);
  m.emb_ln_gain = Tensor::full({config.hidden}, 1.0, true);
  m.emb_ln_shift = Tensor::zeros({config.hidden}, true);
  for (int64_t i = 0; i < config.layers; ++i) {
    m.blocks.push_back(init_block(config.hidden, rng));
  }
  m.head_w =
      Tensor::gaussian({config.hidden, config.classes}, kInitStd, rng, true);
  m.head_b = Tensor::zeros({config.classes}, true);
  return m;
}

NamedParams ClassifierModel::named_parameters() const {
  NamedParams out;
  out.emplace_back("embedding", embedding);
  out.emplace_back("positional", positional);
  out.emplace_back("emb_ln_gain", emb_ln_gain);
  out.emplace_back("emb_ln_shift", emb_ln_shift);
  for (size_t i = 0; i < blocks.size(); ++i) {
    collect_block(blocks[i], "block" + std::to_string(i), out);
  }
  out.emplace_back("head_w", head_w);
  out.emplace_back("head_b", head_b);
  return out;
}

std::vector<Tensor> ClassifierModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, p] : named_parameters()) {
    out.push_back(p);
  }
  return out;
}

void ClassifierModel::set_trainable(bool on) {
  set_trainable_all(named_parameters(), on);
}

int64_t ClassifierModel::param_count() const {
  return count_params(named_parameters());
}

GeneratorModel GeneratorModel::init(const GeneratorConfig& config,
                                    RngState& rng) {
  config.validate();
  GeneratorModel m;
  m.config = config;
  m.in_w =
      Tensor::gaussian({config.noise_dim, config.hidden}, kInitStd, rng, true);
  m.in_b = Tensor::zeros({config.hidden}, true);
  m.positional =
      Tensor::gaussian({config.seq_len, config.hidden}, kInitStd, rng, true);
  for (int64_t i = 0; i < config.layers; ++i) {
    m.blocks.push_back(init_block(config.hidden, rng));
  }
  m.head_w =
      Tensor::gaussian({config.hidden, config.vocab_size}, kInitStd, rng, true);
  m.head_b = Tensor::zeros({config.vocab_size}, true);
  return m;
}

NamedParams GeneratorModel::named_parameters() const {
  NamedParams out;
  out.emplace_back("in_w", in_w);
  out.emplace_back("in_b", in_b);
  out.emplace_back("positional", positional);
  for (size_t i = 0; i < blocks.size(); ++i) {
    collect_block(blocks[i], "block" + std::to_string(i), out);
  }
  out.emplace_back("head_w", head_w);
  out.emplace_back("head_b", head_b);
  return out;
}

std::vector<Tensor> GeneratorModel::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, p] : named_parameters()) {
    out.push_back(p);
  }
  return out;
}

void GeneratorModel::set_trainable(bool on) {
  set_trainable_all(named_parameters(), on);
}

int64_t GeneratorModel::param_count() const {
  return count_params(named_parameters());
}

Tensor classify_hard(const ClassifierModel& model, const TokenBatch& batch) {
  if (batch.batch <= 0 || batch.len <= 0) {
    throw DataError("classify_hard: empty batch");
  }
  if (batch.len > model.config.max_len) {
    throw DimensionError("classify_hard: sequence length " +
                         std::to_string(batch.len) + " exceeds max_len " +
                         std::to_string(model.config.max_len));
  }
  for (size_t i = 0; i < batch.ids.size(); ++i) {
    if (batch.ids[i] < 0 ||
        static_cast<int64_t>(batch.ids[i]) >= model.config.vocab_size) {
      throw DataError("classify_hard: id " + std::to_string(batch.ids[i]) +
                      " at position " + std::to_string(i) +
                      " outside vocab of " +
                      std::to_string(model.config.vocab_size));
    }
  }
  Tensor x = embedding(model.embedding, batch.ids, {batch.batch, batch.len});
  return classifier_tail(model, x, batch.attention_bias());
}

Tensor classify_soft(const ClassifierModel& model, const SoftBatch& soft) {
  check_simplex(soft);
  const Shape& shape = soft.probs.shape();
  if (shape[2] != model.config.vocab_size) {
    throw DimensionError("classify_soft: simplex width " +
                         std::to_string(shape[2]) + " but vocab is " +
                         std::to_string(model.config.vocab_size));
  }
  if (shape[1] > model.config.max_len) {
    throw DimensionError("classify_soft: sequence length " +
                         std::to_string(shape[1]) + " exceeds max_len " +
                         std::to_string(model.config.max_len));
  }
  // Probability-weighted mixture of embedding rows.
  Tensor x = linear(soft.probs, model.embedding);
  return classifier_tail(model, x, soft.attention_bias());
}

Tensor generate_logits(const GeneratorModel& gen, const Tensor& z) {
  const GeneratorConfig& cfg = gen.config;
  if (z.ndim() != 3 || z.shape()[1] != cfg.seq_len ||
      z.shape()[2] != cfg.noise_dim) {
    throw DimensionError("generate_logits: noise shape " +
                         shape_str(z.shape()) + " does not match [batch, " +
                         std::to_string(cfg.seq_len) + ", " +
                         std::to_string(cfg.noise_dim) + "]");
  }
  Tensor x = add_bias(linear(z, gen.in_w), gen.in_b);
  x = add_positions(x, gen.positional);
  // Every noise position is real: an all-zero additive bias.
  Tensor bias = Tensor::zeros({z.shape()[0], cfg.seq_len});
  x = encoder_forward(gen.blocks, x, bias, cfg.heads);
  return add_bias(linear(x, gen.head_w), gen.head_b);
}

ClassifierConfig teacher_preset(int64_t vocab_size, int64_t classes,
                                int64_t max_len) {
  return {vocab_size, max_len, /*layers=*/4, /*hidden=*/128, /*heads=*/4,
          classes};
}

ClassifierConfig student_preset(int64_t vocab_size, int64_t classes,
                                int64_t max_len) {
  return {vocab_size, max_len, /*layers=*/2, /*hidden=*/32, /*heads=*/2,
          classes};
}

GeneratorConfig generator_preset(int64_t vocab_size, int64_t seq_len) {
  return {vocab_size, seq_len, /*noise_dim=*/16, /*layers=*/2, /*hidden=*/64,
          /*heads=*/2};
}

}  // namespace zskd
