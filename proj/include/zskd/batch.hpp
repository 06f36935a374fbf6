#pragma once

// Batch containers shared by the data pipeline, the models, and the losses:
// hard token batches (integer ids + attention mask) and soft batches
// (per-position probability simplices over the vocabulary).

#include <cstdint>
#include <vector>

#include "zskd/tensor.hpp"

namespace zskd {

// Reserved vocabulary ids, stable across every vocab this project builds.
inline constexpr int32_t kPadId = 0;
inline constexpr int32_t kClsId = 1;
inline constexpr int32_t kSepId = 2;
inline constexpr int32_t kUnkId = 3;
inline constexpr int32_t kQMarkId = 4;
inline constexpr int32_t kReservedIds = 5;

// A rectangular batch of token ids. `mask` is 1 exactly where a real token
// sits and 0 on padding; `labels` is empty for unlabeled batches.
struct TokenBatch {
  int64_t batch = 0;
  int64_t len = 0;
  std::vector<int32_t> ids;    // row-major [batch * len]
  std::vector<uint8_t> mask;   // row-major [batch * len]
  std::vector<int32_t> labels; // [batch] or empty

  int32_t id_at(int64_t row, int64_t pos) const {
    return ids[static_cast<size_t>(row * len + pos)];
  }
  // Additive attention bias per key position: 0 on real tokens, -1e9 on pads.
  Tensor attention_bias() const;
};

// Builds a batch from per-row id sequences, padding every row to the longest
// one (or to `pad_to` when positive). Mask follows directly from pad ids.
TokenBatch make_token_batch(const std::vector<std::vector<int32_t>>& rows,
                            std::vector<int32_t> labels = {},
                            int64_t pad_to = 0);

// A batch of per-position probability distributions over the vocabulary,
// as produced by Gumbel-Softmax sampling or by one_hot below. Carries the
// same attention mask layout as TokenBatch so padded inputs stay padded
// when consumed through the soft-embedding path.
struct SoftBatch {
  Tensor probs;              // [batch, len, vocab]
  std::vector<uint8_t> mask; // row-major [batch * len]; 1 = real token

  int64_t batch_size() const { return probs.shape()[0]; }
  int64_t seq_len() const { return probs.shape()[1]; }
  Tensor attention_bias() const;
};

// Exact one-hot lift of a hard batch: probs[b, i, ids[b, i]] = 1. The
// companion invariant is that classifying the result through the soft
// path reproduces the hard path's logits.
SoftBatch one_hot(const TokenBatch& batch, int64_t vocab_size);

// Throws DataError if any position of `soft` is not a probability simplex
// (entries >= -1e-6 low side, row sums within 1e-6 of 1).
void check_simplex(const SoftBatch& soft);

}  // namespace zskd
