#include "zskd/batch.hpp"

#include <cmath>
#include <string>

#include "zskd/error.hpp"

namespace zskd {

namespace {

Tensor bias_from_mask(const std::vector<uint8_t>& mask, int64_t batch,
                      int64_t len) {
  std::vector<double> bias(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) {
    bias[i] = mask[i] ? 0.0 : -1e9;
  }
  return Tensor::from_data({batch, len}, std::move(bias));
}

}  // namespace

Tensor TokenBatch::attention_bias() const {
  return bias_from_mask(mask, batch, len);
}

Tensor SoftBatch::attention_bias() const {
  return bias_from_mask(mask, batch_size(), seq_len());
}

TokenBatch make_token_batch(const std::vector<std::vector<int32_t>>& rows,
                            std::vector<int32_t> labels, int64_t pad_to) {
  if (rows.empty()) {
    throw DataError("make_token_batch: empty batch");
  }
  if (!labels.empty() && labels.size() != rows.size()) {
    throw DataError("make_token_batch: " + std::to_string(labels.size()) +
                    " labels for " + std::to_string(rows.size()) + " rows");
  }
  int64_t len = pad_to;
  for (const auto& row : rows) {
    len = std::max<int64_t>(len, static_cast<int64_t>(row.size()));
  }
  if (len <= 0) {
    throw DataError("make_token_batch: all rows empty");
  }
  TokenBatch out;
  out.batch = static_cast<int64_t>(rows.size());
  out.len = len;
  out.ids.assign(static_cast<size_t>(out.batch * len), kPadId);
  out.mask.assign(static_cast<size_t>(out.batch * len), 0);
  for (size_t r = 0; r < rows.size(); ++r) {
    if (static_cast<int64_t>(rows[r].size()) > len) {
      throw DataError("make_token_batch: row " + std::to_string(r) +
                      " longer than pad_to");
    }
    for (size_t i = 0; i < rows[r].size(); ++i) {
      size_t at = r * static_cast<size_t>(len) + i;
      out.ids[at] = rows[r][i];
      out.mask[at] = rows[r][i] == kPadId ? 0 : 1;
    }
  }
  out.labels = std::move(labels);
  return out;
}

SoftBatch one_hot(const TokenBatch& batch, int64_t vocab_size) {
  std::vector<double> probs(
      static_cast<size_t>(batch.batch * batch.len * vocab_size), 0.0);
  for (int64_t i = 0; i < batch.batch * batch.len; ++i) {
    int32_t id = batch.ids[static_cast<size_t>(i)];
    if (id < 0 || id >= vocab_size) {
      throw DataError("one_hot: id " + std::to_string(id) + " at position " +
                      std::to_string(i) + " outside vocab of " +
                      std::to_string(vocab_size));
    }
    probs[static_cast<size_t>(i * vocab_size + id)] = 1.0;
  }
  SoftBatch out;
  out.probs =
      Tensor::from_data({batch.batch, batch.len, vocab_size}, std::move(probs));
  out.mask = batch.mask;
  return out;
}

void check_simplex(const SoftBatch& soft) {
  const Shape& shape = soft.probs.shape();
  if (shape.size() != 3) {
    throw DimensionError("check_simplex: expected [batch, len, vocab], got " +
                         shape_str(shape));
  }
  int64_t vocab = shape[2];
  const std::vector<double>& data = soft.probs.vec();
  int64_t rows = shape[0] * shape[1];
  for (int64_t r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int64_t v = 0; v < vocab; ++v) {
      double p = data[static_cast<size_t>(r * vocab + v)];
      if (p < -1e-6 || !std::isfinite(p)) {
        throw DataError("check_simplex: entry " + std::to_string(p) +
                        " at position " + std::to_string(r));
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw DataError("check_simplex: position " + std::to_string(r) +
                      " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace zskd
