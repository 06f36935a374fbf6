#pragma once

// Learned-merge subword vocabulary. Words are lowercased and split on
// whitespace/punctuation, then represented as character units with a
// word-end marker; frequent adjacent pairs merge during building. Encoding
// is greedy longest-match against the final token set, so a saved vocab
// file is self-contained.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "zskd/batch.hpp"

namespace zskd {

class Vocab {
public:
  int32_t size() const { return static_cast<int32_t>(id_to_token_.size()); }

  // Token id for an exact unit string; kUnkId when absent.
  int32_t id_of(const std::string& token) const;
  const std::string& token_of(int32_t id) const;

  // Sub-word ids for one pre-tokenized word (no whitespace inside).
  std::vector<int32_t> encode_word(const std::string& word) const;

  // Pre-tokenizes (lowercase, whitespace/punctuation split) and encodes.
  std::vector<int32_t> encode(const std::string& text) const;

  // Inverse of encode up to whitespace normalization; reserved structural
  // ids render as their bracketed names, PAD renders as nothing.
  std::string decode(std::span<const int32_t> ids) const;

  // Ids of full-word units: tokens that carry the word-end marker and
  // re-encode to themselves. These are the sampling pool for synthetic
  // tasks, where sampled id sequences must survive a decode/encode trip.
  std::vector<int32_t> word_atoms() const;

  // True when this id closes a word: it carries the word-end marker, or
  // it is the unknown token (which always stands for a whole word).
  bool ends_word(int32_t id) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

  // Lowercase + split into words; punctuation characters become their own
  // words. Exposed because synthesis reuses the same normalization.
  static std::vector<std::string> pre_tokenize(const std::string& text);

  friend Vocab build_vocab(std::istream& corpus, int32_t size, int32_t merges);

private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int32_t> token_to_id_;

  void index_tokens();
};

// Learns a vocabulary from plain text: greedy pair-merge learning up to
// `merges`, then the most frequent units kept up to `size` entries
// (reserved ids first). Deterministic given identical corpus bytes.
Vocab build_vocab(std::istream& corpus, int32_t size, int32_t merges);
Vocab build_vocab_file(const std::string& path, int32_t size, int32_t merges);

}  // namespace zskd
