#include "zskd/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "zskd/error.hpp"

namespace zskd {

namespace {

const std::string kEndMark = "</w>";
const char* kVocabHeader = "# zskd-vocab v1";

std::vector<std::string> reserved_tokens() {
  return {"[PAD]", "[CLS]", "[SEP]", "[UNK]", "?" + kEndMark};
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

}  // namespace

std::vector<std::string> Vocab::pre_tokenize(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    if (is_word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else {
      if (!current.empty()) {
        words.push_back(current);
        current.clear();
      }
      if (!std::isspace(c)) {
        words.push_back(std::string(1, static_cast<char>(c)));
      }
    }
  }
  if (!current.empty()) {
    words.push_back(current);
  }
  return words;
}

int32_t Vocab::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token_of(int32_t id) const {
  if (id < 0 || id >= size()) {
    throw DataError("token_of: id " + std::to_string(id) +
                    " outside vocab of " + std::to_string(size()));
  }
  return id_to_token_[static_cast<size_t>(id)];
}

std::vector<int32_t> Vocab::encode_word(const std::string& word) const {
  std::string symbols = word + kEndMark;
  size_t n = symbols.size();
  // feasible[p]: the suffix starting at p can be fully segmented. Greedy
  // then always takes the longest match that leaves a feasible remainder,
  // so a long early match can never strand the tail.
  std::vector<char> feasible(n + 1, 0);
  feasible[n] = 1;
  for (size_t p = n; p-- > 0;) {
    for (size_t len = 1; len <= n - p; ++len) {
      if (feasible[p + len] &&
          token_to_id_.count(symbols.substr(p, len)) != 0) {
        feasible[p] = 1;
        break;
      }
    }
  }
  if (!feasible[0]) {
    return {kUnkId};  // contains a character this vocab never saw
  }
  std::vector<int32_t> out;
  size_t at = 0;
  while (at < n) {
    size_t best_len = 0;
    int32_t best_id = -1;
    for (size_t len = n - at; len >= 1; --len) {
      if (!feasible[at + len]) {
        continue;
      }
      auto it = token_to_id_.find(symbols.substr(at, len));
      if (it != token_to_id_.end()) {
        best_len = len;
        best_id = it->second;
        break;
      }
    }
    out.push_back(best_id);
    at += best_len;
  }
  return out;
}

std::vector<int32_t> Vocab::encode(const std::string& text) const {
  std::vector<int32_t> out;
  for (const std::string& word : pre_tokenize(text)) {
    std::vector<int32_t> ids = encode_word(word);
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string Vocab::decode(std::span<const int32_t> ids) const {
  std::string out;
  bool word_open = false;
  for (int32_t id : ids) {
    if (id == kPadId) {
      continue;
    }
    const std::string& token = token_of(id);
    std::string piece = token;
    bool ends_word = false;
    if (piece.size() >= kEndMark.size() &&
        piece.compare(piece.size() - kEndMark.size(), kEndMark.size(),
                      kEndMark) == 0) {
      piece.resize(piece.size() - kEndMark.size());
      ends_word = true;
    }
    if (!word_open && !out.empty()) {
      out.push_back(' ');
    }
    out += piece;
    word_open = !ends_word && id != kClsId && id != kSepId && id != kUnkId;
  }
  return out;
}

std::vector<int32_t> Vocab::word_atoms() const {
  std::vector<int32_t> out;
  for (int32_t id = kReservedIds; id < size(); ++id) {
    const std::string& token = id_to_token_[static_cast<size_t>(id)];
    if (token.size() <= kEndMark.size() ||
        token.compare(token.size() - kEndMark.size(), kEndMark.size(),
                      kEndMark) != 0) {
      continue;
    }
    std::string word = token.substr(0, token.size() - kEndMark.size());
    std::vector<int32_t> round = encode_word(word);
    if (round.size() == 1 && round[0] == id) {
      out.push_back(id);
    }
  }
  return out;
}

bool Vocab::ends_word(int32_t id) const {
  if (id == kUnkId) {
    return true;
  }
  const std::string& token = token_of(id);
  return token.size() >= kEndMark.size() &&
         token.compare(token.size() - kEndMark.size(), kEndMark.size(),
                       kEndMark) == 0;
}

void Vocab::index_tokens() {
  token_to_id_.clear();
  for (size_t i = 0; i < id_to_token_.size(); ++i) {
    // Reserved structural names stay out of the text-matching index.
    if (i < kReservedIds && i != static_cast<size_t>(kQMarkId)) {
      continue;
    }
    if (!token_to_id_.emplace(id_to_token_[i], static_cast<int32_t>(i))
             .second) {
      throw DataError("vocab entry duplicated: " + id_to_token_[i]);
    }
  }
}

void Vocab::save(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw IoError("cannot open for writing: " + path);
  }
  os << kVocabHeader << "\n";
  for (const std::string& token : id_to_token_) {
    os << token << "\n";
  }
  if (!os) {
    throw IoError("write failed: " + path);
  }
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open: " + path);
  }
  std::string line;
  if (!std::getline(is, line) || line != kVocabHeader) {
    throw IoError("not a zskd vocab file: " + path);
  }
  Vocab vocab;
  while (std::getline(is, line)) {
    vocab.id_to_token_.push_back(line);
  }
  std::vector<std::string> reserved = reserved_tokens();
  if (vocab.id_to_token_.size() < reserved.size()) {
    throw IoError("vocab file lacks reserved entries: " + path);
  }
  for (size_t i = 0; i < reserved.size(); ++i) {
    if (vocab.id_to_token_[i] != reserved[i]) {
      throw IoError("vocab file reserved id " + std::to_string(i) +
                    " holds '" + vocab.id_to_token_[i] + "', expected '" +
                    reserved[i] + "'");
    }
  }
  vocab.index_tokens();
  return vocab;
}

Vocab build_vocab(std::istream& corpus, int32_t size, int32_t merges) {
  if (size <= kReservedIds) {
    throw ParameterError("build_vocab: size must exceed the " +
                         std::to_string(kReservedIds) +
                         " reserved ids, got " + std::to_string(size));
  }
  if (merges < 0) {
    throw ParameterError("build_vocab: merges must be non-negative");
  }

  // Count distinct words over the whole stream.
  std::map<std::string, int64_t> word_counts;  // ordered: deterministic
  std::string line;
  while (std::getline(corpus, line)) {
    for (const std::string& word : Vocab::pre_tokenize(line)) {
      word_counts[word]++;
    }
  }
  if (word_counts.empty()) {
    throw DataError("build_vocab: empty corpus");
  }

  // Each word starts as character units, the last carrying the end mark.
  struct WordUnits {
    std::vector<std::string> units;
    int64_t count;
  };
  std::vector<WordUnits> words;
  for (const auto& [word, count] : word_counts) {
    std::vector<std::string> units;
    for (size_t i = 0; i < word.size(); ++i) {
      units.push_back(std::string(1, word[i]));
    }
    units.back() += kEndMark;
    words.push_back({std::move(units), count});
  }

  // Greedy pair merging: repeatedly fuse the most frequent adjacent pair
  // (lexicographic order breaks ties so identical corpora build
  // identical vocabularies).
  for (int32_t round = 0; round < merges; ++round) {
    std::map<std::pair<std::string, std::string>, int64_t> pair_counts;
    for (const WordUnits& w : words) {
      for (size_t i = 0; i + 1 < w.units.size(); ++i) {
        pair_counts[{w.units[i], w.units[i + 1]}] += w.count;
      }
    }
    auto best = pair_counts.end();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it) {
      if (best == pair_counts.end() || it->second > best->second) {
        best = it;
      }
    }
    if (best == pair_counts.end() || best->second < 2) {
      break;  // nothing left worth merging
    }
    const auto& [left, right] = best->first;
    std::string fused = left + right;
    for (WordUnits& w : words) {
      std::vector<std::string> next;
      for (size_t i = 0; i < w.units.size(); ++i) {
        if (i + 1 < w.units.size() && w.units[i] == left &&
            w.units[i + 1] == right) {
          next.push_back(fused);
          ++i;
        } else {
          next.push_back(w.units[i]);
        }
      }
      w.units = std::move(next);
    }
  }

  // Character alphabet of the corpus: every single-character unit needed
  // to spell any corpus word. Kept ahead of the frequency ranking so
  // rare words always stay encodable.
  std::map<std::string, int64_t> alphabet;  // ordered: deterministic
  for (const auto& [word, count] : word_counts) {
    for (size_t i = 0; i + 1 < word.size(); ++i) {
      alphabet[std::string(1, word[i])] = 1;
    }
    alphabet[std::string(1, word.back()) + kEndMark] = 1;
  }

  // Rank surviving units by frequency (ties lexicographic) and keep the
  // best of them up to `size` entries.
  std::map<std::string, int64_t> unit_counts;
  for (const WordUnits& w : words) {
    for (const std::string& u : w.units) {
      unit_counts[u] += w.count;
    }
  }
  std::vector<std::pair<std::string, int64_t>> ranked(unit_counts.begin(),
                                                      unit_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });

  Vocab vocab;
  vocab.id_to_token_ = reserved_tokens();
  std::string qmark_token = "?" + kEndMark;
  auto push_unit = [&](const std::string& unit) {
    if (static_cast<int32_t>(vocab.id_to_token_.size()) >= size) {
      return;
    }
    if (unit == qmark_token) {
      return;  // already reserved
    }
    if (std::find(vocab.id_to_token_.begin() + kReservedIds,
                  vocab.id_to_token_.end(),
                  unit) != vocab.id_to_token_.end()) {
      return;
    }
    vocab.id_to_token_.push_back(unit);
  };
  for (const auto& [unit, ignored] : alphabet) {
    push_unit(unit);
  }
  for (const auto& [unit, count] : ranked) {
    push_unit(unit);
  }
  vocab.index_tokens();
  return vocab;
}

Vocab build_vocab_file(const std::string& path, int32_t size, int32_t merges) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open: " + path);
  }
  return build_vocab(is, size, merges);
}

}  // namespace zskd
