#include "zskd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "zskd/error.hpp"

namespace zskd {

const char* const kOodProvenance = "synthesized-from-corpus";

namespace {

const char* kDatasetHeader = "# zskd-dataset v1";
const char* kTaskOrigin = "task";

constexpr int64_t kMaxSynthAttempts = 10000;

const std::vector<std::string>& question_words() {
  static const std::vector<std::string> words = {"who",  "where", "what",
                                                 "when", "why",   "how"};
  return words;
}

// The id a word maps to when the vocabulary holds it whole; -1 otherwise.
int32_t single_token_id(const Vocab& vocab, const std::string& word) {
  std::vector<int32_t> ids = vocab.encode_word(word);
  if (ids.size() != 1 || ids[0] == kUnkId) {
    return -1;
  }
  return ids[0];
}

// Re-encode through text so stored ids always match what loading the
// saved text form will produce.
std::vector<int32_t> canonicalize(const std::vector<int32_t>& ids,
                                  const Vocab& vocab) {
  return vocab.encode(vocab.decode(ids));
}

std::vector<int32_t> sorted_unique(std::span<const int32_t> ids) {
  std::vector<int32_t> v(ids.begin(), ids.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool contains_id(std::span<const int32_t> ids, int32_t id) {
  return std::find(ids.begin(), ids.end(), id) != ids.end();
}

// Is `needle` a contiguous run inside `hay`?
bool contiguous_in(std::span<const int32_t> needle,
                   std::span<const int32_t> hay) {
  if (needle.empty() || needle.size() > hay.size()) {
    return false;
  }
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) !=
         hay.end();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// --- Corpus ingestion -----------------------------------------------------

Corpus parse_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::string block;
  auto flush_block = [&] {
    if (block.empty()) {
      return;
    }
    std::vector<std::string> sentences;
    std::string current;
    for (char c : block) {
      if (c == '.' || c == '!' || c == '?') {
        // Sentence boundary; the terminal mark itself is dropped.
        while (!current.empty() && current.back() == ' ') current.pop_back();
        if (!current.empty()) {
          sentences.push_back(current);
        }
        current.clear();
      } else if (c == '\n' || c == '\t') {
        if (!current.empty() && current.back() != ' ') current.push_back(' ');
      } else {
        if (c == ' ' && (current.empty() || current.back() == ' ')) continue;
        current.push_back(c);
      }
    }
    while (!current.empty() && current.back() == ' ') current.pop_back();
    if (!current.empty()) {
      sentences.push_back(current);
    }
    if (!sentences.empty()) {
      for (const std::string& s : sentences) {
        corpus.sentences.push_back(s);
      }
      corpus.paragraphs.push_back(std::move(sentences));
    }
    block.clear();
  };
  while (std::getline(in, line)) {
    bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
    if (blank) {
      flush_block();
    } else {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      block += line;
      block += '\n';
    }
  }
  flush_block();
  return corpus;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open: " + path);
  }
  return parse_corpus(is);
}

TokenCorpus tokenize_corpus(const Corpus& corpus, const Vocab& vocab) {
  TokenCorpus tc;
  for (const auto& paragraph : corpus.paragraphs) {
    size_t begin = tc.sentences.size();
    for (const std::string& sentence : paragraph) {
      std::vector<int32_t> ids = vocab.encode(sentence);
      if (!ids.empty()) {
        tc.sentences.push_back(std::move(ids));
      }
    }
    size_t end = tc.sentences.size();
    if (end > begin) {
      tc.paragraphs.emplace_back(begin, end);
    }
  }
  return tc;
}

std::vector<int32_t> TokenCorpus::paragraph_tokens(size_t p) const {
  if (p >= paragraphs.size()) {
    throw DataError("paragraph index " + std::to_string(p) +
                    " outside corpus of " + std::to_string(paragraphs.size()));
  }
  std::vector<int32_t> out;
  for (size_t s = paragraphs[p].first; s < paragraphs[p].second; ++s) {
    out.insert(out.end(), sentences[s].begin(), sentences[s].end());
  }
  return out;
}

// --- Task kinds -----------------------------------------------------------

const char* to_string(OodTaskKind kind) {
  switch (kind) {
    case OodTaskKind::SingleSentence: return "single";
    case OodTaskKind::NliPair: return "nli";
    case OodTaskKind::ParaphrasePair: return "paraphrase";
    case OodTaskKind::QuestionParagraph: return "question";
  }
  throw ContractError("unknown task kind value");
}

OodTaskKind task_kind_from_string(const std::string& name) {
  if (name == "single") return OodTaskKind::SingleSentence;
  if (name == "nli") return OodTaskKind::NliPair;
  if (name == "paraphrase") return OodTaskKind::ParaphrasePair;
  if (name == "question") return OodTaskKind::QuestionParagraph;
  throw DataError("unknown task kind '" + name +
                  "' (expected single|nli|paraphrase|question)");
}

int32_t classes_for(OodTaskKind kind) {
  return kind == OodTaskKind::NliPair ? 3 : 2;
}

// --- Unlabeled synthesis --------------------------------------------------

void perturb_tokens(std::vector<int32_t>& tokens,
                    std::span<const int32_t> replacement_pool, RngState& rng,
                    double edit_rate, double budget_fraction) {
  if (tokens.empty()) {
    return;
  }
  int64_t budget = static_cast<int64_t>(
      std::ceil(budget_fraction * static_cast<double>(tokens.size())));
  int64_t edits = 0;
  size_t i = 0;
  while (i < tokens.size() && edits < budget) {
    if (rng.uniform() >= edit_rate) {
      ++i;
      continue;
    }
    uint64_t op = rng.below(3);
    if (op == 0 && tokens.size() > 1) {
      tokens.erase(tokens.begin() + static_cast<int64_t>(i));
      ++edits;
      continue;  // the next token slides into position i
    }
    if (op == 1 && i + 1 < tokens.size()) {
      std::swap(tokens[i], tokens[i + 1]);
      ++edits;
      i += 2;  // leave the swapped pair alone
      continue;
    }
    if (op == 2 && !replacement_pool.empty()) {
      tokens[i] = replacement_pool[rng.below(replacement_pool.size())];
      ++edits;
    }
    ++i;
  }
}

std::vector<Example> synth_single(const TokenCorpus& corpus, int64_t n,
                                  RngState& rng) {
  if (corpus.sentences.empty()) {
    throw DataError("synthesis needs a corpus with at least one sentence");
  }
  std::vector<Example> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Example ex;
    ex.seg1 = corpus.sentences[rng.below(corpus.sentences.size())];
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> synth_pair(const TokenCorpus& corpus, const Vocab& vocab,
                                int64_t n, double p_perturb, OodTaskKind kind,
                                RngState& rng) {
  if (corpus.sentences.empty()) {
    throw DataError("synthesis needs a corpus with at least one sentence");
  }
  if (p_perturb < 0.0 || p_perturb > 1.0) {
    throw ParameterError("p_perturb must lie in [0, 1], got " +
                         std::to_string(p_perturb));
  }
  if (kind != OodTaskKind::NliPair && kind != OodTaskKind::ParaphrasePair) {
    throw ContractError("synth_pair handles nli and paraphrase kinds only");
  }
  std::vector<int32_t> pool = vocab.word_atoms();
  std::vector<Example> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Example ex;
    ex.seg1 = corpus.sentences[rng.below(corpus.sentences.size())];
    if (rng.uniform() < p_perturb) {
      ex.seg2 = ex.seg1;
      perturb_tokens(ex.seg2, pool, rng);
      ex.seg2 = canonicalize(ex.seg2, vocab);
    } else {
      ex.seg2 = corpus.sentences[rng.below(corpus.sentences.size())];
    }
    if (kind == OodTaskKind::ParaphrasePair) {
      ex.seg1.push_back(kQMarkId);
      ex.seg2.push_back(kQMarkId);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> synth_question(const TokenCorpus& corpus,
                                    const Vocab& vocab, int64_t n,
                                    RngState& rng) {
  if (corpus.paragraphs.empty()) {
    throw DataError("synthesis needs a corpus with at least one paragraph");
  }
  std::vector<int32_t> qword_ids;
  for (const std::string& word : question_words()) {
    int32_t id = single_token_id(vocab, word);
    if (id < 0) {
      throw DataError("vocabulary must hold question word '" + word +
                      "' as a single token");
    }
    qword_ids.push_back(id);
  }
  std::vector<Example> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    Example ex;
    size_t p = rng.below(corpus.paragraphs.size());
    ex.seg2 = corpus.paragraph_tokens(p);
    std::vector<int32_t> segment;
    if (rng.uniform() < 0.5) {
      // A contiguous word-aligned span from inside this paragraph; word
      // alignment keeps the span a verbatim run of the paragraph even
      // after a save/load round trip through text.
      std::vector<size_t> word_ends;
      for (size_t t = 0; t < ex.seg2.size(); ++t) {
        if (vocab.ends_word(ex.seg2[t])) {
          word_ends.push_back(t + 1);
        }
      }
      size_t words = word_ends.size();
      size_t span_words = 1 + rng.below(std::min<size_t>(3, words));
      size_t start_word = rng.below(words - span_words + 1);
      size_t begin = start_word == 0 ? 0 : word_ends[start_word - 1];
      size_t end = word_ends[start_word + span_words - 1];
      segment.assign(ex.seg2.begin() + static_cast<int64_t>(begin),
                     ex.seg2.begin() + static_cast<int64_t>(end));
    } else {
      segment = corpus.sentences[rng.below(corpus.sentences.size())];
    }
    ex.seg1.push_back(qword_ids[rng.below(qword_ids.size())]);
    ex.seg1.insert(ex.seg1.end(), segment.begin(), segment.end());
    ex.seg1.push_back(kQMarkId);
    ex.seg1 = canonicalize(ex.seg1, vocab);
    out.push_back(std::move(ex));
  }
  return out;
}

OodDataset synth_ood(const TokenCorpus& corpus, const Vocab& vocab,
                     OodTaskKind kind, int64_t n, double p_perturb,
                     RngState& rng) {
  OodDataset data;
  data.kind_ = kind;
  data.provenance_ = kOodProvenance;
  switch (kind) {
    case OodTaskKind::SingleSentence:
      data.examples_ = synth_single(corpus, n, rng);
      break;
    case OodTaskKind::NliPair:
    case OodTaskKind::ParaphrasePair:
      data.examples_ = synth_pair(corpus, vocab, n, p_perturb, kind, rng);
      break;
    case OodTaskKind::QuestionParagraph:
      data.examples_ = synth_question(corpus, vocab, n, rng);
      break;
  }
  return data;
}

void OodDataset::set_teacher_probs(size_t index, std::vector<double> probs) {
  if (index >= examples_.size()) {
    throw DataError("example index " + std::to_string(index) +
                    " outside dataset of " + std::to_string(examples_.size()));
  }
  if (probs.empty()) {
    throw DataError("teacher distribution must be non-empty");
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) {
      throw DataError("teacher distribution has a negative or NaN entry");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw DataError("teacher distribution sums to " + std::to_string(sum));
  }
  examples_[index].teacher_probs = std::move(probs);
}

// --- Rule-labeled tasks ---------------------------------------------------

double token_overlap(std::span<const int32_t> hypothesis,
                     std::span<const int32_t> premise) {
  std::vector<int32_t> h = sorted_unique(hypothesis);
  if (h.empty()) {
    return 0.0;
  }
  std::vector<int32_t> p = sorted_unique(premise);
  size_t shared = 0;
  size_t i = 0, j = 0;
  while (i < h.size() && j < p.size()) {
    if (h[i] == p[j]) {
      ++shared;
      ++i;
      ++j;
    } else if (h[i] < p[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  return static_cast<double>(shared) / static_cast<double>(h.size());
}

int32_t TaskRule::label_of(const Example& example) const {
  switch (kind) {
    case OodTaskKind::SingleSentence: {
      double sum = 0.0;
      for (int32_t id : example.seg1) {
        if (id < 0 || id >= static_cast<int32_t>(token_weights.size())) {
          throw DataError("token id " + std::to_string(id) +
                          " outside the rule's weight table");
        }
        sum += token_weights[static_cast<size_t>(id)];
      }
      return sum > 0.0 ? 1 : 0;
    }
    case OodTaskKind::NliPair: {
      if (contains_id(example.seg2, negation_id)) {
        return 2;  // contradiction
      }
      return token_overlap(example.seg2, example.seg1) >= overlap_threshold
                 ? 0   // entailment
                 : 1;  // neutral
    }
    case OodTaskKind::ParaphrasePair:
      return token_overlap(example.seg2, example.seg1) >= overlap_threshold
                 ? 1
                 : 0;
    case OodTaskKind::QuestionParagraph: {
      std::span<const int32_t> q(example.seg1);
      if (!q.empty()) {
        q = q.subspan(1);  // drop the question word
      }
      if (!q.empty() && q.back() == kQMarkId) {
        q = q.first(q.size() - 1);
      }
      return contiguous_in(q, example.seg2) ? 1 : 0;
    }
  }
  throw ContractError("unknown task kind value");
}

namespace {

// Atom ids usable as task content: full-word tokens minus the ids the
// rules give structural meaning to.
std::vector<int32_t> task_atom_pool(const Vocab& vocab, int32_t negation_id,
                                    std::span<const int32_t> qword_ids) {
  std::vector<int32_t> pool;
  for (int32_t id : vocab.word_atoms()) {
    if (id == negation_id || contains_id(qword_ids, id)) {
      continue;
    }
    pool.push_back(id);
  }
  if (pool.size() < 16) {
    throw DataError("vocabulary yields only " + std::to_string(pool.size()) +
                    " usable word atoms; task synthesis needs at least 16");
  }
  return pool;
}

// Natural text is zipfian, and unit ids follow merge creation order, so
// low-id atoms are the frequent words. Drawing task content with weight
// 1/(rank+3) keeps synthetic sentences frequency-matched to the text the
// vocabulary was built from; a uniform draw would flood them with words
// that are rare everywhere else.
std::vector<double> zipf_cdf(size_t n) {
  std::vector<double> cdf(n);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) total += 1.0 / (static_cast<double>(i) + 3.0);
  double run = 0.0;
  for (size_t i = 0; i < n; ++i) {
    run += 1.0 / (static_cast<double>(i) + 3.0) / total;
    cdf[i] = run;
  }
  cdf[n - 1] = 1.0;
  return cdf;
}

struct TaskSynthesizer {
  OodTaskKind kind;
  const TaskRule& rule;
  std::span<const int32_t> pool;
  std::span<const int32_t> qword_ids;
  RngState& rng;
  std::vector<double> atom_cdf = zipf_cdf(pool.size());

  static constexpr double kPolarityMargin = 1.0;
  static constexpr double kHighOverlap = 0.75;
  static constexpr double kLowOverlap = 0.4;

  int32_t draw_atom() {
    double u = rng.uniform();
    size_t idx = static_cast<size_t>(
        std::lower_bound(atom_cdf.begin(), atom_cdf.end(), u) -
        atom_cdf.begin());
    return pool[std::min(idx, pool.size() - 1)];
  }

  std::vector<int32_t> atoms(size_t len) {
    std::vector<int32_t> out(len);
    for (size_t i = 0; i < len; ++i) {
      out[i] = draw_atom();
    }
    return out;
  }

  // One light edit keeps overlap with the source high.
  std::vector<int32_t> near_copy(const std::vector<int32_t>& src) {
    std::vector<int32_t> out = src;
    uint64_t choice = rng.below(3);
    if (choice == 0 && out.size() > 1) {
      out.erase(out.begin() + static_cast<int64_t>(rng.below(out.size())));
    } else if (choice == 1) {
      out[rng.below(out.size())] = draw_atom();
    }  // choice 2: verbatim copy
    return out;
  }

  // Builds one candidate aimed at `target`; the caller re-checks with the
  // rule itself before accepting.
  bool candidate(int32_t target, Example& ex) {
    ex = Example{};
    switch (kind) {
      case OodTaskKind::SingleSentence: {
        ex.seg1 = atoms(4 + rng.below(7));  // 4..10
        double sum = 0.0;
        for (int32_t id : ex.seg1) {
          sum += rule.token_weights[static_cast<size_t>(id)];
        }
        // A margin keeps the classes cleanly separated.
        return target == 1 ? sum >= kPolarityMargin : sum <= -kPolarityMargin;
      }
      case OodTaskKind::NliPair: {
        ex.seg1 = atoms(4 + rng.below(3));  // 4..6
        if (target == 2) {
          ex.seg2 = rng.uniform() < 0.5 ? near_copy(ex.seg1)
                                        : atoms(4 + rng.below(3));
          // Plant the negation marker; contradiction regardless of overlap.
          if (ex.seg2.size() >= 6) {
            ex.seg2[rng.below(ex.seg2.size())] = rule.negation_id;
          } else {
            ex.seg2.insert(
                ex.seg2.begin() + static_cast<int64_t>(
                                      rng.below(ex.seg2.size() + 1)),
                rule.negation_id);
          }
          return true;
        }
        if (target == 0) {
          ex.seg2 = near_copy(ex.seg1);
          return token_overlap(ex.seg2, ex.seg1) >= kHighOverlap;
        }
        ex.seg2 = atoms(4 + rng.below(3));
        return token_overlap(ex.seg2, ex.seg1) <= kLowOverlap;
      }
      case OodTaskKind::ParaphrasePair: {
        ex.seg1 = atoms(3 + rng.below(3));  // 3..5
        ex.seg2 = target == 1 ? near_copy(ex.seg1) : atoms(3 + rng.below(3));
        ex.seg1.push_back(kQMarkId);
        ex.seg2.push_back(kQMarkId);
        double overlap = token_overlap(ex.seg2, ex.seg1);
        return target == 1 ? overlap >= kHighOverlap : overlap <= kLowOverlap;
      }
      case OodTaskKind::QuestionParagraph: {
        ex.seg2 = atoms(6 + rng.below(2));  // 6..7
        size_t span_len = 2 + rng.below(3);  // 2..4
        std::vector<int32_t> span;
        if (target == 1) {
          size_t start = rng.below(ex.seg2.size() - span_len + 1);
          span.assign(ex.seg2.begin() + static_cast<int64_t>(start),
                      ex.seg2.begin() + static_cast<int64_t>(start + span_len));
        } else {
          span = atoms(span_len);
        }
        ex.seg1.push_back(qword_ids[rng.below(qword_ids.size())]);
        ex.seg1.insert(ex.seg1.end(), span.begin(), span.end());
        ex.seg1.push_back(kQMarkId);
        return true;
      }
    }
    throw ContractError("unknown task kind value");
  }

  Example make(int32_t target) {
    for (int64_t attempt = 0; attempt < kMaxSynthAttempts; ++attempt) {
      Example ex;
      if (!candidate(target, ex)) {
        continue;
      }
      if (rule.label_of(ex) == target) {
        ex.label = target;
        return ex;
      }
    }
    throw DataError("could not synthesize an example with label " +
                    std::to_string(target) + " for kind " + to_string(kind));
  }
};

}  // namespace

SyntheticTask make_synthetic_task(OodTaskKind kind, const Vocab& vocab,
                                  int64_t train_n, int64_t dev_n,
                                  RngState& rng) {
  if (train_n < 0 || dev_n < 0) {
    throw ParameterError("dataset sizes must be non-negative");
  }
  int32_t negation_id = single_token_id(vocab, "not");
  if (negation_id < 0) {
    throw DataError("vocabulary must hold 'not' as a single token");
  }
  std::vector<int32_t> qword_ids;
  for (const std::string& word : question_words()) {
    int32_t id = single_token_id(vocab, word);
    if (id < 0) {
      throw DataError("vocabulary must hold question word '" + word +
                      "' as a single token");
    }
    qword_ids.push_back(id);
  }
  std::vector<int32_t> pool = task_atom_pool(vocab, negation_id, qword_ids);

  SyntheticTask task;
  task.rule.kind = kind;
  task.rule.classes = classes_for(kind);
  task.rule.negation_id = negation_id;
  if (kind == OodTaskKind::SingleSentence) {
    // Sparse polarity over content words: roughly a quarter of the atoms
    // carry a strong signed weight, the rest are neutral. The most frequent
    // atoms are function-word glue that appears in nearly every sentence;
    // weighting one of those would tilt all natural text toward a single
    // class, so they stay neutral the way real sentiment words are content
    // words. A few decisive tokens per sentence keep the class margin wide
    // and the rule recoverable from few observations.
    constexpr size_t kNeutralHead = 16;
    std::vector<char> neutral(static_cast<size_t>(vocab.size()), 0);
    for (size_t i = 0; i < std::min(kNeutralHead, pool.size()); ++i) {
      neutral[static_cast<size_t>(pool[i])] = 1;
    }
    task.rule.token_weights.assign(static_cast<size_t>(vocab.size()), 0.0);
    for (size_t id = 0; id < task.rule.token_weights.size(); ++id) {
      if (neutral[id]) {
        continue;
      }
      if (rng.uniform() < 0.25) {
        task.rule.token_weights[id] = rng.gaussian(2.0);
      }
    }
  }

  TaskSynthesizer synth{kind, task.rule, pool, qword_ids, rng};
  auto fill = [&](TaskDataset& data, int64_t n) {
    data.kind = kind;
    data.classes = task.rule.classes;
    data.examples.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
      data.examples.push_back(
          synth.make(static_cast<int32_t>(i % task.rule.classes)));
    }
  };
  fill(task.train, train_n);
  fill(task.dev, dev_n);
  return task;
}

// --- Packing --------------------------------------------------------------

TokenBatch pack_examples(std::span<const Example> examples, int64_t max_len,
                         bool with_labels) {
  std::vector<std::vector<int32_t>> rows;
  std::vector<int32_t> labels;
  rows.reserve(examples.size());
  for (size_t i = 0; i < examples.size(); ++i) {
    const Example& ex = examples[i];
    if (ex.seg1.empty()) {
      throw DataError("example " + std::to_string(i) +
                      " has an empty first segment");
    }
    std::vector<int32_t> s1 = ex.seg1;
    std::vector<int32_t> s2 = ex.seg2;
    bool pair = !s2.empty();
    int64_t overhead = pair ? 3 : 2;  // CLS + one SEP per segment
    int64_t budget = max_len - overhead - (pair ? 2 : 1);
    if (budget < 0) {
      throw ContractError("max_len " + std::to_string(max_len) +
                          " cannot hold a " + (pair ? "pair" : "single") +
                          " example");
    }
    // Trim the currently-longer segment's tail until the row fits.
    while (static_cast<int64_t>(s1.size() + s2.size()) > max_len - overhead) {
      if (s2.size() >= s1.size() && s2.size() > 1) {
        s2.pop_back();
      } else if (s1.size() > 1) {
        s1.pop_back();
      } else {
        throw ContractError("cannot trim example " + std::to_string(i) +
                            " down to max_len " + std::to_string(max_len));
      }
    }
    std::vector<int32_t> row;
    row.reserve(static_cast<size_t>(max_len));
    row.push_back(kClsId);
    row.insert(row.end(), s1.begin(), s1.end());
    row.push_back(kSepId);
    if (pair) {
      row.insert(row.end(), s2.begin(), s2.end());
      row.push_back(kSepId);
    }
    rows.push_back(std::move(row));
    if (with_labels) {
      if (ex.label < 0) {
        throw ContractError("example " + std::to_string(i) +
                            " carries no label");
      }
      labels.push_back(ex.label);
    }
  }
  return make_token_batch(rows, labels, max_len);
}

// --- Persistence ----------------------------------------------------------

namespace {

void write_dataset(const std::string& path, OodTaskKind kind, int32_t classes,
                   const std::string& origin,
                   const std::vector<Example>& examples, const Vocab& vocab) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) {
    throw IoError("cannot open for writing: " + path);
  }
  os << kDatasetHeader << "\n";
  os << "meta\t" << to_string(kind) << "\t" << classes << "\t" << origin
     << "\n";
  for (const Example& ex : examples) {
    os << to_string(kind) << "\t" << vocab.decode(ex.seg1) << "\t"
       << vocab.decode(ex.seg2) << "\t";
    if (!ex.teacher_probs.empty()) {
      for (size_t i = 0; i < ex.teacher_probs.size(); ++i) {
        if (i > 0) os << ",";
        os << format_double(ex.teacher_probs[i]);
      }
    } else if (ex.label >= 0) {
      os << ex.label;
    }
    os << "\n";
  }
  if (!os) {
    throw IoError("write failed: " + path);
  }
}

struct ParsedDataset {
  OodTaskKind kind{};
  int32_t classes = 0;
  std::string origin;
  std::vector<Example> examples;
};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

ParsedDataset read_dataset(const std::string& path, const Vocab& vocab) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open: " + path);
  }
  std::string line;
  if (!std::getline(is, line) || line != kDatasetHeader) {
    throw IoError("not a zskd dataset file: " + path);
  }
  if (!std::getline(is, line)) {
    throw IoError("dataset file ends before its meta record: " + path);
  }
  std::vector<std::string> meta = split_tabs(line);
  if (meta.size() != 4 || meta[0] != "meta") {
    throw IoError("malformed meta record in " + path);
  }
  ParsedDataset parsed;
  parsed.kind = task_kind_from_string(meta[1]);
  try {
    parsed.classes = static_cast<int32_t>(std::stol(meta[2]));
  } catch (const std::exception&) {
    throw IoError("malformed class count '" + meta[2] + "' in " + path);
  }
  parsed.origin = meta[3];
  size_t line_no = 2;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 4) {
      throw IoError("line " + std::to_string(line_no) + " of " + path +
                    " has " + std::to_string(fields.size()) +
                    " fields, expected 4");
    }
    if (task_kind_from_string(fields[0]) != parsed.kind) {
      throw IoError("line " + std::to_string(line_no) + " of " + path +
                    " switches task kind mid-file");
    }
    Example ex;
    ex.seg1 = vocab.encode(fields[1]);
    ex.seg2 = vocab.encode(fields[2]);
    const std::string& tail = fields[3];
    try {
      if (!tail.empty()) {
        if (tail.find(',') != std::string::npos) {
          std::stringstream ss(tail);
          std::string piece;
          while (std::getline(ss, piece, ',')) {
            ex.teacher_probs.push_back(std::stod(piece));
          }
        } else {
          ex.label = static_cast<int32_t>(std::stol(tail));
        }
      }
    } catch (const std::exception&) {
      throw IoError("malformed label field on line " + std::to_string(line_no) +
                    " of " + path);
    }
    parsed.examples.push_back(std::move(ex));
  }
  return parsed;
}

}  // namespace

void save_task_dataset(const TaskDataset& data, const Vocab& vocab,
                       const std::string& path) {
  write_dataset(path, data.kind, data.classes, kTaskOrigin, data.examples,
                vocab);
}

TaskDataset load_task_dataset(const std::string& path, const Vocab& vocab) {
  ParsedDataset parsed = read_dataset(path, vocab);
  if (parsed.origin != kTaskOrigin) {
    throw DataError("file " + path + " holds '" + parsed.origin +
                    "' data, not a labeled task");
  }
  TaskDataset data;
  data.kind = parsed.kind;
  data.classes = parsed.classes;
  data.examples = std::move(parsed.examples);
  return data;
}

void save_ood_dataset(const OodDataset& data, const Vocab& vocab,
                      const std::string& path) {
  write_dataset(path, data.kind(), classes_for(data.kind()),
                data.provenance(), data.examples(), vocab);
}

OodDataset load_ood_dataset(const std::string& path, const Vocab& vocab) {
  ParsedDataset parsed = read_dataset(path, vocab);
  if (parsed.origin != kOodProvenance) {
    throw DataError(
        "file " + path + " holds '" + parsed.origin +
        "' data; distillation inputs must come from corpus synthesis");
  }
  for (size_t i = 0; i < parsed.examples.size(); ++i) {
    if (parsed.examples[i].label >= 0) {
      throw DataError("example " + std::to_string(i) + " in " + path +
                      " carries a hard label; synthesized data never does");
    }
  }
  OodDataset data;
  data.kind_ = parsed.kind;
  data.provenance_ = parsed.origin;
  data.examples_ = std::move(parsed.examples);
  return data;
}

}  // namespace zskd
