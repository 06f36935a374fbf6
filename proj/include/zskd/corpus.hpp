#pragma once

// Plain-text corpus ingestion, unlabeled dataset synthesis from that
// corpus, and rule-labeled synthetic classification tasks. The two worlds
// are deliberately disjoint: task examples are built from vocabulary
// atoms and a hidden generative rule, while the unlabeled datasets used
// for distillation come only from the generic corpus. OodDataset can only
// be produced by synthesis or by loading a file that synthesis wrote, so
// the "distillation never sees task training data" guarantee is carried
// by the type itself.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "zskd/batch.hpp"
#include "zskd/rng.hpp"
#include "zskd/vocab.hpp"

namespace zskd {

// Paragraphs separated by blank lines; sentences split on terminal
// punctuation (./!/?), which is stripped.
struct Corpus {
  std::vector<std::vector<std::string>> paragraphs;
  std::vector<std::string> sentences;  // flattened, in paragraph order
};

Corpus parse_corpus(std::istream& in);
Corpus load_corpus(const std::string& path);

// The same corpus as canonical token ids (encode of each sentence).
struct TokenCorpus {
  std::vector<std::vector<int32_t>> sentences;
  // Half-open [begin, end) spans into `sentences`, one per paragraph.
  std::vector<std::pair<size_t, size_t>> paragraphs;

  // All tokens of one paragraph, sentences concatenated in order.
  std::vector<int32_t> paragraph_tokens(size_t p) const;
};

TokenCorpus tokenize_corpus(const Corpus& corpus, const Vocab& vocab);

enum class OodTaskKind : int32_t {
  SingleSentence = 0,
  NliPair = 1,
  ParaphrasePair = 2,
  QuestionParagraph = 3,
};

const char* to_string(OodTaskKind kind);
OodTaskKind task_kind_from_string(const std::string& name);
int32_t classes_for(OodTaskKind kind);

// One example: up to two token-id segments, without CLS/SEP framing
// (packing adds those). label is -1 until assigned; teacher_probs is
// empty until a teacher scores the example.
struct Example {
  std::vector<int32_t> seg1;
  std::vector<int32_t> seg2;
  int32_t label = -1;
  std::vector<double> teacher_probs;
};

// Labeled data for one synthetic task.
struct TaskDataset {
  OodTaskKind kind{};
  int32_t classes = 0;
  std::vector<Example> examples;
};

// Unlabeled data synthesized from the generic corpus. Constructible only
// through synth_ood or load_ood_dataset (both friends); there is no path
// from a TaskDataset into one of these, which is the point.
class OodDataset {
public:
  OodTaskKind kind() const { return kind_; }
  const std::vector<Example>& examples() const { return examples_; }
  const std::string& provenance() const { return provenance_; }

  // The only mutation: attach a teacher's class distribution to one
  // example. Segments and size are fixed at synthesis.
  void set_teacher_probs(size_t index, std::vector<double> probs);

private:
  OodDataset() = default;

  OodTaskKind kind_{};
  std::vector<Example> examples_;
  std::string provenance_;

  friend OodDataset synth_ood(const TokenCorpus& corpus, const Vocab& vocab,
                              OodTaskKind kind, int64_t n, double p_perturb,
                              RngState& rng);
  friend OodDataset load_ood_dataset(const std::string& path,
                                     const Vocab& vocab);
};

// The provenance string every synthesized dataset carries; loading
// rejects files that do not carry it.
extern const char* const kOodProvenance;

// --- Unlabeled synthesis from the corpus ---------------------------------

// n sentences sampled uniformly with replacement, verbatim.
std::vector<Example> synth_single(const TokenCorpus& corpus, int64_t n,
                                  RngState& rng);

// Premise = random corpus sentence. With probability p_perturb the second
// segment is a lightly edited copy (per-token edit rate 0.15 over a menu
// of delete / swap-adjacent / replace-with-random-atom, at most
// ceil(0.3·len) edits), otherwise an independently sampled sentence.
// ParaphrasePair flavor appends the question-mark token to both segments.
std::vector<Example> synth_pair(const TokenCorpus& corpus, const Vocab& vocab,
                                int64_t n, double p_perturb, OodTaskKind kind,
                                RngState& rng);

// Paragraph = random corpus paragraph. Question = question word + either
// a contiguous token span (2..5) from that paragraph or an unrelated
// corpus sentence (probability 1/2 each) + the question-mark token.
std::vector<Example> synth_question(const TokenCorpus& corpus,
                                    const Vocab& vocab, int64_t n,
                                    RngState& rng);

// Dispatch on kind; the only constructor of fresh OodDataset values.
OodDataset synth_ood(const TokenCorpus& corpus, const Vocab& vocab,
                     OodTaskKind kind, int64_t n, double p_perturb,
                     RngState& rng);

// Edit a token sequence in place per the menu above. Exposed for tests.
void perturb_tokens(std::vector<int32_t>& tokens,
                    std::span<const int32_t> replacement_pool, RngState& rng,
                    double edit_rate = 0.15, double budget_fraction = 0.3);

// --- Rule-labeled synthetic tasks ----------------------------------------

// The hidden generative rule behind a synthetic task. label_of recomputes
// the ground-truth label from segment content alone, so it doubles as the
// Bayes-optimal classifier for the task.
struct TaskRule {
  OodTaskKind kind{};
  int32_t classes = 0;
  // SingleSentence: per-token-id weight; label = [sum over seg1 > 0].
  std::vector<double> token_weights;
  // NliPair: entailment=0, neutral=1, contradiction=2. Contradiction iff
  // seg2 contains the negation token; else entailment iff overlap ≥
  // threshold; else neutral. ParaphrasePair: [overlap ≥ threshold].
  int32_t negation_id = -1;
  double overlap_threshold = 0.6;

  int32_t label_of(const Example& example) const;
};

// |set(h) ∩ set(p)| / |set(h)| over token ids; 0 when h is empty.
double token_overlap(std::span<const int32_t> hypothesis,
                     std::span<const int32_t> premise);

struct SyntheticTask {
  TaskDataset train;
  TaskDataset dev;
  TaskRule rule;
};

// Builds a labeled task of the given kind from vocabulary atoms: a hidden
// rule is drawn from rng, then examples are generated to hit round-robin
// target labels, so classes are exactly balanced. The corpus itself is
// never consulted — task data and corpus data share only the vocabulary.
SyntheticTask make_synthetic_task(OodTaskKind kind, const Vocab& vocab,
                                  int64_t train_n, int64_t dev_n,
                                  RngState& rng);

// --- Packing and persistence ---------------------------------------------

// [CLS] seg1 [SEP] (+ seg2 [SEP] when present), padded to max_len.
// Over-length examples lose tokens from the tail of whichever segment is
// currently longer, never the framing tokens. with_labels requires every
// example to carry a label ≥ 0.
TokenBatch pack_examples(std::span<const Example> examples, int64_t max_len,
                         bool with_labels);

void save_task_dataset(const TaskDataset& data, const Vocab& vocab,
                       const std::string& path);
TaskDataset load_task_dataset(const std::string& path, const Vocab& vocab);

void save_ood_dataset(const OodDataset& data, const Vocab& vocab,
                      const std::string& path);
OodDataset load_ood_dataset(const std::string& path, const Vocab& vocab);

}  // namespace zskd
