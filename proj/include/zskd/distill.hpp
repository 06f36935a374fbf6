#pragma once

// Training loops: supervised classifier training (the teacher and the
// standard few-shot regime), generator pre-training over synthesized text,
// the alternating adversarial distillation loop, its KD-only baseline, and
// the few-shot variants. Every loop is deterministic given its RngState
// and writes a line-oriented metrics log.

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zskd/corpus.hpp"
#include "zskd/models.hpp"
#include "zskd/rng.hpp"

namespace zskd {

// Hyper-parameters shared by the training loops. The adversarial loop runs
// outer_steps rounds of gen_steps generator updates followed by
// student_steps student updates; both learning rates decay linearly to
// exactly zero over each optimizer's total update budget, with no warmup.
struct DistillSchedule {
  int64_t outer_steps = 16;     // N: outer rounds of the alternating loop
  int64_t gen_steps = 10;       // n_G: generator updates per round
  int64_t student_steps = 100;  // n_S: student updates per round
  double alpha = 0.2;           // weight of the generated-batch loss term
  double noise_std = 0.01;      // std of the generator's Gaussian noise
  double eta = 3e-4;            // learning rate of the alternating loop
  double lambda = 3e-4;         // generator pre-training learning rate
  int64_t batch = 64;
  double tau_g = 1.0;           // Gumbel-Softmax temperature
  int64_t pretrain_epochs = 2;  // generator pre-training passes over D

  // The fidelity anchor in the adversarial step; switched off only by the
  // ablation study.
  bool use_fidelity = true;
  // Batches cycle through a reshuffled permutation per epoch-equivalent by
  // default; switching this on draws every batch index independently.
  bool sample_with_replacement = false;

  // Supervised-loop budget: epochs cap and early-stop patience on dev
  // accuracy.
  int64_t sup_max_epochs = 30;
  int64_t sup_patience = 5;

  void validate() const;
};

// One line of a training log. Fields a phase does not produce stay NaN and
// serialize as "-". Phases: ADV (generator update), KD (student update),
// SUP (supervised step), PG (generator pre-training step), EVAL (dev-set
// measurement).
struct MetricRecord {
  static constexpr double kAbsent = std::numeric_limits<double>::quiet_NaN();

  int64_t outer = 0;
  std::string phase;
  int64_t inner = 0;
  double l_a = kAbsent;    // adversarial term (negated divergence)
  double l_f = kAbsent;    // fidelity term
  double l_t = kAbsent;    // generator total
  double l_g = kAbsent;    // student loss on the generated batch
  double l_ood = kAbsent;  // student loss on the drawn batch
  double l = kAbsent;      // combined update loss
  double eta = kAbsent;    // learning rate used for this update
  double accuracy = kAbsent;  // EVAL records
  double macro_f1 = kAbsent;  // EVAL records
  std::vector<double> per_class_f1;  // EVAL records
};

struct MetricsLog {
  std::vector<MetricRecord> records;

  size_t count_phase(std::string_view phase) const;
  // Records with the given phase, in order.
  std::vector<const MetricRecord*> with_phase(std::string_view phase) const;
  const MetricRecord* last_eval() const;  // nullptr when no EVAL record
  void append(const MetricsLog& other);
};

void write_metrics_log(std::ostream& out, const MetricsLog& log);
MetricsLog read_metrics_log(std::istream& in);
void save_metrics_log(const std::string& path, const MetricsLog& log);
MetricsLog load_metrics_log(const std::string& path);

// Supervised cross-entropy training of an already-initialized classifier.
// Runs up to sup_max_epochs over the training set (batches reshuffled per
// epoch, rate decayed linearly against the full budget), evaluates dev
// accuracy after each epoch, stops once accuracy has not improved for
// sup_patience epochs, and restores the parameters of the best epoch.
// Returns the log (SUP records per update, EVAL per epoch).
// A non-finite loss raises TrainingError naming the step.
MetricsLog train_supervised(ClassifierModel& model, const TaskDataset& train,
                            const TaskDataset& dev,
                            const DistillSchedule& schedule, RngState& rng);

// Initializes a classifier from the config, trains it supervised, then
// freezes it. This is how every teacher in this project is constructed.
ClassifierModel train_teacher(const ClassifierConfig& config,
                              const TaskDataset& train, const TaskDataset& dev,
                              const DistillSchedule& schedule, RngState& rng,
                              MetricsLog* log = nullptr);

// Generator pre-training: for pretrain_epochs over the synthesized pool,
// sample noise, form the relaxed batch, and minimize the token
// cross-entropy of the drawn batch under it, stepping with lambda decayed
// linearly to zero. Returns the log (PG records). The generator's sequence
// length sets the packing length.
MetricsLog pretrain_generator(GeneratorModel& gen, const OodDataset& ood,
                              const DistillSchedule& schedule, RngState& rng);

// The alternating distillation loop. Per outer step: draw one batch x_k
// from the pool; run gen_steps adversarial updates (fresh noise each,
// relaxed batch x_p, loss (l_a + l_f)/2, update the generator only); then
// student_steps distillation updates (fresh noise and x_p each, loss
// alpha * l_g + (1 - alpha) * l_ood, update the student only). The teacher
// stays frozen throughout and its outputs on x_k are computed once per
// outer step. After each outer step, if monitor_dev is given, an EVAL
// record is appended; monitoring never influences training. At the end the
// student is restored to the outer step with the lowest mean update loss.
// Requires a frozen teacher; a non-finite loss or gradient aborts with a
// TrainingError carrying the step indices, loss values, and noise norm.
MetricsLog zskd(const ClassifierModel& teacher, ClassifierModel& student,
                GeneratorModel& gen, const OodDataset& ood,
                const DistillSchedule& schedule, RngState& rng,
                const TaskDataset* monitor_dev = nullptr);

// The same loop with the generator path removed: per outer step, draw x_k
// and run student_steps updates of the teacher-matching loss on x_k alone.
// Consumes the batch stream identically to zskd, so a zskd run with
// alpha = 0 yields this loop's student bit for bit.
MetricsLog kd_only(const ClassifierModel& teacher, ClassifierModel& student,
                   const OodDataset& ood, const DistillSchedule& schedule,
                   RngState& rng, const TaskDataset* monitor_dev = nullptr);

// Few-shot training regimes over a small labeled subset.
//   Standard: plain supervised training on the subset.
//   KD: the mixture of label cross-entropy and temperature-smoothed
//       teacher matching, trained epoch-wise like the supervised loop.
//   KDAdv: the alternating loop with generated batches in place of a
//       synthesized pool — x_k batches come from the subset, the
//       fidelity term anchors to them, and the drawn-batch loss term is
//       the labeled mixture loss.
enum class FewshotRegime : int32_t { Standard = 0, KD = 1, KDAdv = 2 };

std::string to_string(FewshotRegime regime);
FewshotRegime fewshot_regime_from_string(std::string_view name);

// The first per_class examples of each class, in dataset order. Raises
// DataError if any class has no examples at all.
TaskDataset take_per_class(const TaskDataset& data, int64_t per_class);

// Trains a fresh student under the chosen regime and returns it. The
// student is initialized from student_config using a substream of rng, so
// all regimes start from identical parameters for a given seed. gen is
// required (and pre-trained by the caller) only for KDAdv. dev drives the
// supervised plateau and EVAL records; it never contributes gradients.
ClassifierModel fewshot(FewshotRegime regime, const ClassifierModel& teacher,
                        const ClassifierConfig& student_config,
                        const TaskDataset& few, const TaskDataset& dev,
                        GeneratorModel* gen, const DistillSchedule& schedule,
                        RngState& rng, MetricsLog* log = nullptr);

// Diagnostics over the generator's output distributions.
// Mean Shannon entropy (nats) of the per-position token distributions over
// n_samples noise draws at the schedule's noise std.
double generator_token_entropy(const GeneratorModel& gen, int64_t n_samples,
                               const DistillSchedule& schedule, RngState& rng);

// Pooled frequency of per-position argmax tokens over n_samples draws;
// sums to 1 over the vocabulary.
std::vector<double> generator_unigram(const GeneratorModel& gen,
                                      int64_t n_samples,
                                      const DistillSchedule& schedule,
                                      RngState& rng);

// Pooled token frequencies over the packed rows of the pool (padding and
// markers included), for comparison against generator_unigram.
std::vector<double> dataset_unigram(const OodDataset& ood, int64_t max_len,
                                    int64_t vocab_size);

// Half the L1 distance between two distributions of equal length.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace zskd
