#pragma once

// Classifier evaluation: accuracy, per-class F1, macro F1, the confusion
// matrix, and the student/teacher recovery ratio.

#include <cstdint>
#include <string>
#include <vector>

#include "zskd/corpus.hpp"
#include "zskd/models.hpp"

namespace zskd {

struct EvalReport {
  int32_t classes = 0;
  int64_t total = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  // Row-major C×C counts; row = true class, column = predicted class.
  std::vector<int64_t> confusion;
  // Filled by with_recovery; 0 means "not computed".
  double teacher_recovery = 0.0;

  int64_t confusion_at(int32_t truth, int32_t predicted) const;
};

// Argmax predictions of the model over the labeled dataset, batched.
// Pure: identical inputs give identical reports.
EvalReport evaluate(const ClassifierModel& model, const TaskDataset& data,
                    int64_t batch_size = 64);

// Accuracy computed directly from predictions; shares all derivation code
// with evaluate and backs counting-oracle tests.
EvalReport report_from_predictions(const std::vector<int32_t>& predicted,
                                   const std::vector<int32_t>& truth,
                                   int32_t classes);

// student score ÷ teacher score, on accuracy. Teacher at zero is an
// undefined ratio and refuses.
double recovery(const EvalReport& student, const EvalReport& teacher);

// Copy of `student` with teacher_recovery filled in.
EvalReport with_recovery(const EvalReport& student, const EvalReport& teacher);

// Flat key=value block (one pair per line) for appending to metrics logs.
// All comparisons in this project use the accuracy field.
std::string report_text(const EvalReport& report);

}  // namespace zskd
