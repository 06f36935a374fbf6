#include "zskd/eval.hpp"

#include <cstdio>
#include <sstream>

#include "zskd/error.hpp"
#include "zskd/tensor.hpp"

namespace zskd {

namespace {

std::vector<int32_t> argmax_rows(const Tensor& logits) {
  const auto& shape = logits.shape();
  if (shape.size() != 2) {
    throw ContractError("expected [batch x classes] logits, got " +
                        shape_str(logits.shape()));
  }
  int64_t rows = shape[0], cols = shape[1];
  std::vector<int32_t> out(static_cast<size_t>(rows));
  const double* data = logits.data();
  for (int64_t r = 0; r < rows; ++r) {
    int64_t best = 0;
    for (int64_t c = 1; c < cols; ++c) {
      if (data[r * cols + c] > data[r * cols + best]) {
        best = c;
      }
    }
    out[static_cast<size_t>(r)] = static_cast<int32_t>(best);
  }
  return out;
}

}  // namespace

int64_t EvalReport::confusion_at(int32_t truth, int32_t predicted) const {
  if (truth < 0 || truth >= classes || predicted < 0 ||
      predicted >= classes) {
    throw ContractError("confusion cell (" + std::to_string(truth) + ", " +
                        std::to_string(predicted) + ") outside " +
                        std::to_string(classes) + " classes");
  }
  return confusion[static_cast<size_t>(truth) * static_cast<size_t>(classes) +
                   static_cast<size_t>(predicted)];
}

EvalReport report_from_predictions(const std::vector<int32_t>& predicted,
                                   const std::vector<int32_t>& truth,
                                   int32_t classes) {
  if (truth.empty()) {
    throw DataError("evaluation needs at least one example");
  }
  if (predicted.size() != truth.size()) {
    throw ContractError("prediction/label count mismatch: " +
                        std::to_string(predicted.size()) + " vs " +
                        std::to_string(truth.size()));
  }
  if (classes < 2) {
    throw ContractError("evaluation needs at least two classes");
  }
  EvalReport report;
  report.classes = classes;
  report.total = static_cast<int64_t>(truth.size());
  report.confusion.assign(
      static_cast<size_t>(classes) * static_cast<size_t>(classes), 0);
  for (size_t i = 0; i < truth.size(); ++i) {
    int32_t t = truth[i], p = predicted[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) {
      throw DataError("class id outside [0, " + std::to_string(classes) +
                      ") at example " + std::to_string(i));
    }
    report.confusion[static_cast<size_t>(t) * static_cast<size_t>(classes) +
                     static_cast<size_t>(p)]++;
  }
  int64_t correct = 0;
  for (int32_t c = 0; c < classes; ++c) {
    correct += report.confusion_at(c, c);
  }
  report.accuracy =
      static_cast<double>(correct) / static_cast<double>(report.total);

  report.per_class_f1.resize(static_cast<size_t>(classes), 0.0);
  double f1_sum = 0.0;
  for (int32_t c = 0; c < classes; ++c) {
    int64_t tp = report.confusion_at(c, c);
    int64_t predicted_c = 0, actual_c = 0;
    for (int32_t o = 0; o < classes; ++o) {
      predicted_c += report.confusion_at(o, c);
      actual_c += report.confusion_at(c, o);
    }
    // F1 = 2PR/(P+R) = 2tp / (predicted + actual); 0 when both are empty.
    double denom = static_cast<double>(predicted_c + actual_c);
    double f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    report.per_class_f1[static_cast<size_t>(c)] = f1;
    f1_sum += f1;
  }
  report.macro_f1 = f1_sum / static_cast<double>(classes);
  return report;
}

EvalReport evaluate(const ClassifierModel& model, const TaskDataset& data,
                    int64_t batch_size) {
  if (data.examples.empty()) {
    throw DataError("evaluation needs at least one example");
  }
  if (batch_size <= 0) {
    throw ParameterError("batch_size must be positive");
  }
  NoGradGuard guard;
  std::vector<int32_t> predicted;
  std::vector<int32_t> truth;
  predicted.reserve(data.examples.size());
  truth.reserve(data.examples.size());
  for (size_t at = 0; at < data.examples.size();
       at += static_cast<size_t>(batch_size)) {
    size_t count =
        std::min(static_cast<size_t>(batch_size), data.examples.size() - at);
    TokenBatch batch =
        pack_examples(std::span(data.examples.data() + at, count),
                      model.config.max_len, /*with_labels=*/true);
    Tensor logits = classify_hard(model, batch);
    std::vector<int32_t> preds = argmax_rows(logits);
    predicted.insert(predicted.end(), preds.begin(), preds.end());
    truth.insert(truth.end(), batch.labels.begin(), batch.labels.end());
  }
  return report_from_predictions(predicted, truth, data.classes);
}

double recovery(const EvalReport& student, const EvalReport& teacher) {
  if (teacher.accuracy == 0.0) {
    throw DataError("teacher score is zero; the recovery ratio is undefined");
  }
  return student.accuracy / teacher.accuracy;
}

EvalReport with_recovery(const EvalReport& student,
                         const EvalReport& teacher) {
  EvalReport out = student;
  out.teacher_recovery = recovery(student, teacher);
  return out;
}

std::string report_text(const EvalReport& report) {
  std::ostringstream os;
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "metric=accuracy\n";
  os << "classes=" << report.classes << "\n";
  os << "total=" << report.total << "\n";
  os << "accuracy=" << fmt(report.accuracy) << "\n";
  os << "macro_f1=" << fmt(report.macro_f1) << "\n";
  for (int32_t c = 0; c < report.classes; ++c) {
    os << "f1_class_" << c << "="
       << fmt(report.per_class_f1[static_cast<size_t>(c)]) << "\n";
  }
  for (int32_t t = 0; t < report.classes; ++t) {
    for (int32_t p = 0; p < report.classes; ++p) {
      os << "confusion_" << t << "_" << p << "=" << report.confusion_at(t, p)
         << "\n";
    }
  }
  if (report.teacher_recovery != 0.0) {
    os << "teacher_recovery=" << fmt(report.teacher_recovery) << "\n";
  }
  return os.str();
}

}  // namespace zskd
