#include "doctest.h"

#include <cmath>

#include "zskd/corpus.hpp"
#include "zskd/error.hpp"
#include "zskd/eval.hpp"
#include "zskd/rng.hpp"

#include "support/modelchecks.hpp"

using namespace zskd;
using namespace zskd::testing;

TEST_CASE("a perfect predictor scores one everywhere") {
  std::vector<int32_t> truth = {0, 1, 2, 0, 1, 2};
  EvalReport r = report_from_predictions(truth, truth, 3);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_f1 == 1.0);
  for (double f1 : r.per_class_f1) {
    CHECK(f1 == 1.0);
  }
  CHECK(r.confusion_at(0, 0) == 2);
  CHECK(r.confusion_at(0, 1) == 0);
}

TEST_CASE("a constant predictor on balanced binary data scores one half") {
  std::vector<int32_t> truth = {0, 1, 0, 1, 0, 1, 0, 1};
  std::vector<int32_t> constant(8, 0);
  EvalReport r = report_from_predictions(constant, truth, 2);
  CHECK(r.accuracy == 0.5);
  CHECK(r.per_class_f1[1] == 0.0);           // the class never predicted
  CHECK(r.per_class_f1[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("three-class report matches a hand-counted confusion matrix") {
  std::vector<int32_t> truth = {0, 0, 0, 1, 1, 1, 2, 2, 2, 0};
  std::vector<int32_t> pred = {0, 1, 0, 1, 1, 2, 2, 0, 2, 0};
  EvalReport r = report_from_predictions(pred, truth, 3);
  CHECK(r.total == 10);
  CHECK(r.confusion_at(0, 0) == 3);
  CHECK(r.confusion_at(0, 1) == 1);
  CHECK(r.confusion_at(0, 2) == 0);
  CHECK(r.confusion_at(1, 1) == 2);
  CHECK(r.confusion_at(1, 2) == 1);
  CHECK(r.confusion_at(2, 0) == 1);
  CHECK(r.confusion_at(2, 2) == 2);
  int64_t sum = 0;
  for (int64_t cell : r.confusion) sum += cell;
  CHECK(sum == r.total);

  CHECK(r.accuracy == doctest::Approx(0.7));
  CHECK(r.per_class_f1[0] == doctest::Approx(0.75));
  CHECK(r.per_class_f1[1] == doctest::Approx(2.0 / 3.0));
  CHECK(r.per_class_f1[2] == doctest::Approx(2.0 / 3.0));
  CHECK(r.macro_f1 == doctest::Approx((0.75 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0));
}

TEST_CASE("macro F1 is invariant to class relabeling") {
  std::vector<int32_t> truth = {0, 0, 0, 1, 1, 1, 2, 2, 2, 0};
  std::vector<int32_t> pred = {0, 1, 0, 1, 1, 2, 2, 0, 2, 0};
  EvalReport base = report_from_predictions(pred, truth, 3);

  // Swap classes 0 and 2 everywhere.
  auto swap02 = [](std::vector<int32_t> v) {
    for (int32_t& x : v) x = x == 0 ? 2 : (x == 2 ? 0 : x);
    return v;
  };
  EvalReport swapped =
      report_from_predictions(swap02(pred), swap02(truth), 3);
  CHECK(swapped.macro_f1 == doctest::Approx(base.macro_f1));
  CHECK(swapped.accuracy == doctest::Approx(base.accuracy));
  CHECK(swapped.per_class_f1[0] == doctest::Approx(base.per_class_f1[2]));

  // Accuracy is invariant to example order.
  std::vector<int32_t> truth_r(truth.rbegin(), truth.rend());
  std::vector<int32_t> pred_r(pred.rbegin(), pred.rend());
  EvalReport reversed = report_from_predictions(pred_r, truth_r, 3);
  CHECK(reversed.accuracy == base.accuracy);
  CHECK(reversed.confusion == base.confusion);
}

TEST_CASE("degenerate evaluation inputs are refused") {
  CHECK_THROWS_AS(report_from_predictions({}, {}, 2), DataError);
  CHECK_THROWS_AS(report_from_predictions({0}, {0, 1}, 2), ContractError);
  CHECK_THROWS_AS(report_from_predictions({5}, {0}, 2), DataError);
  CHECK_THROWS_AS(report_from_predictions({0}, {0}, 1), ContractError);
}

TEST_CASE("recovery reproduces the quoted headline ratios") {
  EvalReport student;
  EvalReport teacher;
  student.accuracy = 0.859;
  teacher.accuracy = 0.930;
  double r1 = recovery(student, teacher);
  // Quoted at one decimal, truncated: 92.3.
  CHECK(std::floor(r1 * 1000.0) / 10.0 == doctest::Approx(92.3));

  student.accuracy = 0.651;
  teacher.accuracy = 0.866;
  double r2 = recovery(student, teacher);
  CHECK(std::floor(r2 * 1000.0) / 10.0 == doctest::Approx(75.1));

  EvalReport same;
  same.accuracy = 0.77;
  CHECK(recovery(same, same) == 1.0);

  EvalReport zero;
  zero.accuracy = 0.0;
  CHECK_THROWS_AS(recovery(student, zero), DataError);

  EvalReport filled = with_recovery(student, teacher);
  CHECK(filled.teacher_recovery == doctest::Approx(r2));
}

TEST_CASE("model evaluation is pure and batching-invariant") {
  RngState rng(64);
  ClassifierConfig config = tiny_classifier_config();
  ClassifierModel model = ClassifierModel::init(config, rng);

  // A small labeled dataset over the tiny vocabulary.
  TaskDataset data;
  data.kind = OodTaskKind::SingleSentence;
  data.classes = config.classes;
  RngState data_rng(65);
  for (int i = 0; i < 37; ++i) {
    Example ex;
    size_t len = 1 + data_rng.below(3);
    for (size_t t = 0; t < len; ++t) {
      ex.seg1.push_back(
          static_cast<int32_t>(kReservedIds +
                               data_rng.below(static_cast<uint64_t>(
                                   config.vocab_size - kReservedIds))));
    }
    ex.label = static_cast<int32_t>(data_rng.below(
        static_cast<uint64_t>(config.classes)));
    data.examples.push_back(std::move(ex));
  }

  EvalReport a = evaluate(model, data, 64);
  EvalReport b = evaluate(model, data, 64);
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.confusion == b.confusion);

  EvalReport c = evaluate(model, data, 7);  // ragged final batch
  CHECK(c.accuracy == a.accuracy);
  CHECK(c.confusion == a.confusion);
  CHECK(c.macro_f1 == a.macro_f1);
  CHECK(c.total == 37);

  TaskDataset empty;
  empty.classes = 2;
  CHECK_THROWS_AS(evaluate(model, empty), DataError);
  CHECK_THROWS_AS(evaluate(model, data, 0), ParameterError);
}

TEST_CASE("report text lists every metric as key=value lines") {
  std::vector<int32_t> truth = {0, 1, 0, 1};
  std::vector<int32_t> pred = {0, 1, 1, 1};
  EvalReport r = report_from_predictions(pred, truth, 2);
  std::string text = report_text(r);
  CHECK(text.find("metric=accuracy\n") != std::string::npos);
  CHECK(text.find("accuracy=0.75\n") != std::string::npos);
  CHECK(text.find("classes=2\n") != std::string::npos);
  CHECK(text.find("total=4\n") != std::string::npos);
  CHECK(text.find("f1_class_0=") != std::string::npos);
  CHECK(text.find("confusion_0_1=1\n") != std::string::npos);
  // Recovery appears only once computed.
  CHECK(text.find("teacher_recovery=") == std::string::npos);
  EvalReport teacher;
  teacher.accuracy = 1.0;
  std::string with = report_text(with_recovery(r, teacher));
  CHECK(with.find("teacher_recovery=0.75\n") != std::string::npos);
}
