#include "zskd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <sstream>
#include <utility>

#include "zskd/error.hpp"
#include "zskd/eval.hpp"
#include "zskd/losses.hpp"
#include "zskd/ops.hpp"
#include "zskd/optim.hpp"

namespace zskd {

namespace {

constexpr const char* kMetricsHeader = "# zskd-metrics v1";

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

std::string format_metric(double v) {
  if (std::isnan(v)) {
    return "-";
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_metric(const std::string& field, size_t line_no) {
  if (field == "-") {
    return MetricRecord::kAbsent;
  }
  try {
    return std::stod(field);
  } catch (const std::exception&) {
    throw IoError("metrics log: bad number '" + field + "' on line " +
                  std::to_string(line_no));
  }
}

int64_t parse_count(const std::string& field, size_t line_no) {
  try {
    return std::stoll(field);
  } catch (const std::exception&) {
    throw IoError("metrics log: bad count '" + field + "' on line " +
                  std::to_string(line_no));
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

// Cycles batch index sets over a pool: a reshuffled permutation per pass by
// default, or independent draws when sampling with replacement. The final
// batch of a pass may be short.
class BatchCycler {
public:
  BatchCycler(size_t pool, int64_t batch, bool with_replacement, RngState rng)
      : pool_(pool), batch_(static_cast<size_t>(batch)),
        replace_(with_replacement), rng_(rng) {
    if (pool_ == 0) {
      throw DataError("batch cycler: empty pool");
    }
    order_.resize(pool_);
    std::iota(order_.begin(), order_.end(), size_t{0});
    rng_.shuffle(order_);
  }

  std::vector<size_t> next() {
    std::vector<size_t> out;
    if (replace_) {
      out.reserve(batch_);
      for (size_t i = 0; i < batch_; ++i) {
        out.push_back(static_cast<size_t>(rng_.below(pool_)));
      }
      return out;
    }
    size_t take = std::min(batch_, pool_ - cursor_);
    out.assign(order_.begin() + static_cast<ptrdiff_t>(cursor_),
               order_.begin() + static_cast<ptrdiff_t>(cursor_ + take));
    cursor_ += take;
    if (cursor_ == pool_) {
      rng_.shuffle(order_);
      cursor_ = 0;
    }
    return out;
  }

private:
  size_t pool_;
  size_t batch_;
  bool replace_;
  RngState rng_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
};

TokenBatch pack_indices(std::span<const Example> pool,
                        const std::vector<size_t>& indices, int64_t max_len,
                        bool with_labels) {
  std::vector<Example> chosen;
  chosen.reserve(indices.size());
  for (size_t i : indices) {
    chosen.push_back(pool[i]);
  }
  return pack_examples(chosen, max_len, with_labels);
}

std::vector<std::vector<double>> snapshot_values(
    const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> out;
  out.reserve(params.size());
  for (const Tensor& p : params) {
    out.push_back(p.vec());
  }
  return out;
}

void restore_values(std::vector<Tensor>& params,
                    const std::vector<std::vector<double>>& snapshot) {
  for (size_t i = 0; i < params.size(); ++i) {
    params[i].vec() = snapshot[i];
  }
}

double grad_norm(const std::vector<Tensor>& params) {
  double sum = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) {
      continue;
    }
    for (double g : p.grad()) {
      sum += g * g;
    }
  }
  return std::sqrt(sum);
}

double l2_norm(const Tensor& t) {
  double sum = 0.0;
  for (double v : t.vec()) {
    sum += v * v;
  }
  return std::sqrt(sum);
}

void require_frozen(const ClassifierModel& teacher, const char* loop) {
  for (const Tensor& p : teacher.parameters()) {
    if (p.requires_grad()) {
      throw ContractError(std::string(loop) +
                          ": the teacher must be frozen before distillation");
    }
  }
}

MetricRecord eval_record(int64_t outer, const ClassifierModel& model,
                         const TaskDataset& dev, int64_t batch) {
  EvalReport report = evaluate(model, dev, batch);
  MetricRecord r;
  r.outer = outer;
  r.phase = "EVAL";
  r.inner = 0;
  r.accuracy = report.accuracy;
  r.macro_f1 = report.macro_f1;
  r.per_class_f1 = report.per_class_f1;
  return r;
}

[[noreturn]] void throw_divergence(const char* loop, int64_t outer,
                                   const char* phase, int64_t inner,
                                   std::initializer_list<
                                       std::pair<const char*, double>>
                                       values) {
  std::ostringstream msg;
  msg << loop << " diverged at outer " << outer << ", " << phase << " inner "
      << inner << ":";
  for (const auto& [name, v] : values) {
    msg << " " << name << "=" << format_metric(v);
  }
  throw TrainingError(msg.str());
}

// Epoch-driven training against a per-batch loss: reshuffled batches each
// epoch, linear decay over the full epoch budget, dev evaluation per epoch,
// early stop on stalled dev accuracy, best-epoch parameters restored.
MetricsLog run_epoch_loop(ClassifierModel& model, const TaskDataset& train,
                          const TaskDataset& dev,
                          const DistillSchedule& schedule, RngState& rng,
                          const char* loop_name,
                          const std::function<Tensor(const TokenBatch&)>&
                              batch_loss) {
  schedule.validate();
  if (train.examples.empty()) {
    throw DataError(std::string(loop_name) + ": training set is empty");
  }
  model.set_trainable(true);
  std::vector<Tensor> params = model.parameters();
  AdamW opt(params);
  RngState order_rng = rng.substream("order");

  int64_t n = static_cast<int64_t>(train.examples.size());
  int64_t per_epoch = ceil_div(n, schedule.batch);
  LinearDecay decay{schedule.eta, schedule.sup_max_epochs * per_epoch};

  MetricsLog log;
  int64_t update = 0;
  double best_accuracy = -1.0;
  std::vector<std::vector<double>> best = snapshot_values(params);
  int64_t stale_epochs = 0;

  std::vector<size_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), size_t{0});

  for (int64_t epoch = 1; epoch <= schedule.sup_max_epochs; ++epoch) {
    order_rng.shuffle(order);
    for (int64_t b = 0; b < per_epoch; ++b) {
      size_t lo = static_cast<size_t>(b * schedule.batch);
      size_t hi = std::min(static_cast<size_t>(n),
                           lo + static_cast<size_t>(schedule.batch));
      std::vector<size_t> chunk(order.begin() + static_cast<ptrdiff_t>(lo),
                                order.begin() + static_cast<ptrdiff_t>(hi));
      TokenBatch batch = pack_indices(train.examples, chunk,
                                      model.config.max_len, true);
      Tensor loss = batch_loss(batch);
      double value = loss.item();
      loss.backward();
      double gnorm = grad_norm(params);
      if (!std::isfinite(value) || !std::isfinite(gnorm)) {
        throw_divergence(loop_name, epoch, "SUP", b + 1,
                         {{"l", value}, {"grad_norm", gnorm}});
      }
      ++update;
      double rate = decay.rate_for_update(update);
      opt.step(rate);

      MetricRecord r;
      r.outer = epoch;
      r.phase = "SUP";
      r.inner = b + 1;
      r.l = value;
      r.eta = rate;
      log.records.push_back(std::move(r));
    }

    MetricRecord ev = eval_record(epoch, model, dev, schedule.batch);
    double accuracy = ev.accuracy;
    log.records.push_back(std::move(ev));
    if (accuracy > best_accuracy) {
      best_accuracy = accuracy;
      best = snapshot_values(params);
      stale_epochs = 0;
    } else {
      ++stale_epochs;
    }
    if (stale_epochs >= schedule.sup_patience) {
      break;
    }
  }
  restore_values(params, best);
  return log;
}

}  // namespace

void DistillSchedule::validate() const {
  auto positive = [](int64_t v, const char* name) {
    if (v <= 0) {
      throw ParameterError(std::string("schedule: ") + name +
                           " must be positive, got " + std::to_string(v));
    }
  };
  positive(outer_steps, "outer_steps");
  positive(gen_steps, "gen_steps");
  positive(student_steps, "student_steps");
  positive(batch, "batch");
  positive(sup_max_epochs, "sup_max_epochs");
  positive(sup_patience, "sup_patience");
  if (pretrain_epochs < 0) {
    throw ParameterError("schedule: pretrain_epochs must be non-negative");
  }
  if (alpha < 0.0 || alpha > 1.0) {
    throw ParameterError("schedule: alpha must lie in [0,1], got " +
                         std::to_string(alpha));
  }
  auto positive_rate = [](double v, const char* name) {
    if (!(v > 0.0)) {
      throw ParameterError(std::string("schedule: ") + name +
                           " must be positive, got " + std::to_string(v));
    }
  };
  positive_rate(noise_std, "noise_std");
  positive_rate(eta, "eta");
  positive_rate(lambda, "lambda");
  positive_rate(tau_g, "tau_g");
}

size_t MetricsLog::count_phase(std::string_view phase) const {
  size_t n = 0;
  for (const MetricRecord& r : records) {
    if (r.phase == phase) {
      ++n;
    }
  }
  return n;
}

std::vector<const MetricRecord*> MetricsLog::with_phase(
    std::string_view phase) const {
  std::vector<const MetricRecord*> out;
  for (const MetricRecord& r : records) {
    if (r.phase == phase) {
      out.push_back(&r);
    }
  }
  return out;
}

const MetricRecord* MetricsLog::last_eval() const {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->phase == "EVAL") {
      return &*it;
    }
  }
  return nullptr;
}

void MetricsLog::append(const MetricsLog& other) {
  records.insert(records.end(), other.records.begin(), other.records.end());
}

void write_metrics_log(std::ostream& out, const MetricsLog& log) {
  out << kMetricsHeader << "\n";
  for (const MetricRecord& r : log.records) {
    out << r.outer << '\t' << r.phase << '\t' << r.inner;
    if (r.phase == "EVAL") {
      out << "\taccuracy=" << format_metric(r.accuracy)
          << "\tmacro_f1=" << format_metric(r.macro_f1);
      for (size_t c = 0; c < r.per_class_f1.size(); ++c) {
        out << "\tf1_" << c << "=" << format_metric(r.per_class_f1[c]);
      }
    } else {
      out << '\t' << format_metric(r.l_a) << '\t' << format_metric(r.l_f)
          << '\t' << format_metric(r.l_t) << '\t' << format_metric(r.l_g)
          << '\t' << format_metric(r.l_ood) << '\t' << format_metric(r.l)
          << '\t' << format_metric(r.eta);
    }
    out << '\n';
  }
}

MetricsLog read_metrics_log(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw IoError("metrics log: empty stream");
  }
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  if (line != kMetricsHeader) {
    throw IoError("metrics log: unrecognized header '" + line + "'");
  }
  MetricsLog log;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (line.empty()) {
      continue;
    }
    std::vector<std::string> fields = split_tabs(line);
    if (fields.size() < 3) {
      throw IoError("metrics log: too few fields on line " +
                    std::to_string(line_no));
    }
    MetricRecord r;
    r.outer = parse_count(fields[0], line_no);
    r.phase = fields[1];
    r.inner = parse_count(fields[2], line_no);
    if (r.phase == "EVAL") {
      for (size_t i = 3; i < fields.size(); ++i) {
        size_t eq = fields[i].find('=');
        if (eq == std::string::npos) {
          throw IoError("metrics log: expected key=value on line " +
                        std::to_string(line_no));
        }
        std::string key = fields[i].substr(0, eq);
        double value = parse_metric(fields[i].substr(eq + 1), line_no);
        if (key == "accuracy") {
          r.accuracy = value;
        } else if (key == "macro_f1") {
          r.macro_f1 = value;
        } else if (key.rfind("f1_", 0) == 0) {
          size_t index =
              static_cast<size_t>(parse_count(key.substr(3), line_no));
          if (index != r.per_class_f1.size()) {
            throw IoError("metrics log: out-of-order per-class entry on line " +
                          std::to_string(line_no));
          }
          r.per_class_f1.push_back(value);
        } else {
          throw IoError("metrics log: unknown field '" + key + "' on line " +
                        std::to_string(line_no));
        }
      }
    } else {
      if (fields.size() != 10) {
        throw IoError("metrics log: expected 10 fields on line " +
                      std::to_string(line_no) + ", got " +
                      std::to_string(fields.size()));
      }
      r.l_a = parse_metric(fields[3], line_no);
      r.l_f = parse_metric(fields[4], line_no);
      r.l_t = parse_metric(fields[5], line_no);
      r.l_g = parse_metric(fields[6], line_no);
      r.l_ood = parse_metric(fields[7], line_no);
      r.l = parse_metric(fields[8], line_no);
      r.eta = parse_metric(fields[9], line_no);
    }
    log.records.push_back(std::move(r));
  }
  return log;
}

void save_metrics_log(const std::string& path, const MetricsLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  write_metrics_log(out, log);
  if (!out) {
    throw IoError("failed while writing '" + path + "'");
  }
}

MetricsLog load_metrics_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  return read_metrics_log(in);
}

MetricsLog train_supervised(ClassifierModel& model, const TaskDataset& train,
                            const TaskDataset& dev,
                            const DistillSchedule& schedule, RngState& rng) {
  return run_epoch_loop(model, train, dev, schedule, rng, "supervised training",
                        [&](const TokenBatch& batch) {
                          return cross_entropy_with_logits(
                              classify_hard(model, batch), batch.labels);
                        });
}

ClassifierModel train_teacher(const ClassifierConfig& config,
                              const TaskDataset& train, const TaskDataset& dev,
                              const DistillSchedule& schedule, RngState& rng,
                              MetricsLog* log) {
  RngState init_rng = rng.substream("init");
  ClassifierModel model = ClassifierModel::init(config, init_rng);
  RngState train_rng = rng.substream("sup");
  MetricsLog trained = train_supervised(model, train, dev, schedule, train_rng);
  model.set_trainable(false);
  if (log != nullptr) {
    *log = std::move(trained);
  }
  return model;
}

MetricsLog pretrain_generator(GeneratorModel& gen, const OodDataset& ood,
                              const DistillSchedule& schedule, RngState& rng) {
  schedule.validate();
  if (ood.examples().empty()) {
    throw DataError("generator pre-training: the pool is empty");
  }
  gen.set_trainable(true);
  std::vector<Tensor> params = gen.parameters();
  AdamW opt(params);
  RngState order_rng = rng.substream("order");
  RngState noise_rng = rng.substream("noise");

  int64_t n = static_cast<int64_t>(ood.examples().size());
  int64_t per_epoch = ceil_div(n, schedule.batch);
  LinearDecay decay{schedule.lambda, schedule.pretrain_epochs * per_epoch};
  int64_t seq_len = gen.config.seq_len;

  MetricsLog log;
  int64_t update = 0;
  std::vector<size_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), size_t{0});

  for (int64_t epoch = 1; epoch <= schedule.pretrain_epochs; ++epoch) {
    order_rng.shuffle(order);
    for (int64_t b = 0; b < per_epoch; ++b) {
      size_t lo = static_cast<size_t>(b * schedule.batch);
      size_t hi = std::min(static_cast<size_t>(n),
                           lo + static_cast<size_t>(schedule.batch));
      std::vector<size_t> chunk(order.begin() + static_cast<ptrdiff_t>(lo),
                                order.begin() + static_cast<ptrdiff_t>(hi));
      TokenBatch x_k = pack_indices(ood.examples(), chunk, seq_len, false);
      Tensor z = Tensor::gaussian({x_k.batch, seq_len, gen.config.noise_dim},
                                  schedule.noise_std, noise_rng);
      SoftBatch x_p =
          gumbel_softmax(generate_logits(gen, z), schedule.tau_g, noise_rng);
      Tensor loss = pretrain_loss(x_k, x_p);
      double value = loss.item();
      loss.backward();
      double gnorm = grad_norm(params);
      if (!std::isfinite(value) || !std::isfinite(gnorm)) {
        throw_divergence("generator pre-training", epoch, "PG", b + 1,
                         {{"l", value},
                          {"grad_norm", gnorm},
                          {"z_norm", l2_norm(z)}});
      }
      ++update;
      double rate = decay.rate_for_update(update);
      opt.step(rate);

      MetricRecord r;
      r.outer = epoch;
      r.phase = "PG";
      r.inner = b + 1;
      r.l = value;
      r.eta = rate;
      log.records.push_back(std::move(r));
    }
  }
  return log;
}

namespace {

// Everything the alternating loop shares between the zero-shot and the
// few-shot variants: the drawn batch may or may not carry labels, and the
// drawn-batch loss term is injected by the caller.
struct AlternatingLoop {
  const ClassifierModel& teacher;
  ClassifierModel& student;
  GeneratorModel* gen;  // null for the KD-only baseline
  const DistillSchedule& schedule;
  const TaskDataset* monitor_dev;
  const char* loop_name;

  // Produces the drawn-batch loss term given the packed batch and the
  // teacher's logits on it (computed once per outer step, graph-free).
  std::function<Tensor(const TokenBatch&, const Tensor&)> drawn_loss;

  MetricsLog run(std::span<const Example> pool, bool with_labels,
                 RngState& rng) {
    schedule.validate();
    require_frozen(teacher, loop_name);
    if (pool.empty()) {
      throw DataError(std::string(loop_name) + ": the pool is empty");
    }
    const ClassifierConfig& tc = teacher.config;
    const ClassifierConfig& sc = student.config;
    if (tc.vocab_size != sc.vocab_size || tc.classes != sc.classes ||
        tc.max_len != sc.max_len) {
      throw ContractError(std::string(loop_name) +
                          ": teacher and student configs disagree");
    }
    if (gen != nullptr && (gen->config.vocab_size != tc.vocab_size ||
                           gen->config.seq_len != tc.max_len)) {
      throw ContractError(std::string(loop_name) +
                          ": generator config disagrees with the teacher");
    }

    std::vector<Tensor> student_params = student.parameters();
    AdamW student_opt(student_params);
    LinearDecay student_decay{
        schedule.eta, schedule.outer_steps * schedule.student_steps};
    std::vector<Tensor> gen_params;
    std::optional<AdamW> gen_opt;
    LinearDecay gen_decay{schedule.eta,
                          schedule.outer_steps * schedule.gen_steps};
    if (gen != nullptr) {
      gen->set_trainable(true);
      gen_params = gen->parameters();
      gen_opt.emplace(gen_params);
    }

    BatchCycler cycler(pool.size(), schedule.batch,
                       schedule.sample_with_replacement,
                       rng.substream("ood"));
    RngState noise_rng = rng.substream("gen");

    MetricsLog log;
    int64_t gen_update = 0;
    int64_t student_update = 0;
    double best_mean_loss = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best = snapshot_values(student_params);

    for (int64_t k = 1; k <= schedule.outer_steps; ++k) {
      std::vector<size_t> indices = cycler.next();
      TokenBatch x_k = pack_indices(pool, indices, tc.max_len, with_labels);
      Tensor t_drawn_logits;
      {
        NoGradGuard guard;
        t_drawn_logits = classify_hard(teacher, x_k);
      }

      if (gen != nullptr) {
        // Adversarial phase: only the generator moves.
        student.set_trainable(false);
        gen->set_trainable(true);
        for (int64_t i = 1; i <= schedule.gen_steps; ++i) {
          Tensor z =
              Tensor::gaussian({x_k.batch, gen->config.seq_len,
                                gen->config.noise_dim},
                               schedule.noise_std, noise_rng);
          SoftBatch x_p = gumbel_softmax(generate_logits(*gen, z),
                                         schedule.tau_g, noise_rng);
          Tensor t_out = softmax(classify_soft(teacher, x_p));
          Tensor s_out = softmax(classify_soft(student, x_p));
          GeneratorLosses parts = adv_generator_loss(t_out, s_out, x_k, x_p);
          Tensor update_loss =
              schedule.use_fidelity ? parts.total : parts.adversarial;
          double l_a = parts.adversarial.item();
          double l_f = parts.fidelity.item();
          double l_t = update_loss.item();
          update_loss.backward();
          double gnorm = grad_norm(gen_params);
          if (!std::isfinite(l_t) || !std::isfinite(gnorm)) {
            throw_divergence(loop_name, k, "ADV", i,
                             {{"l_a", l_a},
                              {"l_f", l_f},
                              {"l_t", l_t},
                              {"grad_norm", gnorm},
                              {"z_norm", l2_norm(z)}});
          }
          ++gen_update;
          double rate = gen_decay.rate_for_update(gen_update);
          gen_opt->step(rate);

          MetricRecord r;
          r.outer = k;
          r.phase = "ADV";
          r.inner = i;
          r.l_a = l_a;
          r.l_f = schedule.use_fidelity ? l_f : MetricRecord::kAbsent;
          r.l_t = l_t;
          r.eta = rate;
          log.records.push_back(std::move(r));
        }
        gen->set_trainable(false);
      }

      // Distillation phase: only the student moves.
      student.set_trainable(true);
      double loss_sum = 0.0;
      for (int64_t j = 1; j <= schedule.student_steps; ++j) {
        Tensor drawn_term = drawn_loss(x_k, t_drawn_logits);
        Tensor loss;
        double l_g = MetricRecord::kAbsent;
        Tensor z;
        if (gen != nullptr) {
          SoftBatch x_p;
          {
            NoGradGuard guard;
            z = Tensor::gaussian({x_k.batch, gen->config.seq_len,
                                  gen->config.noise_dim},
                                 schedule.noise_std, noise_rng);
            x_p = gumbel_softmax(generate_logits(*gen, z), schedule.tau_g,
                                 noise_rng);
          }
          Tensor t_gen_probs;
          {
            NoGradGuard guard;
            t_gen_probs = softmax(classify_soft(teacher, x_p));
          }
          Tensor s_gen_probs = softmax(classify_soft(student, x_p));
          Tensor gen_term = kl_div(t_gen_probs, s_gen_probs);
          l_g = gen_term.item();
          loss = add(scale(gen_term, schedule.alpha),
                     scale(drawn_term, 1.0 - schedule.alpha));
        } else {
          loss = drawn_term;
        }
        double l_drawn = drawn_term.item();
        double value = loss.item();
        loss.backward();
        double gnorm = grad_norm(student_params);
        if (!std::isfinite(value) || !std::isfinite(gnorm)) {
          throw_divergence(loop_name, k, "KD", j,
                           {{"l_g", l_g},
                            {"l_ood", l_drawn},
                            {"l", value},
                            {"grad_norm", gnorm},
                            {"z_norm", z.defined() ? l2_norm(z)
                                                   : MetricRecord::kAbsent}});
        }
        ++student_update;
        double rate = student_decay.rate_for_update(student_update);
        student_opt.step(rate);
        loss_sum += value;

        MetricRecord r;
        r.outer = k;
        r.phase = "KD";
        r.inner = j;
        r.l_g = l_g;
        r.l_ood = l_drawn;
        r.l = value;
        r.eta = rate;
        log.records.push_back(std::move(r));
      }

      double mean_loss = loss_sum / static_cast<double>(schedule.student_steps);
      if (mean_loss < best_mean_loss) {
        best_mean_loss = mean_loss;
        best = snapshot_values(student_params);
      }
      if (monitor_dev != nullptr) {
        log.records.push_back(
            eval_record(k, student, *monitor_dev, schedule.batch));
      }
    }

    restore_values(student_params, best);
    student.set_trainable(true);
    if (gen != nullptr) {
      gen->set_trainable(true);
    }
    return log;
  }
};

}  // namespace

MetricsLog zskd(const ClassifierModel& teacher, ClassifierModel& student,
                GeneratorModel& gen, const OodDataset& ood,
                const DistillSchedule& schedule, RngState& rng,
                const TaskDataset* monitor_dev) {
  AlternatingLoop loop{
      .teacher = teacher,
      .student = student,
      .gen = &gen,
      .schedule = schedule,
      .monitor_dev = monitor_dev,
      .loop_name = "adversarial distillation",
      .drawn_loss =
          [&](const TokenBatch& x_k, const Tensor& t_logits) {
            Tensor t_probs;
            {
              NoGradGuard guard;
              t_probs = softmax(t_logits);
            }
            Tensor s_probs = softmax(classify_hard(student, x_k));
            return kl_div(t_probs, s_probs);
          },
  };
  return loop.run(ood.examples(), /*with_labels=*/false, rng);
}

MetricsLog kd_only(const ClassifierModel& teacher, ClassifierModel& student,
                   const OodDataset& ood, const DistillSchedule& schedule,
                   RngState& rng, const TaskDataset* monitor_dev) {
  AlternatingLoop loop{
      .teacher = teacher,
      .student = student,
      .gen = nullptr,
      .schedule = schedule,
      .monitor_dev = monitor_dev,
      .loop_name = "distillation",
      .drawn_loss =
          [&](const TokenBatch& x_k, const Tensor& t_logits) {
            Tensor t_probs;
            {
              NoGradGuard guard;
              t_probs = softmax(t_logits);
            }
            Tensor s_probs = softmax(classify_hard(student, x_k));
            return kl_div(t_probs, s_probs);
          },
  };
  return loop.run(ood.examples(), /*with_labels=*/false, rng);
}

std::string to_string(FewshotRegime regime) {
  switch (regime) {
    case FewshotRegime::Standard: return "standard";
    case FewshotRegime::KD: return "kd";
    case FewshotRegime::KDAdv: return "kd-adv";
  }
  throw ParameterError("unknown few-shot regime value");
}

FewshotRegime fewshot_regime_from_string(std::string_view name) {
  if (name == "standard") {
    return FewshotRegime::Standard;
  }
  if (name == "kd") {
    return FewshotRegime::KD;
  }
  if (name == "kd-adv") {
    return FewshotRegime::KDAdv;
  }
  throw ParameterError("unknown few-shot regime '" + std::string(name) + "'");
}

TaskDataset take_per_class(const TaskDataset& data, int64_t per_class) {
  if (per_class <= 0) {
    throw ParameterError("take_per_class: need a positive count, got " +
                         std::to_string(per_class));
  }
  if (data.classes < 2) {
    throw ContractError("take_per_class: dataset must declare its classes");
  }
  std::vector<int64_t> taken(static_cast<size_t>(data.classes), 0);
  TaskDataset out;
  out.kind = data.kind;
  out.classes = data.classes;
  for (const Example& ex : data.examples) {
    if (ex.label < 0 || ex.label >= data.classes) {
      throw DataError("take_per_class: example with label " +
                      std::to_string(ex.label) + " outside " +
                      std::to_string(data.classes) + " classes");
    }
    if (taken[static_cast<size_t>(ex.label)] < per_class) {
      ++taken[static_cast<size_t>(ex.label)];
      out.examples.push_back(ex);
    }
  }
  for (int64_t c = 0; c < data.classes; ++c) {
    if (taken[static_cast<size_t>(c)] == 0) {
      throw DataError("take_per_class: class " + std::to_string(c) +
                      " has no examples");
    }
  }
  return out;
}

ClassifierModel fewshot(FewshotRegime regime, const ClassifierModel& teacher,
                        const ClassifierConfig& student_config,
                        const TaskDataset& few, const TaskDataset& dev,
                        GeneratorModel* gen, const DistillSchedule& schedule,
                        RngState& rng, MetricsLog* log) {
  schedule.validate();
  if (few.examples.empty()) {
    throw DataError("few-shot training: no labeled examples");
  }
  RngState init_rng = rng.substream("init");
  ClassifierModel student = ClassifierModel::init(student_config, init_rng);
  MetricsLog result;

  switch (regime) {
    case FewshotRegime::Standard: {
      RngState train_rng = rng.substream("sup");
      result = train_supervised(student, few, dev, schedule, train_rng);
      break;
    }
    case FewshotRegime::KD: {
      require_frozen(teacher, "few-shot distillation");
      RngState train_rng = rng.substream("sup");
      result = run_epoch_loop(
          student, few, dev, schedule, train_rng, "few-shot distillation",
          [&](const TokenBatch& batch) {
            Tensor t_logits;
            {
              NoGradGuard guard;
              t_logits = classify_hard(teacher, batch);
            }
            return kd_loss(batch.labels, classify_hard(student, batch),
                           t_logits, KDLossConfig{});
          });
      break;
    }
    case FewshotRegime::KDAdv: {
      require_frozen(teacher, "few-shot adversarial distillation");
      if (gen == nullptr) {
        throw ContractError(
            "few-shot adversarial distillation needs a generator");
      }
      AlternatingLoop loop{
          .teacher = teacher,
          .student = student,
          .gen = gen,
          .schedule = schedule,
          .monitor_dev = &dev,
          .loop_name = "few-shot adversarial distillation",
          .drawn_loss =
              [&](const TokenBatch& x_k, const Tensor& t_logits) {
                return kd_loss(x_k.labels, classify_hard(student, x_k),
                               t_logits, KDLossConfig{});
              },
      };
      RngState loop_rng = rng.substream("adv");
      result = loop.run(few.examples, /*with_labels=*/true, loop_rng);
      break;
    }
  }
  if (log != nullptr) {
    *log = std::move(result);
  }
  return student;
}

double generator_token_entropy(const GeneratorModel& gen, int64_t n_samples,
                               const DistillSchedule& schedule,
                               RngState& rng) {
  if (n_samples <= 0) {
    throw ParameterError("generator_token_entropy: need a positive sample "
                         "count");
  }
  NoGradGuard guard;
  Tensor z = Tensor::gaussian({n_samples, gen.config.seq_len,
                               gen.config.noise_dim},
                              schedule.noise_std, rng);
  Tensor probs = softmax(generate_logits(gen, z));
  int64_t vocab = gen.config.vocab_size;
  int64_t positions = probs.numel() / vocab;
  const std::vector<double>& data = probs.vec();
  double total = 0.0;
  for (int64_t pos = 0; pos < positions; ++pos) {
    double h = 0.0;
    for (int64_t v = 0; v < vocab; ++v) {
      double p = data[static_cast<size_t>(pos * vocab + v)];
      if (p > 0.0) {
        h -= p * std::log(p);
      }
    }
    total += h;
  }
  return total / static_cast<double>(positions);
}

std::vector<double> generator_unigram(const GeneratorModel& gen,
                                      int64_t n_samples,
                                      const DistillSchedule& schedule,
                                      RngState& rng) {
  if (n_samples <= 0) {
    throw ParameterError("generator_unigram: need a positive sample count");
  }
  NoGradGuard guard;
  Tensor z = Tensor::gaussian({n_samples, gen.config.seq_len,
                               gen.config.noise_dim},
                              schedule.noise_std, rng);
  SoftBatch x_p =
      gumbel_softmax(generate_logits(gen, z), schedule.tau_g, rng);
  int64_t vocab = gen.config.vocab_size;
  int64_t positions = x_p.probs.numel() / vocab;
  const std::vector<double>& data = x_p.probs.vec();
  std::vector<double> freq(static_cast<size_t>(vocab), 0.0);
  for (int64_t pos = 0; pos < positions; ++pos) {
    int64_t best = 0;
    const double* row = data.data() + pos * vocab;
    for (int64_t v = 1; v < vocab; ++v) {
      if (row[v] > row[best]) {
        best = v;
      }
    }
    freq[static_cast<size_t>(best)] += 1.0;
  }
  for (double& f : freq) {
    f /= static_cast<double>(positions);
  }
  return freq;
}

std::vector<double> dataset_unigram(const OodDataset& ood, int64_t max_len,
                                    int64_t vocab_size) {
  if (ood.examples().empty()) {
    throw DataError("dataset_unigram: the pool is empty");
  }
  std::vector<double> freq(static_cast<size_t>(vocab_size), 0.0);
  int64_t positions = 0;
  constexpr size_t kChunk = 256;
  const auto& examples = ood.examples();
  for (size_t lo = 0; lo < examples.size(); lo += kChunk) {
    size_t hi = std::min(examples.size(), lo + kChunk);
    std::span<const Example> part(examples.data() + lo, hi - lo);
    TokenBatch batch = pack_examples(part, max_len, /*with_labels=*/false);
    for (int32_t id : batch.ids) {
      if (id < 0 || static_cast<int64_t>(id) >= vocab_size) {
        throw DataError("dataset_unigram: token id " + std::to_string(id) +
                        " outside vocab of " + std::to_string(vocab_size));
      }
      freq[static_cast<size_t>(id)] += 1.0;
    }
    positions += batch.batch * batch.len;
  }
  for (double& f : freq) {
    f /= static_cast<double>(positions);
  }
  return freq;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw ContractError("total_variation: length mismatch, " +
                        std::to_string(p.size()) + " vs " +
                        std::to_string(q.size()));
  }
  double sum = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    sum += std::abs(p[i] - q[i]);
  }
  return 0.5 * sum;
}

}  // namespace zskd
