#pragma once

// Experiment configuration: one flat key=value file capturing everything a
// run needs — data synthesis sizes, vocabulary shape, the full training
// schedule and the master seed. A run directory always contains the exact
// config that produced it, so any artifact can be regenerated from the
// directory alone.

#include <cstdint>
#include <iosfwd>
#include <string>

#include "zskd/corpus.hpp"
#include "zskd/distill.hpp"

namespace zskd {

struct ExperimentConfig {
  // Data.
  std::string corpus = "data/tiny_corpus.txt";
  OodTaskKind kind = OodTaskKind::SingleSentence;
  int64_t vocab_size = 256;
  int64_t merges = 600;
  int64_t max_len = 16;
  int64_t train_n = 384;
  int64_t dev_n = 192;
  int64_t ood_mult = 4;      // heuristic pool size as a multiple of train_n
  double ood_perturb = 0.9;  // perturbation intensity of synthesized text
  int64_t fewshot_per_class = 200;

  // Run identity.
  uint64_t seed = 1;
  std::string out = "runs/default";

  DistillSchedule schedule;

  int64_t ood_n() const { return ood_mult * train_n; }

  // Range checks over every field (the schedule included); throws
  // ParameterError naming the offending field.
  void validate() const;
};

// First line "format=zskd-config/1", then key=value lines in a fixed
// order. parse_config rejects a wrong or missing format line (IoError)
// and unknown, duplicate or malformed keys (ParameterError listing every
// offending key).
std::string config_text(const ExperimentConfig& config);
ExperimentConfig parse_config(std::istream& in);
void save_config(const std::string& path, const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

// FNV-1a digest over a file's bytes; run provenance records store one per
// artifact. Missing file -> IoError.
uint64_t file_digest(const std::string& path);

}  // namespace zskd
