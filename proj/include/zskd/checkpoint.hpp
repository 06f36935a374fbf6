#pragma once

// Versioned binary model persistence: a "ZSKD" magic header, a format
// version, a flat config record, then named parameter blocks of raw
// little-endian 64-bit floats. Save -> load round trips byte-identically.

#include <string>
#include <utility>
#include <vector>

#include "zskd/models.hpp"

namespace zskd {

using ConfigRecord = std::vector<std::pair<std::string, std::string>>;

struct Checkpoint {
  std::string kind;  // "classifier" or "generator"
  ConfigRecord config;
  NamedParams params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

void save_classifier(const std::string& path, const ClassifierModel& model);
ClassifierModel load_classifier(const std::string& path);

void save_generator(const std::string& path, const GeneratorModel& model);
GeneratorModel load_generator(const std::string& path);

// Order-sensitive content digest of named parameters (FNV-1a over names,
// shapes and raw float bytes). Used to assert that frozen models never
// drift during training.
uint64_t param_digest(const NamedParams& params);

}  // namespace zskd
