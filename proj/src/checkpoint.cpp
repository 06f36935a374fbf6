#include "zskd/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "zskd/error.hpp"

namespace zskd {

namespace {

constexpr char kMagic[4] = {'Z', 'S', 'K', 'D'};
constexpr uint32_t kFormatVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  os.write(buf, 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
  os.write(buf, 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& is, const std::string& path) {
  char buf[4];
  if (!is.read(buf, 4)) {
    throw IoError("truncated checkpoint: " + path);
  }
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  return v;
}

uint64_t get_u64(std::istream& is, const std::string& path) {
  char buf[8];
  if (!is.read(buf, 8)) {
    throw IoError("truncated checkpoint: " + path);
  }
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[i])) << (8 * i);
  }
  return v;
}

std::string get_string(std::istream& is, const std::string& path) {
  uint32_t n = get_u32(is, path);
  if (n > (1u << 20)) {
    throw IoError("implausible string length in checkpoint: " + path);
  }
  std::string s(n, '\0');
  if (n && !is.read(s.data(), n)) {
    throw IoError("truncated checkpoint: " + path);
  }
  return s;
}

int64_t config_int(const ConfigRecord& record, const std::string& key,
                   const std::string& path) {
  for (const auto& [k, v] : record) {
    if (k == key) {
      return std::stoll(v);
    }
  }
  throw IoError("checkpoint " + path + " lacks config key " + key);
}

// Copies loaded blocks into a freshly initialized model, matched by name.
template <typename Model>
void fill_params(Model& model, const Checkpoint& ckpt,
                 const std::string& path) {
  NamedParams dest = model.named_parameters();
  if (dest.size() != ckpt.params.size()) {
    throw IoError("checkpoint " + path + " holds " +
                  std::to_string(ckpt.params.size()) + " blocks, expected " +
                  std::to_string(dest.size()));
  }
  for (size_t i = 0; i < dest.size(); ++i) {
    auto& [name, p] = dest[i];
    const auto& [got_name, got] = ckpt.params[i];
    if (name != got_name || p.shape() != got.shape()) {
      throw IoError("checkpoint " + path + " block " + got_name +
                    " does not match expected " + name);
    }
    p.vec() = got.vec();
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw IoError("cannot open for writing: " + path);
  }
  os.write(kMagic, 4);
  put_u32(os, kFormatVersion);
  put_string(os, ckpt.kind);
  put_u32(os, static_cast<uint32_t>(ckpt.config.size()));
  for (const auto& [k, v] : ckpt.config) {
    put_string(os, k);
    put_string(os, v);
  }
  put_u32(os, static_cast<uint32_t>(ckpt.params.size()));
  for (const auto& [name, p] : ckpt.params) {
    put_string(os, name);
    put_u32(os, static_cast<uint32_t>(p.ndim()));
    for (int64_t d : p.shape()) {
      put_u64(os, static_cast<uint64_t>(d));
    }
    for (double x : p.vec()) {
      put_u64(os, std::bit_cast<uint64_t>(x));
    }
  }
  if (!os) {
    throw IoError("write failed: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IoError("cannot open: " + path);
  }
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("not a ZSKD checkpoint: " + path);
  }
  uint32_t version = get_u32(is, path);
  if (version != kFormatVersion) {
    throw IoError("checkpoint " + path + " has format version " +
                  std::to_string(version) + ", this build reads " +
                  std::to_string(kFormatVersion));
  }
  Checkpoint ckpt;
  ckpt.kind = get_string(is, path);
  uint32_t config_n = get_u32(is, path);
  for (uint32_t i = 0; i < config_n; ++i) {
    std::string k = get_string(is, path);
    std::string v = get_string(is, path);
    ckpt.config.emplace_back(std::move(k), std::move(v));
  }
  uint32_t param_n = get_u32(is, path);
  for (uint32_t i = 0; i < param_n; ++i) {
    std::string name = get_string(is, path);
    uint32_t ndim = get_u32(is, path);
    if (ndim > 8) {
      throw IoError("implausible rank in checkpoint: " + path);
    }
    Shape shape;
    for (uint32_t d = 0; d < ndim; ++d) {
      shape.push_back(static_cast<int64_t>(get_u64(is, path)));
    }
    int64_t n = shape_numel(shape);
    std::vector<double> data(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) {
      data[static_cast<size_t>(j)] = std::bit_cast<double>(get_u64(is, path));
    }
    ckpt.params.emplace_back(std::move(name),
                             Tensor::from_data(std::move(shape), std::move(data)));
  }
  return ckpt;
}

void save_classifier(const std::string& path, const ClassifierModel& model) {
  const ClassifierConfig& c = model.config;
  Checkpoint ckpt;
  ckpt.kind = "classifier";
  ckpt.config = {{"vocab_size", std::to_string(c.vocab_size)},
                 {"max_len", std::to_string(c.max_len)},
                 {"layers", std::to_string(c.layers)},
                 {"hidden", std::to_string(c.hidden)},
                 {"heads", std::to_string(c.heads)},
                 {"classes", std::to_string(c.classes)}};
  ckpt.params = model.named_parameters();
  save_checkpoint(path, ckpt);
}

ClassifierModel load_classifier(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "classifier") {
    throw IoError("checkpoint " + path + " holds a " + ckpt.kind +
                  ", expected a classifier");
  }
  ClassifierConfig config;
  config.vocab_size = config_int(ckpt.config, "vocab_size", path);
  config.max_len = config_int(ckpt.config, "max_len", path);
  config.layers = config_int(ckpt.config, "layers", path);
  config.hidden = config_int(ckpt.config, "hidden", path);
  config.heads = config_int(ckpt.config, "heads", path);
  config.classes = config_int(ckpt.config, "classes", path);
  RngState scratch(0);
  ClassifierModel model = ClassifierModel::init(config, scratch);
  fill_params(model, ckpt, path);
  return model;
}

void save_generator(const std::string& path, const GeneratorModel& model) {
  const GeneratorConfig& c = model.config;
  Checkpoint ckpt;
  ckpt.kind = "generator";
  ckpt.config = {{"vocab_size", std::to_string(c.vocab_size)},
                 {"seq_len", std::to_string(c.seq_len)},
                 {"noise_dim", std::to_string(c.noise_dim)},
                 {"layers", std::to_string(c.layers)},
                 {"hidden", std::to_string(c.hidden)},
                 {"heads", std::to_string(c.heads)}};
  ckpt.params = model.named_parameters();
  save_checkpoint(path, ckpt);
}

GeneratorModel load_generator(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.kind != "generator") {
    throw IoError("checkpoint " + path + " holds a " + ckpt.kind +
                  ", expected a generator");
  }
  GeneratorConfig config;
  config.vocab_size = config_int(ckpt.config, "vocab_size", path);
  config.seq_len = config_int(ckpt.config, "seq_len", path);
  config.noise_dim = config_int(ckpt.config, "noise_dim", path);
  config.layers = config_int(ckpt.config, "layers", path);
  config.hidden = config_int(ckpt.config, "hidden", path);
  config.heads = config_int(ckpt.config, "heads", path);
  RngState scratch(0);
  GeneratorModel model = GeneratorModel::init(config, scratch);
  fill_params(model, ckpt, path);
  return model;
}

uint64_t param_digest(const NamedParams& params) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* bytes, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& [name, p] : params) {
    mix(name.data(), name.size());
    for (int64_t d : p.shape()) {
      mix(&d, sizeof(d));
    }
    mix(p.vec().data(), p.vec().size() * sizeof(double));
  }
  return h;
}

}  // namespace zskd
