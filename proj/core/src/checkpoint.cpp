#include "ramtsf/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace ramtsf {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'S', 'F'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(out, bits);
}

class Reader {
 public:
  Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

  const char* take(size_t n) {
    if (pos_ + n > buf_.size()) {
      throw IoError(path_ + ": truncated checkpoint");
    }
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  uint32_t u32() {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(take(4));
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    return v;
  }

  uint64_t u64() {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(take(8));
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    return v;
  }

  double f64() {
    uint64_t bits = u64();
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string path_;
  size_t pos_ = 0;
};

std::string read_header_and_config(Reader& r, const std::string& path) {
  const char* magic = r.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError(path + ": not a checkpoint file (bad magic)");
  }
  uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  uint64_t stored_hash = r.u64();
  uint32_t cfg_len = r.u32();
  std::string cfg_text(r.take(cfg_len), cfg_len);
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(cfg_text);
  } catch (const ConfigError& e) {
    throw IoError(path + ": embedded config rejected: " + e.what());
  }
  if (config_hash(cfg) != stored_hash) {
    throw IoError(path + ": config hash mismatch (corrupt or edited file)");
  }
  return cfg_text;
}

}  // namespace

void save_checkpoint(const AmtsfmModel& model, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, config_hash(model.config()));
  std::string cfg_text = model_config_to_json(model.config());
  put_u32(out, static_cast<uint32_t>(cfg_text.size()));
  out += cfg_text;
  put_u64(out, static_cast<uint64_t>(model.parameters().size()));
  for (const NamedParam& p : model.parameters()) {
    put_u32(out, static_cast<uint32_t>(p.name.size()));
    out += p.name;
    const Shape& s = p.tensor.shape();
    put_u32(out, static_cast<uint32_t>(s.size()));
    for (int64_t dim : s) put_u64(out, static_cast<uint64_t>(dim));
    for (double v : p.tensor.data()) put_f64(out, v);
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(path + ": cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(path + ": write failed");
}

std::unique_ptr<AmtsfmModel> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for reading");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(buf, path);
  std::string cfg_text = read_header_and_config(r, path);
  ModelConfig cfg = model_config_from_json(cfg_text);

  std::unique_ptr<AmtsfmModel> model;
  {
    NoGradScope no_grad;
    model = std::make_unique<AmtsfmModel>(cfg);
  }
  uint64_t count = r.u64();
  if (count != model->parameters().size()) {
    throw IoError(path + ": parameter count mismatch (" + std::to_string(count) + " stored, " +
                  std::to_string(model->parameters().size()) + " expected)");
  }
  std::unordered_set<std::string> seen;
  for (uint64_t i = 0; i < count; ++i) {
    uint32_t name_len = r.u32();
    std::string name(r.take(name_len), name_len);
    if (!seen.insert(name).second) {
      throw IoError(path + ": duplicate parameter \"" + name + "\"");
    }
    Tensor* t = model->find_parameter(name);
    if (t == nullptr) throw IoError(path + ": unknown parameter \"" + name + "\"");
    uint32_t rank = r.u32();
    Shape s(rank);
    for (uint32_t k = 0; k < rank; ++k) s[k] = static_cast<int64_t>(r.u64());
    if (s != t->shape()) {
      throw IoError(path + ": parameter \"" + name + "\" has shape " + shape_str(s) +
                    ", expected " + shape_str(t->shape()));
    }
    auto dst = t->mutable_data();
    for (double& v : dst) {
      v = r.f64();
      if (!std::isfinite(v)) {
        throw IoError(path + ": parameter \"" + name + "\" holds a non-finite value");
      }
    }
  }
  if (!r.done()) throw IoError(path + ": trailing bytes after the last parameter");
  return model;
}

ModelConfig peek_checkpoint_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path + ": cannot open for reading");
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(buf, path);
  return model_config_from_json(read_header_and_config(r, path));
}

}  // namespace ramtsf
