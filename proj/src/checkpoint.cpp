// Copyright 2026 The cunet-cpp Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "cunet/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cunet/errors.hpp"

namespace cunet {

namespace {
constexpr char kMagic[] = "CUNETCKPT1";

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace

const Checkpoint::Entry* Checkpoint::find(const std::string& name) const {
  for (const Entry& e : tensors)
    if (e.name == name) return &e;
  return nullptr;
}

uint64_t fnv1a64(const std::string& text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ostringstream head;
  head << kMagic << "\n";
  char digest[32];
  std::snprintf(digest, sizeof digest, "%016" PRIx64, ckpt.config_digest);
  head << "digest " << digest << "\n";
  head << "epoch " << ckpt.epoch << "\n";
  head << "val_loss " << format_double(ckpt.val_loss) << "\n";
  head << "opt_step " << ckpt.opt_step << "\n";
  head << "config_bytes " << ckpt.config_text.size() << "\n";
  head << ckpt.config_text;
  head << "tensors " << ckpt.tensors.size() << "\n";

  size_t offset = 0;
  for (const Checkpoint::Entry& e : ckpt.tensors) {
    head << e.name << " f32 " << e.shape.size();
    for (int d : e.shape) head << " " << d;
    head << " " << offset << "\n";
    offset += e.data.size() * sizeof(float);
  }
  head << "data " << offset << "\n";

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("save_checkpoint: cannot open " + path);
  const std::string h = head.str();
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const Checkpoint::Entry& e : ckpt.tensors) {
    // in-memory floats are already little endian on every supported target
    os.write(reinterpret_cast<const char*>(e.data.data()),
             static_cast<std::streamsize>(e.data.size() * sizeof(float)));
  }
  if (!os) throw IoError("save_checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("load_checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  size_t pos = 0;
  auto read_line = [&]() {
    const size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw FormatError("load_checkpoint: truncated file " + path);
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };

  if (read_line() != kMagic) throw FormatError("load_checkpoint: bad magic in " + path);

  Checkpoint ckpt;
  {
    std::istringstream ls(read_line());
    std::string key, hex;
    ls >> key >> hex;
    if (key != "digest") throw FormatError("load_checkpoint: expected digest line");
    ckpt.config_digest = std::strtoull(hex.c_str(), nullptr, 16);
  }
  {
    std::istringstream ls(read_line());
    std::string key;
    ls >> key >> ckpt.epoch;
    if (key != "epoch" || ls.fail()) throw FormatError("load_checkpoint: expected epoch line");
  }
  {
    std::istringstream ls(read_line());
    std::string key, repr;
    ls >> key >> repr;
    if (key != "val_loss") throw FormatError("load_checkpoint: expected val_loss line");
    ckpt.val_loss = std::strtod(repr.c_str(), nullptr);
  }
  {
    std::istringstream ls(read_line());
    std::string key;
    ls >> key >> ckpt.opt_step;
    if (key != "opt_step" || ls.fail())
      throw FormatError("load_checkpoint: expected opt_step line");
  }
  size_t config_bytes = 0;
  {
    std::istringstream ls(read_line());
    std::string key;
    ls >> key >> config_bytes;
    if (key != "config_bytes" || ls.fail())
      throw FormatError("load_checkpoint: expected config_bytes line");
  }
  if (pos + config_bytes > bytes.size())
    throw FormatError("load_checkpoint: truncated config in " + path);
  ckpt.config_text = bytes.substr(pos, config_bytes);
  pos += config_bytes;

  size_t n_tensors = 0;
  {
    std::istringstream ls(read_line());
    std::string key;
    ls >> key >> n_tensors;
    if (key != "tensors" || ls.fail())
      throw FormatError("load_checkpoint: expected tensors line");
  }

  struct Meta {
    std::string name;
    std::vector<int> shape;
    size_t offset = 0;
    size_t numel = 1;
  };
  std::vector<Meta> metas;
  metas.reserve(n_tensors);
  for (size_t i = 0; i < n_tensors; ++i) {
    std::istringstream ls(read_line());
    Meta m;
    std::string dtype;
    size_t ndim = 0;
    ls >> m.name >> dtype >> ndim;
    if (ls.fail() || dtype != "f32")
      throw FormatError("load_checkpoint: bad tensor manifest line");
    m.shape.resize(ndim);
    for (size_t d = 0; d < ndim; ++d) {
      ls >> m.shape[d];
      m.numel *= static_cast<size_t>(m.shape[d]);
    }
    ls >> m.offset;
    if (ls.fail()) throw FormatError("load_checkpoint: bad tensor manifest line");
    metas.push_back(std::move(m));
  }

  size_t payload_bytes = 0;
  {
    std::istringstream ls(read_line());
    std::string key;
    ls >> key >> payload_bytes;
    if (key != "data" || ls.fail()) throw FormatError("load_checkpoint: expected data line");
  }
  if (pos + payload_bytes > bytes.size())
    throw FormatError("load_checkpoint: truncated payload in " + path);

  for (const Meta& m : metas) {
    if (m.offset + m.numel * sizeof(float) > payload_bytes)
      throw FormatError("load_checkpoint: tensor outside payload in " + path);
    Checkpoint::Entry e;
    e.name = m.name;
    e.shape = m.shape;
    e.data.resize(m.numel);
    std::memcpy(e.data.data(), bytes.data() + pos + m.offset, m.numel * sizeof(float));
    ckpt.tensors.push_back(std::move(e));
  }
  return ckpt;
}

}  // namespace cunet
