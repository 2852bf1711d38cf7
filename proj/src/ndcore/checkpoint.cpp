// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#include "vtmc/ndcore/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vtmc {

namespace {

constexpr char kMagic[8] = {'V', 'T', 'M', 'C', 'C', 'K', 'P', 'T'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_str(std::string& out, const std::string& s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& b) : bytes_(b) {}

  template <typename U>
  U le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string str() {
    const auto n = le<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint: truncated data");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void ModelCheckpoint::add(const ParamList& params) {
  for (const Parameter* p : params) entries.emplace_back(p->name, p->value);
}

bool ModelCheckpoint::contains(const std::string& name) const {
  for (const auto& [n, m] : entries) {
    if (n == name) return true;
  }
  return false;
}

const Matrix& ModelCheckpoint::at(const std::string& name) const {
  for (const auto& [n, m] : entries) {
    if (n == name) return m;
  }
  throw ConfigError("checkpoint has no entry named " + name);
}

void ModelCheckpoint::restore(const ParamList& params) const {
  for (Parameter* p : params) {
    const Matrix& m = at(p->name);
    require_shape(m, p->value.rows(), p->value.cols(), "checkpoint entry " + p->name);
    p->value = m;
  }
}

std::string serialize_checkpoint(const ModelCheckpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, ckpt.format_version);
  put_str(out, ckpt.arch);
  put_str(out, ckpt.meta.dump());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& [name, m] : ckpt.entries) {
    put_str(out, name);
    put_le<std::uint32_t>(out, 2);
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Index i = 0; i < m.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m.data()[i]));
  }
  return out;
}

ModelCheckpoint parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("checkpoint: bad magic");
  }
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof(magic));
  ModelCheckpoint ckpt;
  ckpt.format_version = r.le<std::uint32_t>();
  if (ckpt.format_version != ModelCheckpoint::kFormatVersion) {
    throw IoError("checkpoint: unsupported format version " + std::to_string(ckpt.format_version));
  }
  ckpt.arch = r.str();
  ckpt.meta = nlohmann::json::parse(r.str());
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t e = 0; e < count; ++e) {
    std::string name = r.str();
    if (r.le<std::uint32_t>() != 2) throw IoError("checkpoint: entry " + name + " is not 2-D");
    const auto rows = static_cast<Index>(r.le<std::uint64_t>());
    const auto cols = static_cast<Index>(r.le<std::uint64_t>());
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<double>(r.le<std::uint64_t>());
    ckpt.entries.emplace_back(std::move(name), std::move(m));
  }
  return ckpt;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + tmp.string());
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " -> " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

}  // namespace vtmc
