// Copyright 2026 vtmc contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vtmc/ndcore/tape.hpp"

namespace vtmc {

/// Versioned named-weight container.
///
/// Byte layout (all integers little-endian):
///   "VTMCCKPT"                      8 bytes magic
///   u32 format_version              currently 1
///   u32 n, n bytes                  architecture tag (UTF-8)
///   u32 n, n bytes                  metadata, JSON text
///   u32 entry_count
///   per entry:
///     u32 n, n bytes                name
///     u32 ndim                      always 2
///     u64 rows, u64 cols
///     rows*cols IEEE-754 binary64   row-major, little-endian
struct ModelCheckpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t format_version = kFormatVersion;
  std::string arch;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Matrix>> entries;

  void add(const ParamList& params);
  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const;
  /// Copies stored values into `params` by name; shapes must match.
  void restore(const ParamList& params) const;
};

/// Writes to a sibling temp file and renames it into place.
void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint parse_checkpoint(const std::string& bytes);

/// Atomic text write (temp file + rename). Throws IoError with the path.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace vtmc
