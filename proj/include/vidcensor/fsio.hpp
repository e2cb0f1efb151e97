#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "vidcensor/errors.hpp"

namespace vidcensor {

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  if (in.bad()) throw InputError("read failed for " + path.string());
  return bytes;
}

/// Writes to a temporary sibling and renames into place, so a crash or error
/// never leaves a partial file at the destination.
inline void atomic_write_file(const std::filesystem::path& path,
                              std::span<const std::uint8_t> bytes) {
  namespace fs = std::filesystem;
  const fs::path tmp =
      path.parent_path() /
      (path.filename().string() + ".tmp" + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) {
      out.close();
      fs::remove(tmp);
      throw InputError("write failed for " + path.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw InputError("rename failed for " + path.string() + ": " +
                     ec.message());
  }
}

}  // namespace vidcensor
