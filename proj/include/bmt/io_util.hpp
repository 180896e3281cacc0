#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "bmt/common.hpp"

namespace bmt {

static_assert(std::endian::native == std::endian::little,
              "file containers are little-endian; big-endian hosts are unsupported");

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  require(static_cast<bool>(is), "truncated " + what);
  return v;
}

// Writes via a temp file in the same directory, then renames into place, so
// readers never observe a partially written artifact.
void atomic_write_file(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

void atomic_write_text(const std::filesystem::path& path, const std::string& text);

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

// Non-blank, non-'#' lines.
std::vector<std::string> read_manifest_lines(const std::filesystem::path& path);

}  // namespace bmt
