#pragma once

// Shared on-disk container: 4-byte magic, u32 format version, u64 header
// length, UTF-8 JSON header, then a little-endian float32 payload blob.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "evpower/errors.hpp"

namespace evpower::binfile {

inline constexpr std::uint32_t kVersion = 1;

inline void write_file(const std::filesystem::path& path, const char magic[4],
                       const std::string& header_json,
                       const std::vector<float>& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot open for write: " + path.string());
  out.write(magic, 4);
  std::uint32_t version = kVersion;
  std::uint64_t header_len = header_json.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
  if (!blob.empty()) {
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(float)));
  }
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

struct Loaded {
  std::string header_json;
  std::vector<float> blob;
};

inline Loaded read_file(const std::filesystem::path& path, const char magic[4]) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open: " + path.string());
  char got_magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(got_magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in || std::memcmp(got_magic, magic, 4) != 0)
    throw Error(Errc::CorruptFile, "bad magic in " + path.string());
  if (version != kVersion)
    throw Error(Errc::CorruptFile, "unsupported format version in " + path.string());
  Loaded result;
  result.header_json.resize(header_len);
  in.read(result.header_json.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(Errc::CorruptFile, "truncated header in " + path.string());
  // Rest of the file is the float blob.
  std::streampos blob_start = in.tellg();
  in.seekg(0, std::ios::end);
  std::streampos end = in.tellg();
  in.seekg(blob_start);
  std::uint64_t blob_bytes = static_cast<std::uint64_t>(end - blob_start);
  if (blob_bytes % sizeof(float) != 0)
    throw Error(Errc::CorruptFile, "blob not float-aligned in " + path.string());
  result.blob.resize(blob_bytes / sizeof(float));
  if (!result.blob.empty()) {
    in.read(reinterpret_cast<char*>(result.blob.data()),
            static_cast<std::streamsize>(blob_bytes));
    if (!in) throw Error(Errc::CorruptFile, "truncated blob in " + path.string());
  }
  return result;
}

}  // namespace evpower::binfile
