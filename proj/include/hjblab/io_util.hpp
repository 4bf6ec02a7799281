#pragma once

#include <cstdint>
#include <string>

namespace hjb {

/// FNV-1a 64-bit content hash, hex-encoded; used for manifest checksums.
std::string fnv64_hex(const std::string& bytes);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Creates the directory (and parents) if needed.
void ensure_directory(const std::string& path);

} // namespace hjb
