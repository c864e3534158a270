#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace humt::io {

/// Writes `contents` to a temp file next to `path`, then renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Raw 32-byte SHA-256 digest.
std::string sha256_raw(std::string_view bytes);

std::string file_digest(const std::filesystem::path& path);

}  // namespace humt::io
