#pragma once

#include <string>
#include <string_view>

namespace varscore {

// Reads a whole file; throws NotFoundError when it cannot be opened.
std::string read_file(const std::string& path);

// Writes via a temporary file in the same directory plus rename, so readers
// never observe a half-written artifact.
void write_file_atomic(const std::string& path, std::string_view content);

// Hex-encoded SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::string& path);

}  // namespace varscore
