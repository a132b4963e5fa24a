#pragma once
#include <cstdint>
#include <string>
#include <string_view>

// Small file + hashing helpers shared by plan/CSV writers.
namespace fibsim {

// Write-temp-then-rename so readers never observe a partial file.
// Throws std::runtime_error on I/O failure.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// FNV-1a 64-bit; used to stamp outputs with the config they came from.
uint64_t fnv1a64(std::string_view data);

// Round to 6 significant digits by round-tripping through "%.6g" so that
// re-serialization of a parsed value is byte-identical.
double quantize6(double v);

std::string format_g6(double v);

}  // namespace fibsim
