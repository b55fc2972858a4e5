#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pumpwatch {

// Minimal CSV helpers for the fixed, unquoted formats this project reads and
// writes. Numbers are rendered with std::to_chars shortest round-trip form so
// that write -> read reproduces the exact same doubles.

std::vector<std::string_view> split_csv(std::string_view line);

std::string fmt_double(double v);
std::string fmt_int(std::int64_t v);

double parse_double(std::string_view s, std::size_t row, const char* field);
std::int64_t parse_i64(std::string_view s, std::size_t row, const char* field);

// Read a whole text file into lines (strips \r\n and \n). Throws IoError.
std::vector<std::string> read_lines(const std::string& path);

// Read a whole file verbatim. Throws IoError.
std::string read_file(const std::string& path);

// Write text to a file atomically enough for our purposes. Throws IoError.
void write_file(const std::string& path, const std::string& content);

}  // namespace pumpwatch
