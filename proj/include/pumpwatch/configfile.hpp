#pragma once

#include <map>
#include <string>

namespace pumpwatch {

// Flat key=value config files: one pair per line, '#' starts a comment,
// blank lines ignored, whitespace around keys and values trimmed.
// Duplicate keys are an error (silent last-wins hides typos).
std::map<std::string, std::string> read_kv_file(const std::string& path);

// base overlaid with overrides (flag > file > built-in default).
std::map<std::string, std::string> merge_kv(
    std::map<std::string, std::string> base,
    const std::map<std::string, std::string>& overrides);

}  // namespace pumpwatch
