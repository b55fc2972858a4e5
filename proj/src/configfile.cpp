#include "pumpwatch/configfile.hpp"

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"

namespace pumpwatch {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::size_t line_no = 0;
    for (const std::string& raw : read_lines(path)) {
        ++line_no;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
        if (!kv.emplace(key, val).second)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": duplicate key '" + key + "'");
    }
    return kv;
}

std::map<std::string, std::string> merge_kv(
    std::map<std::string, std::string> base,
    const std::map<std::string, std::string>& overrides) {
    for (const auto& [k, v] : overrides) base[k] = v;
    return base;
}

}  // namespace pumpwatch
