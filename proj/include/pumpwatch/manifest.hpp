#pragma once

#include <map>
#include <string>
#include <vector>

namespace pumpwatch {

inline constexpr const char* kVersion = "1.0.0";

// Reproducibility record written next to every command's outputs. The
// resolved config plus input digests pin the run completely, so replaying
// a manifest regenerates bit-identical artifacts.
struct Manifest {
    std::string command;
    std::string version = kVersion;
    std::map<std::string, std::string> config;   // fully resolved key=value
    std::map<std::string, std::string> inputs;   // path -> fnv1a-64 hex digest
    std::vector<std::string> outputs;            // artifact paths
};

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

}  // namespace pumpwatch
