#pragma once

#include <map>
#include <string>

#include "pumpwatch/nn/adam.hpp"

namespace pumpwatch::nn {

// Single-file checkpoint: an 8-byte magic ("PWCKPT01"), a little-endian u64
// with the manifest length, a JSON manifest listing every tensor (name,
// rows, cols, dtype, byte offset into the data section) plus free-form
// string metadata, then the raw row-major little-endian arrays.
//
// dtype is "f64" (default) or "f32"; f32 checkpoints are read back upcast
// to double.

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const std::map<std::string, std::string>& meta,
                     const std::string& dtype = "f64");

struct LoadedCheckpoint {
    std::map<std::string, std::string> meta;
    ParamStore params;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Optimizer moments live in a sibling file with the same container format;
// tensor names are "<param>.m" / "<param>.v" and the step count is metadata.
void save_optimizer_state(const std::string& path, Adam& opt);
void load_optimizer_state(const std::string& path, Adam& opt);

}  // namespace pumpwatch::nn
