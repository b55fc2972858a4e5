#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pumpwatch/nn/adam.hpp"

namespace pumpwatch::nn {

struct GradCheckEntry {
    std::string name;
    std::int64_t coords_checked = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;
};

// Central-difference check of analytic gradients. loss_fn must rebuild the
// graph from the current parameter values on every call and return a scalar.
// For each parameter, up to max_coords evenly strided coordinates are
// perturbed by +/- h; relative error is |a - n| / max(1e-8, |a| + |n|).
GradCheckReport gradient_check(ParamStore& params,
                               const std::function<Tensor()>& loss_fn,
                               double h = 1e-5, std::int64_t max_coords = 200);

}  // namespace pumpwatch::nn
