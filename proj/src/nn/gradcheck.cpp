#include "pumpwatch/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace pumpwatch::nn {

GradCheckReport gradient_check(ParamStore& params,
                               const std::function<Tensor()>& loss_fn, double h,
                               std::int64_t max_coords) {
    // Analytic gradients from one taped pass.
    params.zero_grads();
    backward(loss_fn());
    std::map<std::string, std::vector<double>> analytic;
    for (const std::string& name : params.names())
        analytic.emplace(name, params.get(name).grad());

    auto eval = [&] {
        NoGradGuard off;
        return loss_fn().item();
    };

    GradCheckReport report;
    for (const std::string& name : params.names()) {
        Tensor p = params.get(name);
        auto& w = p.values();
        const std::int64_t n = static_cast<std::int64_t>(w.size());
        const std::int64_t stride = std::max<std::int64_t>(1, n / max_coords);
        GradCheckEntry entry;
        entry.name = name;
        for (std::int64_t i = 0; i < n && entry.coords_checked < max_coords; i += stride) {
            const double keep = w[static_cast<std::size_t>(i)];
            w[static_cast<std::size_t>(i)] = keep + h;
            const double up = eval();
            w[static_cast<std::size_t>(i)] = keep - h;
            const double dn = eval();
            w[static_cast<std::size_t>(i)] = keep;
            const double numeric = (up - dn) / (2.0 * h);
            const double a = analytic.at(name)[static_cast<std::size_t>(i)];
            const double rel =
                std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            ++entry.coords_checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace pumpwatch::nn
