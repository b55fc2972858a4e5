#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pumpwatch/panel.hpp"

namespace pumpwatch {

// A real sequence with per-cell validity. Masks propagate through every
// derived statistic: a window containing any masked cell is masked, and so
// is a pct_change with a masked or near-zero denominator.
struct MaskedSeries {
    std::vector<double> v;
    std::vector<std::uint8_t> ok;

    std::size_t size() const { return v.size(); }
    static MaskedSeries all_valid(std::vector<double> values);
};

enum class RollKind { Mean, Std };

// Trailing-window statistic over series[t-w+1..t]; first w-1 cells masked.
// Std is the sample convention (w-1 denominator) and needs w >= 2.
// Throws WindowTooLarge if w exceeds the series length.
MaskedSeries rolling_stat(const MaskedSeries& series, int w, RollKind kind);
MaskedSeries rolling_stat(const std::vector<double>& series, int w, RollKind kind);

// out[t] = (v[t] - v[t-1]) / v[t-1]; masked at t=0 and where |v[t-1]| <= 1e-12.
MaskedSeries pct_change(const MaskedSeries& series);

// taker_buy_quote / quote_asset_volume per candle; masked where the quote
// volume is zero.
MaskedSeries buy_pressure(const CandleSeries& candles);

constexpr int kFeatureCount = 18;
const std::vector<std::string>& feature_names();  // fixed column order

// Feature values for the whole grid, laid out [hour][token][feature] so a
// lookback window is one contiguous block copy. mask is [hour][token]; a
// cell is valid only when the candle is present and every engineered
// ingredient is defined. Masked cells hold zeros.
struct FeaturePanel {
    std::int64_t n_tokens = 0, n_hours = 0;
    std::vector<double> x;         // n_hours * n_tokens * kFeatureCount
    std::vector<std::uint8_t> ok;  // n_hours * n_tokens
    std::vector<std::uint8_t> labels;  // same layout as ok
    std::vector<std::int64_t> timestamps;
    std::vector<std::string> symbols;

    std::size_t cell(std::int64_t hour, std::int64_t token) const {
        return static_cast<std::size_t>(hour * n_tokens + token);
    }
    const double* row(std::int64_t hour, std::int64_t token) const {
        return x.data() + cell(hour, token) * kFeatureCount;
    }
};

FeaturePanel build_feature_matrix(const Panel& panel);

// Per-feature z-scoring fitted on the given train hour range only and
// applied everywhere. Features with train std < 1e-8 are centered, not
// scaled. Masked cells stay zero.
struct StandardizeStats {
    std::vector<double> mean, std;  // kFeatureCount each
};
StandardizeStats standardize(FeaturePanel& fp, std::int64_t train_begin,
                             std::int64_t train_end);

// Lookback window ending at grid position t (inclusive): values[u, i, :] =
// fp[t-W+1+u, i, :]. valid_nodes[i] is cleared only when node i is masked at
// every step of the window. Throws InsufficientHistory if t < W-1.
struct WindowTensor {
    std::int64_t n_tokens = 0, w = 0, f = 0;
    std::int64_t anchor = 0;  // grid position
    std::vector<double> x;    // [step][token][feature]
    std::vector<std::uint8_t> valid_nodes;
};

WindowTensor make_window(const FeaturePanel& fp, std::int64_t t, int w);

// Optional export: symbol,timestamp_utc,<feature names...>,flag,valid.
void write_features_csv(const std::string& path, const FeaturePanel& fp);

}  // namespace pumpwatch
