#include "pumpwatch/features.hpp"

#include <cmath>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/timeutil.hpp"

namespace pumpwatch {

namespace {
constexpr double kDenomGuard = 1e-12;
constexpr int kRollWindow = 12;
}

MaskedSeries MaskedSeries::all_valid(std::vector<double> values) {
    MaskedSeries s;
    s.ok.assign(values.size(), 1);
    s.v = std::move(values);
    return s;
}

MaskedSeries rolling_stat(const MaskedSeries& series, int w, RollKind kind) {
    const std::size_t n = series.size();
    if (static_cast<std::size_t>(w) > n)
        throw WindowTooLarge("rolling_stat: w=" + std::to_string(w) + " > length " +
                             std::to_string(n));
    if (kind == RollKind::Std && w < 2)
        throw WindowTooLarge("rolling_stat: std needs w >= 2");
    MaskedSeries out;
    out.v.assign(n, 0.0);
    out.ok.assign(n, 0);
    for (std::size_t t = static_cast<std::size_t>(w) - 1; t < n; ++t) {
        bool usable = true;
        for (int u = 0; u < w && usable; ++u)
            usable = series.ok[t - static_cast<std::size_t>(u)] != 0;
        if (!usable) continue;
        // Two-pass per window: w is small (12) and this stays exact.
        double mean = 0.0;
        for (int u = 0; u < w; ++u) mean += series.v[t - static_cast<std::size_t>(u)];
        mean /= static_cast<double>(w);
        if (kind == RollKind::Mean) {
            out.v[t] = mean;
        } else {
            double ss = 0.0;
            for (int u = 0; u < w; ++u) {
                double d = series.v[t - static_cast<std::size_t>(u)] - mean;
                ss += d * d;
            }
            out.v[t] = std::sqrt(ss / static_cast<double>(w - 1));
        }
        out.ok[t] = 1;
    }
    return out;
}

MaskedSeries rolling_stat(const std::vector<double>& series, int w, RollKind kind) {
    return rolling_stat(MaskedSeries::all_valid(series), w, kind);
}

MaskedSeries pct_change(const MaskedSeries& series) {
    const std::size_t n = series.size();
    MaskedSeries out;
    out.v.assign(n, 0.0);
    out.ok.assign(n, 0);
    for (std::size_t t = 1; t < n; ++t) {
        if (!series.ok[t] || !series.ok[t - 1]) continue;
        double prev = series.v[t - 1];
        if (std::abs(prev) <= kDenomGuard) continue;
        out.v[t] = (series.v[t] - prev) / prev;
        out.ok[t] = 1;
    }
    return out;
}

MaskedSeries buy_pressure(const CandleSeries& candles) {
    MaskedSeries out;
    out.v.assign(candles.candles.size(), 0.0);
    out.ok.assign(candles.candles.size(), 0);
    for (std::size_t t = 0; t < candles.candles.size(); ++t) {
        const Candle& c = candles.candles[t];
        if (c.quote_asset_volume <= 0.0) continue;
        out.v[t] = c.taker_buy_quote / c.quote_asset_volume;
        out.ok[t] = 1;
    }
    return out;
}

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "open", "high", "low", "close", "volume", "quote_asset_volume", "num_trades",
        "taker_buy_base", "taker_buy_quote", "std_rush_order", "avg_rush_order",
        "std_trades", "std_volume", "std_price", "avg_volume", "avg_price",
        "avg_price_max", "hour_of_the_day"};
    return names;
}

FeaturePanel build_feature_matrix(const Panel& panel) {
    const std::int64_t n = panel.n_tokens(), t = panel.n_hours();
    FeaturePanel fp;
    fp.n_tokens = n;
    fp.n_hours = t;
    fp.timestamps = panel.timestamps;
    fp.symbols = panel.symbols;
    fp.labels = panel.labels;  // relabeled below into [hour][token] layout
    fp.x.assign(static_cast<std::size_t>(t * n) * kFeatureCount, 0.0);
    fp.ok.assign(static_cast<std::size_t>(t * n), 0);
    fp.labels.assign(static_cast<std::size_t>(t * n), 0);

    for (std::int64_t i = 0; i < n; ++i) {
        // Base series for this token, masked where the candle is missing.
        MaskedSeries bp, trades, volume, close, high;
        auto init = [&](MaskedSeries& s) {
            s.v.assign(static_cast<std::size_t>(t), 0.0);
            s.ok.assign(static_cast<std::size_t>(t), 0);
        };
        init(bp); init(trades); init(volume); init(close); init(high);
        for (std::int64_t h = 0; h < t; ++h) {
            const std::size_t k = panel.idx(i, h);
            if (!panel.present[k]) continue;
            const Candle& c = panel.cells[k];
            trades.v[static_cast<std::size_t>(h)] = static_cast<double>(c.num_trades);
            trades.ok[static_cast<std::size_t>(h)] = 1;
            volume.v[static_cast<std::size_t>(h)] = c.volume;
            volume.ok[static_cast<std::size_t>(h)] = 1;
            close.v[static_cast<std::size_t>(h)] = c.close;
            close.ok[static_cast<std::size_t>(h)] = 1;
            high.v[static_cast<std::size_t>(h)] = c.high;
            high.ok[static_cast<std::size_t>(h)] = 1;
            if (c.quote_asset_volume > 0.0) {
                bp.v[static_cast<std::size_t>(h)] = c.taker_buy_quote / c.quote_asset_volume;
                bp.ok[static_cast<std::size_t>(h)] = 1;
            }
        }

        const MaskedSeries eng[8] = {
            pct_change(rolling_stat(bp, kRollWindow, RollKind::Std)),       // std_rush_order
            pct_change(rolling_stat(bp, kRollWindow, RollKind::Mean)),      // avg_rush_order
            pct_change(rolling_stat(trades, kRollWindow, RollKind::Std)),   // std_trades
            pct_change(rolling_stat(volume, kRollWindow, RollKind::Std)),   // std_volume
            pct_change(rolling_stat(close, kRollWindow, RollKind::Std)),    // std_price
            pct_change(rolling_stat(volume, kRollWindow, RollKind::Mean)),  // avg_volume
            pct_change(rolling_stat(close, kRollWindow, RollKind::Mean)),   // avg_price
            pct_change(rolling_stat(high, kRollWindow, RollKind::Mean)),    // avg_price_max
        };

        for (std::int64_t h = 0; h < t; ++h) {
            const std::size_t cell = fp.cell(h, i);
            fp.labels[cell] = panel.labels[panel.idx(i, h)];
            bool valid = panel.present[panel.idx(i, h)] != 0;
            for (const auto& e : eng) valid = valid && e.ok[static_cast<std::size_t>(h)];
            if (!valid) continue;
            fp.ok[cell] = 1;
            double* row = fp.x.data() + cell * kFeatureCount;
            const Candle& c = panel.cells[panel.idx(i, h)];
            row[0] = c.open;
            row[1] = c.high;
            row[2] = c.low;
            row[3] = c.close;
            row[4] = c.volume;
            row[5] = c.quote_asset_volume;
            row[6] = static_cast<double>(c.num_trades);
            row[7] = c.taker_buy_base;
            row[8] = c.taker_buy_quote;
            for (int e = 0; e < 8; ++e) row[9 + e] = eng[e].v[static_cast<std::size_t>(h)];
            row[17] = static_cast<double>(hour_of_day(panel.timestamps[static_cast<std::size_t>(h)]));
        }
    }
    return fp;
}

StandardizeStats standardize(FeaturePanel& fp, std::int64_t train_begin,
                             std::int64_t train_end) {
    StandardizeStats st;
    st.mean.assign(kFeatureCount, 0.0);
    st.std.assign(kFeatureCount, 0.0);
    std::vector<std::int64_t> count(kFeatureCount, 0);
    for (std::int64_t h = train_begin; h < train_end; ++h)
        for (std::int64_t i = 0; i < fp.n_tokens; ++i) {
            if (!fp.ok[fp.cell(h, i)]) continue;
            const double* row = fp.row(h, i);
            for (int k = 0; k < kFeatureCount; ++k) {
                st.mean[static_cast<std::size_t>(k)] += row[k];
                ++count[static_cast<std::size_t>(k)];
            }
        }
    for (int k = 0; k < kFeatureCount; ++k)
        if (count[static_cast<std::size_t>(k)] > 0)
            st.mean[static_cast<std::size_t>(k)] /=
                static_cast<double>(count[static_cast<std::size_t>(k)]);
    for (std::int64_t h = train_begin; h < train_end; ++h)
        for (std::int64_t i = 0; i < fp.n_tokens; ++i) {
            if (!fp.ok[fp.cell(h, i)]) continue;
            const double* row = fp.row(h, i);
            for (int k = 0; k < kFeatureCount; ++k) {
                double d = row[k] - st.mean[static_cast<std::size_t>(k)];
                st.std[static_cast<std::size_t>(k)] += d * d;
            }
        }
    for (int k = 0; k < kFeatureCount; ++k)
        st.std[static_cast<std::size_t>(k)] =
            count[static_cast<std::size_t>(k)] > 0
                ? std::sqrt(st.std[static_cast<std::size_t>(k)] /
                            static_cast<double>(count[static_cast<std::size_t>(k)]))
                : 0.0;

    for (std::int64_t h = 0; h < fp.n_hours; ++h)
        for (std::int64_t i = 0; i < fp.n_tokens; ++i) {
            if (!fp.ok[fp.cell(h, i)]) continue;
            double* row = fp.x.data() + fp.cell(h, i) * kFeatureCount;
            for (int k = 0; k < kFeatureCount; ++k) {
                row[k] -= st.mean[static_cast<std::size_t>(k)];
                if (st.std[static_cast<std::size_t>(k)] >= 1e-8)
                    row[k] /= st.std[static_cast<std::size_t>(k)];
            }
        }
    return st;
}

WindowTensor make_window(const FeaturePanel& fp, std::int64_t t, int w) {
    if (t < w - 1 || t >= fp.n_hours)
        throw InsufficientHistory("make_window: anchor " + std::to_string(t) +
                                  " needs " + std::to_string(w - 1) +
                                  " predecessors on a grid of " +
                                  std::to_string(fp.n_hours));
    WindowTensor wt;
    wt.n_tokens = fp.n_tokens;
    wt.w = w;
    wt.f = kFeatureCount;
    wt.anchor = t;
    const std::size_t block = static_cast<std::size_t>(fp.n_tokens) * kFeatureCount;
    wt.x.assign(static_cast<std::size_t>(w) * block, 0.0);
    wt.valid_nodes.assign(static_cast<std::size_t>(fp.n_tokens), 0);
    for (int u = 0; u < w; ++u) {
        const std::int64_t h = t - w + 1 + u;
        std::copy_n(fp.x.data() + fp.cell(h, 0) * kFeatureCount, block,
                    wt.x.data() + static_cast<std::size_t>(u) * block);
        for (std::int64_t i = 0; i < fp.n_tokens; ++i)
            if (fp.ok[fp.cell(h, i)]) wt.valid_nodes[static_cast<std::size_t>(i)] = 1;
    }
    return wt;
}

void write_features_csv(const std::string& path, const FeaturePanel& fp) {
    std::string out = "symbol,timestamp_utc";
    for (const auto& n : feature_names()) out += ',' + n;
    out += ",flag,valid\n";
    for (std::int64_t i = 0; i < fp.n_tokens; ++i)
        for (std::int64_t h = 0; h < fp.n_hours; ++h) {
            out += fp.symbols[static_cast<std::size_t>(i)];
            out += ',';
            out += format_iso8601(fp.timestamps[static_cast<std::size_t>(h)]);
            const double* row = fp.row(h, i);
            for (int k = 0; k < kFeatureCount; ++k) out += ',' + fmt_double(row[k]);
            out += ',';
            out += fp.labels[fp.cell(h, i)] ? '1' : '0';
            out += ',';
            out += fp.ok[fp.cell(h, i)] ? '1' : '0';
            out += '\n';
        }
    write_file(path, out);
}

}  // namespace pumpwatch
