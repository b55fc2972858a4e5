#include "pumpwatch/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/nn/ops.hpp"
#include "pumpwatch/timeutil.hpp"

namespace pumpwatch {

Adjacency Adjacency::identity(std::int64_t n) {
    Adjacency a;
    a.n = n;
    return a;  // zero edges; the model's root/skip term carries self-information
}

CorrSignal parse_corr_signal(const std::string& name) {
    if (name == "num_trades") return CorrSignal::NumTrades;
    if (name == "volume") return CorrSignal::Volume;
    throw ConfigError("unknown correlation signal '" + name +
                      "' (valid: num_trades, volume)");
}

std::vector<double> corr_signal_matrix(const Panel& panel, CorrSignal kind,
                                       std::int64_t h_begin, std::int64_t h_end) {
    const std::int64_t n = panel.n_tokens();
    const std::int64_t rows = h_end - h_begin;
    std::vector<double> s(static_cast<std::size_t>(rows * n), 0.0);
    for (std::int64_t h = h_begin; h < h_end; ++h)
        for (std::int64_t i = 0; i < n; ++i) {
            const std::size_t k = panel.idx(i, h);
            double raw = 0.0;
            if (panel.present[k])
                raw = kind == CorrSignal::NumTrades
                          ? static_cast<double>(panel.cells[k].num_trades)
                          : panel.cells[k].volume;
            s[static_cast<std::size_t>((h - h_begin) * n + i)] = std::log1p(raw);
        }
    return s;
}

std::vector<double> pearson_matrix(const std::vector<double>& s, std::int64_t rows,
                                   std::int64_t n) {
    if (rows < 2)
        throw TooFewSamples("pearson_matrix: " + std::to_string(rows) +
                            " rows, need >= 2");
    if (static_cast<std::int64_t>(s.size()) != rows * n)
        throw ShapeMismatch("pearson_matrix: matrix size " + std::to_string(s.size()) +
                            " != " + std::to_string(rows) + "x" + std::to_string(n));
    std::vector<double> mean(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t t = 0; t < rows; ++t)
        for (std::int64_t i = 0; i < n; ++i)
            mean[static_cast<std::size_t>(i)] += s[static_cast<std::size_t>(t * n + i)];
    for (double& m : mean) m /= static_cast<double>(rows);

    // Centered cross-products in one sweep, then normalize.
    std::vector<double> cov(static_cast<std::size_t>(n * n), 0.0);
    std::vector<double> var(static_cast<std::size_t>(n), 0.0);
    std::vector<double> centered(static_cast<std::size_t>(n));
    for (std::int64_t t = 0; t < rows; ++t) {
        for (std::int64_t i = 0; i < n; ++i)
            centered[static_cast<std::size_t>(i)] =
                s[static_cast<std::size_t>(t * n + i)] - mean[static_cast<std::size_t>(i)];
        for (std::int64_t i = 0; i < n; ++i) {
            var[static_cast<std::size_t>(i)] +=
                centered[static_cast<std::size_t>(i)] * centered[static_cast<std::size_t>(i)];
            for (std::int64_t j = i + 1; j < n; ++j)
                cov[static_cast<std::size_t>(i * n + j)] +=
                    centered[static_cast<std::size_t>(i)] * centered[static_cast<std::size_t>(j)];
        }
    }
    std::vector<double> c(static_cast<std::size_t>(n * n), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j) {
            double denom = std::sqrt(var[static_cast<std::size_t>(i)] *
                                     var[static_cast<std::size_t>(j)]);
            double corr = denom > 0.0 ? cov[static_cast<std::size_t>(i * n + j)] / denom : 0.0;
            c[static_cast<std::size_t>(i * n + j)] = corr;
            c[static_cast<std::size_t>(j * n + i)] = corr;
        }
    return c;
}

double quantile_threshold(const std::vector<double>& c, std::int64_t n, double rho,
                          double tau_min) {
    if (n < 2) throw TooFewSamples("quantile_threshold: n < 2");
    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j)
            upper.push_back(c[static_cast<std::size_t>(i * n + j)]);
    std::sort(upper.begin(), upper.end());
    const double h = rho * static_cast<double>(upper.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, upper.size() - 1);
    const double frac = h - std::floor(h);
    const double q = upper[lo] + frac * (upper[hi] - upper[lo]);
    return std::max(tau_min, q);
}

namespace {

// Correlation-thresholded edge pairs (i<j) for one signal window.
std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, double>> threshold_pairs(
    const std::vector<double>& c, std::int64_t n, double rho, double tau_min) {
    const double tau = quantile_threshold(c, n, rho, tau_min);
    std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, double>> pairs;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j) {
            double w = c[static_cast<std::size_t>(i * n + j)];
            if (w > tau) pairs.push_back({{i, j}, w});
        }
    return pairs;
}

Adjacency from_pairs(
    std::int64_t n,
    const std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, double>>& pairs) {
    Adjacency a;
    a.n = n;
    for (const auto& [ij, w] : pairs) {
        a.src.push_back(ij.first);
        a.dst.push_back(ij.second);
        a.weight.push_back(w);
        a.src.push_back(ij.second);
        a.dst.push_back(ij.first);
        a.weight.push_back(w);
    }
    return a;
}

}  // namespace

Adjacency build_static_graph(const Panel& panel, CorrSignal kind,
                             std::int64_t train_begin, std::int64_t train_end,
                             double rho, double tau_min) {
    const std::int64_t rows = train_end - train_begin;
    auto s = corr_signal_matrix(panel, kind, train_begin, train_end);
    auto c = pearson_matrix(s, rows, panel.n_tokens());
    return from_pairs(panel.n_tokens(), threshold_pairs(c, panel.n_tokens(), rho, tau_min));
}

GraphTimeline build_dynamic_timeline(const Panel& panel, CorrSignal kind,
                                     std::int64_t train_begin, std::int64_t train_end,
                                     int lookback, double rho, double tau_min) {
    if (lookback < 2)
        throw ConfigError("build_dynamic_timeline: lookback must be >= 2");
    const std::int64_t n = panel.n_tokens();
    GraphTimeline tl;
    tl.n = n;
    tl.initial = Adjacency::identity(n);

    // Running mean per retained pair across events.
    std::map<std::pair<std::int64_t, std::int64_t>, std::pair<double, std::int64_t>> acc;

    for (std::int64_t p = train_begin; p < train_end; ++p) {
        bool is_event = false;
        for (std::int64_t i = 0; i < n && !is_event; ++i)
            is_event = panel.labels[panel.idx(i, p)] != 0;
        if (!is_event) continue;

        const std::int64_t w_begin = std::max(train_begin, p - lookback);
        const std::int64_t w_rows = p + 1 - w_begin;
        const std::int64_t ts = panel.timestamps[static_cast<std::size_t>(p)];
        if (w_rows < 2) {
            std::cerr << "warning: skipping dynamic-graph event at " << format_iso8601(ts)
                      << " (window has " << w_rows << " usable rows)\n";
            continue;
        }
        auto s = corr_signal_matrix(panel, kind, w_begin, p + 1);
        auto c = pearson_matrix(s, w_rows, n);
        for (const auto& [ij, w] : threshold_pairs(c, n, rho, tau_min)) {
            auto& [sum, cnt] = acc[ij];
            sum += w;
            cnt += 1;
        }
        std::vector<std::pair<std::pair<std::int64_t, std::int64_t>, double>> pairs;
        pairs.reserve(acc.size());
        for (const auto& [ij, sc] : acc)
            pairs.push_back({ij, sc.first / static_cast<double>(sc.second)});
        tl.snapshot_ts.push_back(ts);
        tl.snapshots.push_back(from_pairs(n, pairs));
    }
    return tl;
}

const Adjacency& graph_at(const GraphTimeline& timeline, std::int64_t ts) {
    if (timeline.empty() || ts < timeline.snapshot_ts.front()) return timeline.initial;
    auto it = std::upper_bound(timeline.snapshot_ts.begin(), timeline.snapshot_ts.end(), ts);
    return timeline.snapshots[static_cast<std::size_t>(it - timeline.snapshot_ts.begin() - 1)];
}

AdaptiveGraph adaptive_adjacency(const nn::Tensor& e1, const nn::Tensor& e2,
                                 double epsilon) {
    if (e1.rows() != e2.rows() || e1.cols() != e2.cols())
        throw ShapeMismatch("adaptive_adjacency: embeddings " +
                            std::to_string(e1.rows()) + "x" + std::to_string(e1.cols()) +
                            " vs " + std::to_string(e2.rows()) + "x" +
                            std::to_string(e2.cols()));
    AdaptiveGraph g;
    g.dense = nn::row_softmax(nn::relu(nn::matmul(e1, nn::transpose(e2))));
    const std::int64_t n = g.dense.rows();
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            if (g.dense.at(i, j) > epsilon) {
                g.src.push_back(j);  // edge j -> i: row i holds weights over sources j
                g.dst.push_back(i);
                g.flat.push_back(i * n + j);
            }
    return g;
}

void write_edges_csv(const std::string& path, const Adjacency& adj) {
    std::string out = "src,dst,weight\n";
    for (std::int64_t e = 0; e < adj.n_edges(); ++e)
        out += fmt_int(adj.src[static_cast<std::size_t>(e)]) + ',' +
               fmt_int(adj.dst[static_cast<std::size_t>(e)]) + ',' +
               fmt_double(adj.weight[static_cast<std::size_t>(e)]) + '\n';
    write_file(path, out);
}

void write_timeline_csv(const std::string& path, const GraphTimeline& timeline) {
    std::string out = "snapshot_ts,src,dst,weight\n";
    for (std::size_t k = 0; k < timeline.snapshots.size(); ++k) {
        const Adjacency& a = timeline.snapshots[k];
        for (std::int64_t e = 0; e < a.n_edges(); ++e)
            out += format_iso8601(timeline.snapshot_ts[k]) + ',' +
                   fmt_int(a.src[static_cast<std::size_t>(e)]) + ',' +
                   fmt_int(a.dst[static_cast<std::size_t>(e)]) + ',' +
                   fmt_double(a.weight[static_cast<std::size_t>(e)]) + '\n';
    }
    write_file(path, out);
}

}  // namespace pumpwatch
