#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pumpwatch/nn/tensor.hpp"
#include "pumpwatch/panel.hpp"

namespace pumpwatch {

// Directed weighted edge list over the panel's token indices. Correlation
// graphs emit both directions per retained pair and keep a zero diagonal;
// the identity variant carries no edges at all (the model's root/skip term
// supplies each node's own information).
struct Adjacency {
    std::int64_t n = 0;
    std::vector<std::int64_t> src, dst;
    std::vector<double> weight;
    bool directed = false;

    std::int64_t n_edges() const { return static_cast<std::int64_t>(src.size()); }
    static Adjacency identity(std::int64_t n);
};

// Piecewise-constant graph history for the event-driven strategy: snapshot
// k applies from snapshot_ts[k] (inclusive) until the next event; before
// the first event the identity adjacency applies.
struct GraphTimeline {
    std::int64_t n = 0;
    std::vector<std::int64_t> snapshot_ts;  // strictly increasing train events
    std::vector<Adjacency> snapshots;
    Adjacency initial;  // identity

    bool empty() const { return snapshots.empty(); }
};

enum class CorrSignal { NumTrades, Volume };
CorrSignal parse_corr_signal(const std::string& name);  // "num_trades" | "volume"

// log(1+s) signal matrix for the given hour range; missing candles read 0.
// Layout: rows = hours, cols = tokens.
std::vector<double> corr_signal_matrix(const Panel& panel, CorrSignal kind,
                                       std::int64_t h_begin, std::int64_t h_end);

// Pearson correlation of the columns of a (rows x n) matrix. Diagonal fixed
// to 0; zero-variance columns correlate 0 with everything. Throws
// TooFewSamples for fewer than 2 rows.
std::vector<double> pearson_matrix(const std::vector<double>& s, std::int64_t rows,
                                   std::int64_t n);

// max(tau_min, linear-interpolation rho-quantile of the strict upper
// triangle of C).
double quantile_threshold(const std::vector<double>& c, std::int64_t n, double rho,
                          double tau_min);

// Static correlation graph on the training hours: keep pairs with
// C_ij > tau strictly, both directions, weight C_ij.
Adjacency build_static_graph(const Panel& panel, CorrSignal kind,
                             std::int64_t train_begin, std::int64_t train_end,
                             double rho, double tau_min);

// Event-driven timeline: for each training hour with >= 1 pump label, take
// the trailing window of L+1 in-train hours, compute the per-event
// correlation graph, and fold retained edges into running means. Events
// with fewer than 2 usable window rows are skipped with a warning on
// stderr. Edges persist once added.
GraphTimeline build_dynamic_timeline(const Panel& panel, CorrSignal kind,
                                     std::int64_t train_begin, std::int64_t train_end,
                                     int lookback, double rho, double tau_min);

// Active graph at hour ts: identity before the first event, otherwise the
// snapshot of the latest event <= ts. Validation/test hours therefore
// resolve to the last training snapshot.
const Adjacency& graph_at(const GraphTimeline& timeline, std::int64_t ts);

// Differentiable learned adjacency: A = row_softmax(relu(E1 * E2^T)),
// sparsified to entries strictly greater than epsilon. The dense tensor
// stays on the tape so gradients reach E1/E2 through the retained entries.
struct AdaptiveGraph {
    nn::Tensor dense;                    // n x n, row-stochastic pre-sparsification
    std::vector<std::int64_t> src, dst;  // retained entries, directed
    std::vector<std::int64_t> flat;      // retained flat indices into dense
};
AdaptiveGraph adaptive_adjacency(const nn::Tensor& e1, const nn::Tensor& e2,
                                 double epsilon);

// Edge-list CSV: header src,dst,weight; timeline export prepends snapshot_ts.
void write_edges_csv(const std::string& path, const Adjacency& adj);
void write_timeline_csv(const std::string& path, const GraphTimeline& timeline);

}  // namespace pumpwatch
