#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pumpwatch/features.hpp"
#include "pumpwatch/graph.hpp"
#include "pumpwatch/metrics.hpp"
#include "pumpwatch/model.hpp"
#include "pumpwatch/panel.hpp"

namespace pumpwatch {

// Everything one training run needs beyond the data itself. Graph
// hyperparameters ride along so a single config file describes a run.
struct TrainConfig {
    double lr = 1e-3;
    std::int64_t max_epochs = 100;
    std::int64_t patience = 10;
    std::int64_t batch_anchors = 32;
    double pos_weight_cap = 200.0;
    double keep_ratio = 1.0;  // chance a no-pump anchor enters an epoch
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9};

    std::string signal = "num_trades";  // correlation signal (or "volume")
    double rho = 0.90;                  // correlation quantile
    double tau_min = 0.15;              // correlation threshold floor
    int lookback = 12;                  // event-window length for G2

    ModelConfig model;

    void validate() const;
};

// Defaults overlaid with key=value entries; unknown keys are rejected with
// the full list of valid keys in the message.
TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv);
std::map<std::string, std::string> train_config_to_kv(const TrainConfig& cfg);

// The graph inputs for one run: a fixed adjacency (G1's thresholded
// correlations; no edges for identity and G3) plus the event timeline when
// the strategy is G2. Built from training rows only.
struct GraphBundle {
    std::string strategy = "G1";
    Adjacency fixed;
    GraphTimeline timeline;

    static GraphBundle build(const Panel& panel, const SplitIndex& split,
                             const TrainConfig& cfg);

    // Adjacency pointers for the w steps ending at grid position `anchor`.
    std::vector<const Adjacency*> step_graphs(const std::vector<std::int64_t>& timestamps,
                                              std::int64_t anchor, std::int64_t w) const;
};

// Prediction anchors inside one block: positions with a full lookback
// window in the same block, i.e. [begin + w - 1, end).
std::vector<std::int64_t> anchors_in_block(std::int64_t begin, std::int64_t end,
                                           std::int64_t w);

// Mean over valid cells of -[pos_weight*y*log(p) + (1-y)*log(1-p)], taken
// on pre-sigmoid logits in log-space. weights: 0 drops a cell, 1 keeps it.
nn::Tensor bce_loss(const nn::Tensor& logits, const std::vector<double>& targets,
                    const std::vector<double>& weights, double pos_weight);

// F1-maximizing probability cutoff on validation data. Candidates are the
// midpoints of consecutive distinct probabilities plus 0.5; ties resolve
// to the larger cutoff (fewer alarms). No valid positives: returns 0.5 and
// warns on stderr.
double select_threshold(const std::vector<double>& probs,
                        const std::vector<std::uint8_t>& labels,
                        const std::vector<std::uint8_t>& valid);

struct EpochStats {
    std::int64_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_f1 = 0.0;  // at the provisional 0.5 cutoff
};

struct FitResult {
    std::uint64_t seed = 0;
    double gamma = 0.5;
    std::int64_t best_epoch = 0;
    std::vector<EpochStats> history;
    StGnn model;  // best-epoch parameters
};

// Model outputs over one block's anchors, flattened anchor-major (anchor
// index varies slowest, token fastest). loss is the weighted BCE over the
// block's valid cells, NaN when the block has none.
struct BlockEval {
    std::vector<std::int64_t> anchors;
    std::vector<double> probs;
    std::vector<std::uint8_t> labels;
    std::vector<std::uint8_t> valid;
    std::vector<std::int64_t> token_of;
    double loss = std::numeric_limits<double>::quiet_NaN();
};

BlockEval evaluate_block(StGnn& model, const FeaturePanel& fp,
                         const GraphBundle& graphs, std::int64_t block_begin,
                         std::int64_t block_end, std::int64_t batch_anchors,
                         double pos_weight);

// One seeded training run: Adam over shuffled anchor batches, per-epoch
// validation loss, early stopping (patience epochs without improvement),
// best-epoch restore, then threshold selection on validation probabilities.
// Throws NoPositivesInTrain when the training block has no pump labels.
FitResult fit(const FeaturePanel& fp, const SplitIndex& split,
              const GraphBundle& graphs, const TrainConfig& cfg,
              std::uint64_t seed);
// Convenience overload that builds the graph bundle itself.
FitResult fit(const Panel& panel, const FeaturePanel& fp, const SplitIndex& split,
              const TrainConfig& cfg, std::uint64_t seed);

struct SeedOutcome {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;  // set when !ok
    double gamma = 0.5;
    std::int64_t best_epoch = 0;
    std::vector<EpochStats> history;
    Confusion test_conf;
    Prf1 test_scores;
    double test_pr_auc = std::numeric_limits<double>::quiet_NaN();
    PRCurve test_curve;
};

struct ProtocolReport {
    std::vector<SeedOutcome> outcomes;
    std::vector<std::uint64_t> failed_seeds;

    struct Row {
        std::string metric;
        double mean = 0.0, stddev = 0.0;
        std::vector<double> values;  // per successful seed, seed order
    };
    std::vector<Row> aggregate;  // precision, recall, f1, pr_auc, gamma

    // Times the test slice was materialized; exactly one per successful
    // seed, always after that seed's gamma is frozen.
    std::int64_t test_passes = 0;
};

// Runs fit for every configured seed, evaluates the test block once per
// seed with that seed's frozen gamma, and aggregates mean / sample std.
// Seed failures are recorded and skipped, not fatal. per_seed (optional)
// receives each successful seed's FitResult for persistence.
ProtocolReport run_protocol(
    const Panel& panel, const FeaturePanel& fp, const SplitIndex& split,
    const TrainConfig& cfg,
    const std::function<void(const FitResult&, const SeedOutcome&)>& per_seed = nullptr);

// History CSV: epoch,train_loss,val_loss,val_f1.
void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);
// Aggregate CSV: metric,mean,std, then one column per successful seed.
void write_aggregate_csv(const std::string& path, const ProtocolReport& report);

}  // namespace pumpwatch
