#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "pumpwatch/features.hpp"
#include "pumpwatch/graph.hpp"
#include "pumpwatch/nn/adam.hpp"

namespace pumpwatch {

// Architecture knobs. D is both the spatial embedding width and the
// temporal model width; the spatial attention layers expand to H*D
// internally (head dimension D) and merge back to D.
struct ModelConfig {
    std::string strategy = "G1";  // G1 | G2 | G3 | identity
    std::int64_t F = kFeatureCount;
    std::int64_t D = 64;
    std::int64_t H = 2;
    std::int64_t W = 5;
    double dropout = 0.0;
    std::int64_t temporal_layers = 1;
    std::int64_t d_embed = 48;    // G3 embedding width
    double epsilon = 0.005;       // G3 sparsity threshold
    std::int64_t n_tokens = 0;    // required for G3 (E1/E2 shape)

    void validate() const;
    std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(const std::map<std::string, std::string>& kv);
};

// One spatial graph-attention layer's parameters (views into a ParamStore).
struct GraphAttnLayerParams {
    nn::Tensor wq, bq, wk, bk, wv, bv, wr, br;  // D -> H*D projections
    nn::Tensor we;                              // 1 -> H*D edge projection
    nn::Tensor wm, bm;                          // H*D -> D merge
};

// Edge structure for one batched forward pass: node indices already offset
// per (anchor, step) replica, with the aligned weight column on the tape
// when the graph is learned.
struct BatchedEdges {
    std::vector<std::int64_t> src, dst;
    nn::Tensor weight;  // |E| x 1
    std::int64_t n_edges() const { return static_cast<std::int64_t>(src.size()); }
};

// Transformer-style attention over incoming edges:
//   logit(j->i) = <Wq h_i, Wk h_j + We a_ij> / sqrt(D)   per head
//   out_i = merge( Wr h_i + sum_j alpha_ij (Wv h_j + We a_ij) )
// Heads live in column blocks of width D. With no edges only the root/skip
// term survives, so isolated nodes stay well-defined.
nn::Tensor graph_attn_forward(const nn::Tensor& h, const BatchedEdges& edges,
                              const GraphAttnLayerParams& p, std::int64_t heads);

class StGnn {
public:
    StGnn() = default;  // empty shell; fill via create/from_parts
    static StGnn create(const ModelConfig& cfg, std::uint64_t seed);
    static StGnn from_parts(const ModelConfig& cfg, nn::ParamStore params);

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }
    std::int64_t param_count() const { return params_.total_count(); }

    // Batched forward. graphs[b][u] is the adjacency for window b's step u
    // (G1/identity pass the same object everywhere; G2 varies per step;
    // G3 ignores it and derives the learned graph). Returns logits, one row
    // per (window, node), window-major.
    nn::Tensor forward_logits(const std::vector<WindowTensor>& windows,
                              const std::vector<std::vector<const Adjacency*>>& graphs,
                              std::mt19937_64& dropout_rng, bool training);

    // Spatial stage: rows (b, u, i) -> D columns.
    nn::Tensor spatial_encode(const std::vector<WindowTensor>& windows,
                              const std::vector<std::vector<const Adjacency*>>& graphs,
                              std::mt19937_64& dropout_rng, bool training);
    // Temporal stage: regroups to per-node sequences, adds positional
    // parameters, runs the pre-norm encoder, returns the last time slot
    // per (window, node).
    nn::Tensor temporal_encode(const nn::Tensor& spatial, std::int64_t n_windows,
                               std::mt19937_64& dropout_rng, bool training);

    // Single-window inference: per-node probabilities in (0,1).
    std::vector<double> forward(const WindowTensor& window,
                                const std::vector<const Adjacency*>& graphs);

private:
    ModelConfig cfg_;
    nn::ParamStore params_;
    GraphAttnLayerParams layer_params(int layer) const;
};

// sigmoid with the logit clamped to keep the result inside (0,1) in double.
std::vector<double> probs_from_logits(const nn::Tensor& logits);
std::vector<std::uint8_t> classify(const std::vector<double>& probs, double gamma);

// Checkpoint helpers (numcore container + model config metadata).
void save_model(const std::string& path, const StGnn& model,
                std::map<std::string, std::string> extra_meta = {});
StGnn load_model(const std::string& path,
                 std::map<std::string, std::string>* meta_out = nullptr);

// Model-config text file: key=value lines for strategy,F,D,H,W,dropout,
// temporal_layers,d_embed,epsilon.
void write_model_config(const std::string& path, const ModelConfig& cfg);

}  // namespace pumpwatch
