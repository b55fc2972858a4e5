#include "pumpwatch/model.hpp"

#include <algorithm>
#include <cmath>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/nn/checkpoint.hpp"
#include "pumpwatch/nn/ops.hpp"
#include "pumpwatch/rng.hpp"

namespace pumpwatch {

using nn::Tensor;

void ModelConfig::validate() const {
    if (strategy != "G1" && strategy != "G2" && strategy != "G3" &&
        strategy != "identity")
        throw ConfigError("strategy must be G1|G2|G3|identity, got '" + strategy + "'");
    if (F < 1 || D < 1 || H < 1 || W < 1 || temporal_layers < 1)
        throw ConfigError("model dimensions must be >= 1");
    if (D % H != 0)
        throw ConfigError("D=" + std::to_string(D) + " not divisible by H=" +
                          std::to_string(H));
    if (dropout < 0.0 || dropout >= 1.0)
        throw ConfigError("dropout must be in [0,1)");
    if (strategy == "G3" && (n_tokens < 1 || d_embed < 1))
        throw ConfigError("G3 needs n_tokens and d_embed >= 1");
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    return {{"strategy", strategy},
            {"F", fmt_int(F)},
            {"D", fmt_int(D)},
            {"H", fmt_int(H)},
            {"W", fmt_int(W)},
            {"dropout", fmt_double(dropout)},
            {"temporal_layers", fmt_int(temporal_layers)},
            {"d_embed", fmt_int(d_embed)},
            {"epsilon", fmt_double(epsilon)},
            {"n_tokens", fmt_int(n_tokens)}};
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
    ModelConfig cfg;
    for (const auto& [k, v] : kv) {
        if (k == "strategy") cfg.strategy = v;
        else if (k == "F") cfg.F = std::stoll(v);
        else if (k == "D") cfg.D = std::stoll(v);
        else if (k == "H") cfg.H = std::stoll(v);
        else if (k == "W") cfg.W = std::stoll(v);
        else if (k == "dropout") cfg.dropout = std::stod(v);
        else if (k == "temporal_layers") cfg.temporal_layers = std::stoll(v);
        else if (k == "d_embed") cfg.d_embed = std::stoll(v);
        else if (k == "epsilon") cfg.epsilon = std::stod(v);
        else if (k == "n_tokens") cfg.n_tokens = std::stoll(v);
        else
            throw ConfigError("unknown model config key '" + k +
                              "' (valid: strategy,F,D,H,W,dropout,temporal_layers,"
                              "d_embed,epsilon,n_tokens)");
    }
    return cfg;
}

/* ---- parameter construction -------------------------------------------- */

namespace {

void add_linear(nn::ParamStore& ps, const std::string& name, std::int64_t in,
                std::int64_t out, std::mt19937_64& rng, bool bias = true) {
    Tensor w = ps.add(name + ".w", in, out);
    nn::fill_glorot(w, in, out, rng);
    if (bias) ps.add(name + ".b", 1, out);
}

}  // namespace

StGnn StGnn::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    StGnn m;
    m.cfg_ = cfg;
    auto rng = make_rng(seed, kStreamParams);
    auto& ps = m.params_;
    const std::int64_t wide = cfg.H * cfg.D;  // spatial expansion width

    add_linear(ps, "in", cfg.F, cfg.D, rng);
    for (int l = 1; l <= 2; ++l) {
        const std::string pre = "sp" + std::to_string(l);
        add_linear(ps, pre + ".q", cfg.D, wide, rng);
        add_linear(ps, pre + ".k", cfg.D, wide, rng);
        add_linear(ps, pre + ".v", cfg.D, wide, rng);
        add_linear(ps, pre + ".r", cfg.D, wide, rng);
        add_linear(ps, pre + ".e", 1, wide, rng, /*bias=*/false);
        add_linear(ps, pre + ".m", wide, cfg.D, rng);
    }
    for (std::int64_t l = 1; l <= cfg.temporal_layers; ++l) {
        const std::string pre = "tmp" + std::to_string(l);
        add_linear(ps, pre + ".q", cfg.D, cfg.D, rng);
        add_linear(ps, pre + ".k", cfg.D, cfg.D, rng);
        add_linear(ps, pre + ".v", cfg.D, cfg.D, rng);
        add_linear(ps, pre + ".o", cfg.D, cfg.D, rng);
        add_linear(ps, pre + ".f1", cfg.D, 4 * cfg.D, rng);
        add_linear(ps, pre + ".f2", 4 * cfg.D, cfg.D, rng);
        ps.add(pre + ".n1.g", 1, cfg.D, std::vector<double>(cfg.D, 1.0));
        ps.add(pre + ".n1.b", 1, cfg.D);
        ps.add(pre + ".n2.g", 1, cfg.D, std::vector<double>(cfg.D, 1.0));
        ps.add(pre + ".n2.b", 1, cfg.D);
    }
    ps.add("norm.g", 1, cfg.D, std::vector<double>(cfg.D, 1.0));
    ps.add("norm.b", 1, cfg.D);
    Tensor pos = ps.add("pos", cfg.W, cfg.D);
    nn::fill_normal(pos, 0.0, 0.02, rng);
    add_linear(ps, "head", cfg.D, 1, rng);
    if (cfg.strategy == "G3") {
        Tensor e1 = ps.add("adapt.e1", cfg.n_tokens, cfg.d_embed);
        Tensor e2 = ps.add("adapt.e2", cfg.n_tokens, cfg.d_embed);
        nn::fill_normal(e1, 0.0, 0.05, rng);
        nn::fill_normal(e2, 0.0, 0.05, rng);
    }
    return m;
}

StGnn StGnn::from_parts(const ModelConfig& cfg, nn::ParamStore params) {
    cfg.validate();
    StGnn m;
    m.cfg_ = cfg;
    m.params_ = std::move(params);
    return m;
}

GraphAttnLayerParams StGnn::layer_params(int layer) const {
    const std::string pre = "sp" + std::to_string(layer);
    GraphAttnLayerParams p;
    p.wq = params_.get(pre + ".q.w"); p.bq = params_.get(pre + ".q.b");
    p.wk = params_.get(pre + ".k.w"); p.bk = params_.get(pre + ".k.b");
    p.wv = params_.get(pre + ".v.w"); p.bv = params_.get(pre + ".v.b");
    p.wr = params_.get(pre + ".r.w"); p.br = params_.get(pre + ".r.b");
    p.we = params_.get(pre + ".e.w");
    p.wm = params_.get(pre + ".m.w"); p.bm = params_.get(pre + ".m.b");
    return p;
}

/* ---- spatial attention --------------------------------------------------- */

nn::Tensor graph_attn_forward(const Tensor& h, const BatchedEdges& edges,
                              const GraphAttnLayerParams& p, std::int64_t heads) {
    const std::int64_t m = h.rows();
    const std::int64_t wide = p.wq.cols();
    const std::int64_t dh = wide / heads;
    Tensor root = nn::add(nn::matmul(h, p.wr), p.br);

    if (edges.n_edges() == 0)
        return nn::add(nn::matmul(root, p.wm), p.bm);

    Tensor q = nn::add(nn::matmul(h, p.wq), p.bq);
    Tensor k = nn::add(nn::matmul(h, p.wk), p.bk);
    Tensor v = nn::add(nn::matmul(h, p.wv), p.bv);
    Tensor eproj = nn::matmul(edges.weight, p.we);  // |E| x wide

    Tensor q_dst = nn::gather_rows(q, edges.dst);
    Tensor k_src = nn::add(nn::gather_rows(k, edges.src), eproj);
    Tensor logits = nn::scale(nn::block_rowsum(nn::mul(q_dst, k_src), heads),
                              1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor alpha = nn::segment_softmax(logits, edges.dst, m);

    Tensor v_src = nn::add(nn::gather_rows(v, edges.src), eproj);
    Tensor msg = nn::mul(nn::expand_cols(alpha, dh), v_src);
    Tensor agg = nn::scatter_add_rows(msg, edges.dst, m);

    return nn::add(nn::matmul(nn::add(root, agg), p.wm), p.bm);
}

/* ---- batched forward ------------------------------------------------------ */

namespace {

// Replicates per-step adjacencies into one big edge list; node row r of
// replica (b,u) lives at (b*W+u)*N + r.
BatchedEdges replicate_edges(const std::vector<std::vector<const Adjacency*>>& graphs,
                             std::int64_t n, std::int64_t w) {
    BatchedEdges be;
    std::vector<double> weights;
    for (std::size_t b = 0; b < graphs.size(); ++b) {
        if (static_cast<std::int64_t>(graphs[b].size()) != w)
            throw ShapeMismatch("forward: window " + std::to_string(b) + " has " +
                                std::to_string(graphs[b].size()) + " step graphs, want " +
                                std::to_string(w));
        for (std::int64_t u = 0; u < w; ++u) {
            const Adjacency* a = graphs[b][u];
            if (a == nullptr) throw Error("forward: null adjacency");
            if (a->n != n)
                throw ShapeMismatch("forward: adjacency over " + std::to_string(a->n) +
                                    " nodes, panel has " + std::to_string(n));
            const std::int64_t off = (static_cast<std::int64_t>(b) * w + u) * n;
            for (std::int64_t e = 0; e < a->n_edges(); ++e) {
                be.src.push_back(a->src[static_cast<std::size_t>(e)] + off);
                be.dst.push_back(a->dst[static_cast<std::size_t>(e)] + off);
                weights.push_back(a->weight[static_cast<std::size_t>(e)]);
            }
        }
    }
    const std::int64_t n_edges = static_cast<std::int64_t>(weights.size());
    be.weight = Tensor::from_values(n_edges, 1, std::move(weights));
    return be;
}

}  // namespace

Tensor StGnn::spatial_encode(const std::vector<WindowTensor>& windows,
                             const std::vector<std::vector<const Adjacency*>>& graphs,
                             std::mt19937_64& dropout_rng, bool training) {
    if (windows.empty()) throw EmptyBatch("spatial_encode: no windows");
    const std::int64_t b = static_cast<std::int64_t>(windows.size());
    const std::int64_t n = windows[0].n_tokens;
    const std::int64_t w = cfg_.W;

    // Stack all windows: row ((b*W)+u)*N + i.
    std::vector<double> xv;
    xv.reserve(static_cast<std::size_t>(b * w * n * cfg_.F));
    for (const WindowTensor& wt : windows) {
        if (wt.w != w || wt.n_tokens != n || wt.f != cfg_.F)
            throw ShapeMismatch("spatial_encode: window " + std::to_string(wt.n_tokens) +
                                "x" + std::to_string(wt.w) + "x" + std::to_string(wt.f) +
                                " vs config N=" + std::to_string(n) + " W=" +
                                std::to_string(w) + " F=" + std::to_string(cfg_.F));
        xv.insert(xv.end(), wt.x.begin(), wt.x.end());
    }
    Tensor x = Tensor::from_values(b * w * n, cfg_.F, std::move(xv));

    BatchedEdges edges;
    if (cfg_.strategy == "G3") {
        AdaptiveGraph g =
            adaptive_adjacency(params_.get("adapt.e1"), params_.get("adapt.e2"),
                               cfg_.epsilon);
        if (g.dense.rows() != n)
            throw ShapeMismatch("G3 embeddings cover " + std::to_string(g.dense.rows()) +
                                " nodes, panel has " + std::to_string(n));
        const std::int64_t reps = b * w;
        for (std::int64_t r = 0; r < reps; ++r)
            for (std::size_t e = 0; e < g.src.size(); ++e) {
                edges.src.push_back(g.src[e] + r * n);
                edges.dst.push_back(g.dst[e] + r * n);
            }
        edges.weight = nn::tile_rows(nn::gather_elements(g.dense, g.flat), reps);
    } else {
        edges = replicate_edges(graphs, n, w);
    }

    Tensor h0 = nn::add(nn::matmul(x, params_.get("in.w")), params_.get("in.b"));
    Tensor h1 = nn::relu(graph_attn_forward(h0, edges, layer_params(1), cfg_.H));
    h1 = nn::dropout(h1, cfg_.dropout, dropout_rng, training);
    Tensor h2 = nn::relu(graph_attn_forward(h1, edges, layer_params(2), cfg_.H));
    return h2;
}

Tensor StGnn::temporal_encode(const Tensor& spatial, std::int64_t n_windows,
                              std::mt19937_64& dropout_rng, bool training) {
    const std::int64_t w = cfg_.W;
    const std::int64_t n = spatial.rows() / (n_windows * w);
    const std::int64_t seqs = n_windows * n;

    // Regroup rows from step-major (b,u,i) to per-node sequences (b,i,u).
    std::vector<std::int64_t> perm(static_cast<std::size_t>(seqs * w));
    for (std::int64_t b = 0; b < n_windows; ++b)
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t u = 0; u < w; ++u)
                perm[static_cast<std::size_t>(((b * n + i) * w) + u)] = (b * w + u) * n + i;
    Tensor x = nn::gather_rows(spatial, perm);
    x = nn::add(x, nn::tile_rows(params_.get("pos"), seqs));

    for (std::int64_t l = 1; l <= cfg_.temporal_layers; ++l) {
        const std::string pre = "tmp" + std::to_string(l);
        Tensor xn = nn::layer_norm(x, params_.get(pre + ".n1.g"), params_.get(pre + ".n1.b"));
        Tensor attn = nn::window_mha(
            nn::add(nn::matmul(xn, params_.get(pre + ".q.w")), params_.get(pre + ".q.b")),
            nn::add(nn::matmul(xn, params_.get(pre + ".k.w")), params_.get(pre + ".k.b")),
            nn::add(nn::matmul(xn, params_.get(pre + ".v.w")), params_.get(pre + ".v.b")),
            w, cfg_.H);
        attn = nn::add(nn::matmul(attn, params_.get(pre + ".o.w")), params_.get(pre + ".o.b"));
        x = nn::add(x, nn::dropout(attn, cfg_.dropout, dropout_rng, training));

        Tensor x2 = nn::layer_norm(x, params_.get(pre + ".n2.g"), params_.get(pre + ".n2.b"));
        Tensor ff = nn::relu(
            nn::add(nn::matmul(x2, params_.get(pre + ".f1.w")), params_.get(pre + ".f1.b")));
        ff = nn::add(nn::matmul(ff, params_.get(pre + ".f2.w")), params_.get(pre + ".f2.b"));
        x = nn::add(x, nn::dropout(ff, cfg_.dropout, dropout_rng, training));
    }
    x = nn::layer_norm(x, params_.get("norm.g"), params_.get("norm.b"));

    // Keep the last time slot of each sequence.
    std::vector<std::int64_t> last(static_cast<std::size_t>(seqs));
    for (std::int64_t s = 0; s < seqs; ++s) last[static_cast<std::size_t>(s)] = s * w + w - 1;
    return nn::gather_rows(x, last);
}

Tensor StGnn::forward_logits(const std::vector<WindowTensor>& windows,
                             const std::vector<std::vector<const Adjacency*>>& graphs,
                             std::mt19937_64& dropout_rng, bool training) {
    Tensor s = spatial_encode(windows, graphs, dropout_rng, training);
    Tensor z = temporal_encode(s, static_cast<std::int64_t>(windows.size()),
                               dropout_rng, training);
    return nn::add(nn::matmul(z, params_.get("head.w")), params_.get("head.b"));
}

std::vector<double> StGnn::forward(const WindowTensor& window,
                                   const std::vector<const Adjacency*>& graphs) {
    nn::NoGradGuard off;
    std::mt19937_64 unused(0);
    Tensor logits = forward_logits({window}, {graphs}, unused, /*training=*/false);
    return probs_from_logits(logits);
}

std::vector<double> probs_from_logits(const Tensor& logits) {
    std::vector<double> p(logits.values().size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        // clamp keeps sigmoid inside the open interval (0,1) in double
        double z = std::clamp(logits.values()[i], -700.0, 36.7);
        p[i] = z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                      : std::exp(z) / (1.0 + std::exp(z));
    }
    return p;
}

std::vector<std::uint8_t> classify(const std::vector<double>& probs, double gamma) {
    if (gamma <= 0.0 || gamma >= 1.0)
        throw ConfigError("classify: gamma must be in (0,1), got " + std::to_string(gamma));
    std::vector<std::uint8_t> y(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) y[i] = probs[i] >= gamma ? 1 : 0;
    return y;
}

/* ---- persistence ----------------------------------------------------------- */

void save_model(const std::string& path, const StGnn& model,
                std::map<std::string, std::string> extra_meta) {
    auto meta = model.config().to_map();
    for (auto& [k, v] : extra_meta) meta[k] = v;
    nn::save_checkpoint(path, model.params(), meta);
}

StGnn load_model(const std::string& path, std::map<std::string, std::string>* meta_out) {
    nn::LoadedCheckpoint ck = nn::load_checkpoint(path);
    std::map<std::string, std::string> cfg_keys;
    for (const char* k : {"strategy", "F", "D", "H", "W", "dropout", "temporal_layers",
                          "d_embed", "epsilon", "n_tokens"}) {
        auto it = ck.meta.find(k);
        if (it != ck.meta.end()) cfg_keys[k] = it->second;
    }
    if (meta_out) *meta_out = ck.meta;
    return StGnn::from_parts(ModelConfig::from_map(cfg_keys), std::move(ck.params));
}

void write_model_config(const std::string& path, const ModelConfig& cfg) {
    std::string out;
    for (const auto& [k, v] : cfg.to_map()) out += k + "=" + v + "\n";
    write_file(path, out);
}

}  // namespace pumpwatch
