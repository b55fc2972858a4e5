#include "pumpwatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/nn/adam.hpp"
#include "pumpwatch/nn/ops.hpp"
#include "pumpwatch/rng.hpp"

namespace pumpwatch {

using nn::Tensor;

/* ---- config ------------------------------------------------------------- */

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    if (patience < 1) throw ConfigError("patience must be >= 1");
    if (batch_anchors < 1) throw ConfigError("batch_anchors must be >= 1");
    if (pos_weight_cap < 1.0) throw ConfigError("pos_weight_cap must be >= 1");
    if (keep_ratio <= 0.0 || keep_ratio > 1.0)
        throw ConfigError("keep_ratio must be in (0,1]");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (rho <= 0.0 || rho >= 1.0) throw ConfigError("rho must be in (0,1)");
    if (tau_min < 0.0 || tau_min >= 1.0) throw ConfigError("tau_min must be in [0,1)");
    if (lookback < 1) throw ConfigError("lookback must be >= 1");
    parse_corr_signal(signal);
    model.validate();
}

namespace {

const char* kTrainKeys =
    "lr,max_epochs,patience,batch_anchors,pos_weight_cap,keep_ratio,seeds,"
    "signal,rho,tau_min,lookback,strategy,D,H,W,dropout,temporal_layers,"
    "d_embed,epsilon";

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        const std::string tok = s.substr(start, comma - start);
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
        start = comma + 1;
    }
    if (seeds.empty()) throw ConfigError("seeds: empty list");
    return seeds;
}

}  // namespace

TrainConfig train_config_from_kv(const std::map<std::string, std::string>& kv) {
    TrainConfig cfg;
    for (const auto& [k, v] : kv) {
        try {
            if (k == "lr") cfg.lr = std::stod(v);
            else if (k == "max_epochs") cfg.max_epochs = std::stoll(v);
            else if (k == "patience") cfg.patience = std::stoll(v);
            else if (k == "batch_anchors") cfg.batch_anchors = std::stoll(v);
            else if (k == "pos_weight_cap") cfg.pos_weight_cap = std::stod(v);
            else if (k == "keep_ratio") cfg.keep_ratio = std::stod(v);
            else if (k == "seeds") cfg.seeds = parse_seed_list(v);
            else if (k == "signal") cfg.signal = v;
            else if (k == "rho") cfg.rho = std::stod(v);
            else if (k == "tau_min") cfg.tau_min = std::stod(v);
            else if (k == "lookback") cfg.lookback = static_cast<int>(std::stol(v));
            else if (k == "strategy") cfg.model.strategy = v;
            else if (k == "D") cfg.model.D = std::stoll(v);
            else if (k == "H") cfg.model.H = std::stoll(v);
            else if (k == "W") cfg.model.W = std::stoll(v);
            else if (k == "dropout") cfg.model.dropout = std::stod(v);
            else if (k == "temporal_layers") cfg.model.temporal_layers = std::stoll(v);
            else if (k == "d_embed") cfg.model.d_embed = std::stoll(v);
            else if (k == "epsilon") cfg.model.epsilon = std::stod(v);
            else
                throw ConfigError("unknown config key '" + k + "' (valid: " +
                                  kTrainKeys + ")");
        } catch (const std::invalid_argument&) {
            throw ConfigError("config key '" + k + "': cannot parse value '" + v + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("config key '" + k + "': value '" + v + "' out of range");
        }
    }
    cfg.validate();
    return cfg;
}

std::map<std::string, std::string> train_config_to_kv(const TrainConfig& cfg) {
    std::string seeds;
    for (std::uint64_t s : cfg.seeds) {
        if (!seeds.empty()) seeds += ",";
        seeds += fmt_int(static_cast<std::int64_t>(s));
    }
    std::map<std::string, std::string> kv = {
        {"lr", fmt_double(cfg.lr)},
        {"max_epochs", fmt_int(cfg.max_epochs)},
        {"patience", fmt_int(cfg.patience)},
        {"batch_anchors", fmt_int(cfg.batch_anchors)},
        {"pos_weight_cap", fmt_double(cfg.pos_weight_cap)},
        {"keep_ratio", fmt_double(cfg.keep_ratio)},
        {"seeds", seeds},
        {"signal", cfg.signal},
        {"rho", fmt_double(cfg.rho)},
        {"tau_min", fmt_double(cfg.tau_min)},
        {"lookback", fmt_int(cfg.lookback)},
    };
    for (const auto& [k, v] : cfg.model.to_map())
        if (k != "F") kv[k] = v;  // F is fixed by the feature set
    return kv;
}

/* ---- graphs --------------------------------------------------------------- */

GraphBundle GraphBundle::build(const Panel& panel, const SplitIndex& split,
                               const TrainConfig& cfg) {
    GraphBundle b;
    b.strategy = cfg.model.strategy;
    const CorrSignal sig = parse_corr_signal(cfg.signal);
    if (b.strategy == "G1") {
        b.fixed = build_static_graph(panel, sig, split.train_begin, split.train_end,
                                     cfg.rho, cfg.tau_min);
    } else if (b.strategy == "G2") {
        b.fixed = Adjacency::identity(panel.n_tokens());
        b.timeline = build_dynamic_timeline(panel, sig, split.train_begin,
                                            split.train_end, cfg.lookback, cfg.rho,
                                            cfg.tau_min);
    } else {  // identity, G3
        b.fixed = Adjacency::identity(panel.n_tokens());
    }
    return b;
}

std::vector<const Adjacency*> GraphBundle::step_graphs(
    const std::vector<std::int64_t>& timestamps, std::int64_t anchor,
    std::int64_t w) const {
    std::vector<const Adjacency*> out(static_cast<std::size_t>(w));
    if (strategy == "G2") {
        for (std::int64_t u = 0; u < w; ++u)
            out[static_cast<std::size_t>(u)] =
                &graph_at(timeline, timestamps[static_cast<std::size_t>(anchor - w + 1 + u)]);
    } else {
        for (std::int64_t u = 0; u < w; ++u) out[static_cast<std::size_t>(u)] = &fixed;
    }
    return out;
}

std::vector<std::int64_t> anchors_in_block(std::int64_t begin, std::int64_t end,
                                           std::int64_t w) {
    std::vector<std::int64_t> out;
    for (std::int64_t t = begin + w - 1; t < end; ++t) out.push_back(t);
    return out;
}

/* ---- loss & threshold ------------------------------------------------------ */

nn::Tensor bce_loss(const nn::Tensor& logits, const std::vector<double>& targets,
                    const std::vector<double>& weights, double pos_weight) {
    return nn::weighted_bce_with_logits(logits, targets, weights, pos_weight);
}

double select_threshold(const std::vector<double>& probs,
                        const std::vector<std::uint8_t>& labels,
                        const std::vector<std::uint8_t>& valid) {
    std::vector<std::pair<double, std::uint8_t>> obs;
    std::int64_t n_pos = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!valid[i]) continue;
        obs.emplace_back(probs[i], labels[i]);
        n_pos += labels[i] ? 1 : 0;
    }
    if (n_pos == 0) {
        std::cerr << "[trainer] warning: no positives among "
                  << obs.size() << " validation observations; cutoff defaults to 0.5\n";
        return 0.5;
    }

    std::vector<double> uniq;
    uniq.reserve(obs.size());
    for (const auto& [p, y] : obs) uniq.push_back(p);
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    std::vector<double> candidates = {0.5};
    for (std::size_t i = 0; i + 1 < uniq.size(); ++i)
        candidates.push_back(0.5 * (uniq[i] + uniq[i + 1]));
    std::sort(candidates.begin(), candidates.end());

    double best_gamma = 0.5, best_f1 = -1.0;
    for (double g : candidates) {
        Confusion c;
        for (const auto& [p, y] : obs) {
            const bool pred = p >= g;
            if (y) (pred ? c.tp : c.fn)++;
            else (pred ? c.fp : c.tn)++;
        }
        const double f1 = prf1(c).f1;
        if (f1 >= best_f1) {  // ascending sweep: ties land on the larger cutoff
            best_f1 = f1;
            best_gamma = g;
        }
    }
    return best_gamma;
}

/* ---- batched passes --------------------------------------------------------- */

namespace {

struct Batch {
    std::vector<WindowTensor> windows;
    std::vector<std::vector<const Adjacency*>> graphs;
    std::vector<double> targets, weights;
    double weight_sum = 0.0;
};

Batch make_batch(const FeaturePanel& fp, const GraphBundle& graphs,
                 const std::vector<std::int64_t>& anchors, std::size_t first,
                 std::size_t last, std::int64_t w) {
    Batch b;
    for (std::size_t a = first; a < last; ++a) {
        const std::int64_t t = anchors[a];
        b.windows.push_back(make_window(fp, t, static_cast<int>(w)));
        b.graphs.push_back(graphs.step_graphs(fp.timestamps, t, w));
        for (std::int64_t i = 0; i < fp.n_tokens; ++i) {
            const std::size_t cell = fp.cell(t, i);
            b.targets.push_back(fp.labels[cell] ? 1.0 : 0.0);
            b.weights.push_back(fp.ok[cell] ? 1.0 : 0.0);
            b.weight_sum += b.weights.back();
        }
    }
    return b;
}

}  // namespace

BlockEval evaluate_block(StGnn& model, const FeaturePanel& fp,
                         const GraphBundle& graphs, std::int64_t block_begin,
                         std::int64_t block_end, std::int64_t batch_anchors,
                         double pos_weight) {
    nn::NoGradGuard off;
    std::mt19937_64 unused(0);
    const std::int64_t w = model.config().W;

    BlockEval ev;
    ev.anchors = anchors_in_block(block_begin, block_end, w);
    double loss_weighted = 0.0, weight_total = 0.0;

    for (std::size_t first = 0; first < ev.anchors.size();
         first += static_cast<std::size_t>(batch_anchors)) {
        const std::size_t last =
            std::min(ev.anchors.size(), first + static_cast<std::size_t>(batch_anchors));
        Batch b = make_batch(fp, graphs, ev.anchors, first, last, w);
        Tensor logits = model.forward_logits(b.windows, b.graphs, unused, false);
        std::vector<double> probs = probs_from_logits(logits);

        if (b.weight_sum > 0.0) {
            const double l =
                bce_loss(logits, b.targets, b.weights, pos_weight).item();
            loss_weighted += l * b.weight_sum;
            weight_total += b.weight_sum;
        }
        for (std::size_t r = 0; r < probs.size(); ++r) {
            ev.probs.push_back(probs[r]);
            ev.labels.push_back(b.targets[r] > 0.5 ? 1 : 0);
            ev.valid.push_back(b.weights[r] > 0.0 ? 1 : 0);
            ev.token_of.push_back(static_cast<std::int64_t>(r) % fp.n_tokens);
        }
    }
    if (weight_total > 0.0) ev.loss = loss_weighted / weight_total;
    return ev;
}

/* ---- fit ---------------------------------------------------------------------- */

FitResult fit(const FeaturePanel& fp, const SplitIndex& split,
              const GraphBundle& graphs, const TrainConfig& cfg,
              std::uint64_t seed) {
    cfg.validate();
    ModelConfig mc = cfg.model;
    mc.n_tokens = fp.n_tokens;
    const std::int64_t w = mc.W;

    const std::vector<std::int64_t> train_anchors =
        anchors_in_block(split.train_begin, split.train_end, w);
    const std::vector<std::int64_t> val_anchors =
        anchors_in_block(split.val_begin, split.val_end, w);
    if (train_anchors.empty() || val_anchors.empty())
        throw PanelTooShort("fit: no full lookback window fits in the train or "
                            "validation block (W=" + std::to_string(w) + ")");

    // Class balance over the training anchors' valid cells.
    std::int64_t n_pos = 0, n_neg = 0;
    std::vector<std::uint8_t> anchor_has_pos(train_anchors.size(), 0);
    for (std::size_t a = 0; a < train_anchors.size(); ++a)
        for (std::int64_t i = 0; i < fp.n_tokens; ++i) {
            const std::size_t cell = fp.cell(train_anchors[a], i);
            if (!fp.ok[cell]) continue;
            if (fp.labels[cell]) {
                ++n_pos;
                anchor_has_pos[a] = 1;
            } else {
                ++n_neg;
            }
        }
    if (n_pos == 0)
        throw NoPositivesInTrain("fit: training block has no pump labels");
    const double pos_weight =
        std::min(static_cast<double>(n_neg) / static_cast<double>(n_pos),
                 cfg.pos_weight_cap);

    FitResult res;
    res.seed = seed;
    res.model = StGnn::create(mc, seed);
    nn::Adam opt(cfg.lr);
    auto shuffle_rng = make_rng(seed, kStreamShuffle);
    auto dropout_rng = make_rng(seed, kStreamDropout);
    auto downsample_rng = make_rng(seed, kStreamDownsample);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double best_val = std::numeric_limits<double>::infinity();
    std::map<std::string, std::vector<double>> best_params;
    std::int64_t epochs_since_best = 0;

    for (std::int64_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<std::int64_t> epoch_anchors;
        for (std::size_t a = 0; a < train_anchors.size(); ++a) {
            if (anchor_has_pos[a] || cfg.keep_ratio >= 1.0 ||
                unit(downsample_rng) < cfg.keep_ratio)
                epoch_anchors.push_back(train_anchors[a]);
        }
        std::shuffle(epoch_anchors.begin(), epoch_anchors.end(), shuffle_rng);

        double loss_weighted = 0.0, weight_total = 0.0;
        for (std::size_t first = 0; first < epoch_anchors.size();
             first += static_cast<std::size_t>(cfg.batch_anchors)) {
            const std::size_t last = std::min(
                epoch_anchors.size(), first + static_cast<std::size_t>(cfg.batch_anchors));
            Batch b = make_batch(fp, graphs, epoch_anchors, first, last, w);
            if (b.weight_sum == 0.0) continue;  // fully masked hours
            Tensor logits =
                res.model.forward_logits(b.windows, b.graphs, dropout_rng, true);
            Tensor loss = bce_loss(logits, b.targets, b.weights, pos_weight);
            res.model.params().zero_grads();
            nn::backward(loss);
            opt.step(res.model.params());
            loss_weighted += loss.item() * b.weight_sum;
            weight_total += b.weight_sum;
        }

        BlockEval val = evaluate_block(res.model, fp, graphs, split.val_begin,
                                       split.val_end, cfg.batch_anchors, pos_weight);
        const Prf1 val_scores =
            prf1(confusion(classify(val.probs, 0.5), val.labels, val.valid));

        EpochStats st;
        st.epoch = epoch;
        st.train_loss = weight_total > 0.0
                            ? loss_weighted / weight_total
                            : std::numeric_limits<double>::quiet_NaN();
        st.val_loss = val.loss;
        st.val_f1 = val_scores.f1;
        res.history.push_back(st);

        if (val.loss < best_val) {
            best_val = val.loss;
            best_params = res.model.params().snapshot();
            res.best_epoch = epoch;
            epochs_since_best = 0;
        } else if (++epochs_since_best >= cfg.patience) {
            break;
        }
    }

    if (!best_params.empty()) res.model.params().restore(best_params);

    BlockEval val = evaluate_block(res.model, fp, graphs, split.val_begin,
                                   split.val_end, cfg.batch_anchors, pos_weight);
    res.gamma = select_threshold(val.probs, val.labels, val.valid);
    return res;
}

FitResult fit(const Panel& panel, const FeaturePanel& fp, const SplitIndex& split,
              const TrainConfig& cfg, std::uint64_t seed) {
    return fit(fp, split, GraphBundle::build(panel, split, cfg), cfg, seed);
}

/* ---- multi-seed protocol ----------------------------------------------------- */

namespace {

ProtocolReport::Row aggregate_row(const std::string& metric,
                                  std::vector<double> values) {
    ProtocolReport::Row row;
    row.metric = metric;
    row.values = std::move(values);
    const std::size_t n = row.values.size();
    if (n == 0) {
        row.mean = row.stddev = std::numeric_limits<double>::quiet_NaN();
        return row;
    }
    double sum = 0.0;
    for (double v : row.values) sum += v;
    row.mean = sum / static_cast<double>(n);
    if (n > 1) {
        double ss = 0.0;
        for (double v : row.values) ss += (v - row.mean) * (v - row.mean);
        row.stddev = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return row;
}

}  // namespace

ProtocolReport run_protocol(
    const Panel& panel, const FeaturePanel& fp, const SplitIndex& split,
    const TrainConfig& cfg,
    const std::function<void(const FitResult&, const SeedOutcome&)>& per_seed) {
    cfg.validate();
    const GraphBundle graphs = GraphBundle::build(panel, split, cfg);

    ProtocolReport report;
    std::vector<double> precisions, recalls, f1s, aucs, gammas;

    for (std::uint64_t seed : cfg.seeds) {
        SeedOutcome o;
        o.seed = seed;
        try {
            FitResult fr = fit(fp, split, graphs, cfg, seed);
            o.gamma = fr.gamma;
            o.best_epoch = fr.best_epoch;
            o.history = fr.history;

            // Single test pass, after gamma is frozen inside fit().
            ++report.test_passes;
            BlockEval test = evaluate_block(fr.model, fp, graphs, split.test_begin,
                                            split.test_end, cfg.batch_anchors, 1.0);
            const auto preds = classify(test.probs, fr.gamma);
            o.test_conf = confusion(preds, test.labels, test.valid);
            o.test_scores = prf1(o.test_conf);
            try {
                o.test_curve = pr_curve(test.probs, test.labels, test.valid);
                o.test_pr_auc = o.test_curve.auc;
            } catch (const NoPositives&) {
                // test block without pumps: PR curve undefined, F1 still reported
            }
            o.ok = true;

            precisions.push_back(o.test_scores.precision);
            recalls.push_back(o.test_scores.recall);
            f1s.push_back(o.test_scores.f1);
            aucs.push_back(o.test_pr_auc);
            gammas.push_back(o.gamma);
            if (per_seed) per_seed(fr, o);
        } catch (const Error& e) {
            o.error = e.what();
            report.failed_seeds.push_back(seed);
            std::cerr << "[trainer] seed " << seed << " failed: " << e.what() << "\n";
        }
        report.outcomes.push_back(std::move(o));
    }

    report.aggregate.push_back(aggregate_row("precision", precisions));
    report.aggregate.push_back(aggregate_row("recall", recalls));
    report.aggregate.push_back(aggregate_row("f1", f1s));
    report.aggregate.push_back(aggregate_row("pr_auc", aucs));
    report.aggregate.push_back(aggregate_row("gamma", gammas));
    return report;
}

/* ---- exports --------------------------------------------------------------------- */

void write_history_csv(const std::string& path,
                       const std::vector<EpochStats>& history) {
    std::string out = "epoch,train_loss,val_loss,val_f1\n";
    for (const EpochStats& e : history)
        out += fmt_int(e.epoch) + "," + fmt_double(e.train_loss) + "," +
               fmt_double(e.val_loss) + "," + fmt_double(e.val_f1) + "\n";
    write_file(path, out);
}

void write_aggregate_csv(const std::string& path, const ProtocolReport& report) {
    std::string header = "metric,mean,std";
    for (const SeedOutcome& o : report.outcomes)
        if (o.ok) header += ",seed_" + fmt_int(static_cast<std::int64_t>(o.seed));
    std::string out = header + "\n";
    for (const ProtocolReport::Row& row : report.aggregate) {
        out += row.metric + "," + fmt_double(row.mean) + "," + fmt_double(row.stddev);
        for (double v : row.values) out += "," + fmt_double(v);
        out += "\n";
    }
    write_file(path, out);
}

}  // namespace pumpwatch
