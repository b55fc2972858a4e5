// Command-line front end: fetch/ingest/features/graph/train/eval/synth/
// report plus manifest-driven reruns. Every command resolves its options to
// a flat key=value map (defaults < config file < --set < flags), executes,
// and drops a manifest.json next to its outputs recording the resolved
// config, input digests and artifact list.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pumpwatch/configfile.hpp"
#include "pumpwatch/csvio.hpp"
#include "pumpwatch/digest.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/features.hpp"
#include "pumpwatch/fetch.hpp"
#include "pumpwatch/graph.hpp"
#include "pumpwatch/kline.hpp"
#include "pumpwatch/manifest.hpp"
#include "pumpwatch/metrics.hpp"
#include "pumpwatch/model.hpp"
#include "pumpwatch/panel.hpp"
#include "pumpwatch/synth.hpp"
#include "pumpwatch/timeutil.hpp"
#include "pumpwatch/trainer.hpp"

namespace fs = std::filesystem;
using namespace pumpwatch;

namespace {

using KvMap = std::map<std::string, std::string>;

const std::string& need(const KvMap& cfg, const char* key) {
    auto it = cfg.find(key);
    if (it == cfg.end())
        throw ConfigError(std::string("missing required option '") + key + "'");
    return it->second;
}

std::string get_or(const KvMap& cfg, const char* key, const std::string& fallback) {
    auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

double num_or(const KvMap& cfg, const char* key, double fallback) {
    auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError(std::string("option '") + key + "': cannot parse '" +
                          it->second + "'");
    }
}

std::string out_dir(const KvMap& cfg) {
    const std::string& dir = need(cfg, "out");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    return dir;
}

std::optional<std::string> env_seed() {
    const char* v = std::getenv("PUMPWATCH_SEED");
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

void add_input(Manifest& m, const std::string& path) {
    m.inputs[path] = hex64(digest_file(path));
}

void finish(Manifest& m, const KvMap& effective, const std::string& dir) {
    m.config = effective;
    write_manifest(dir + "/manifest.json", m);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        if (comma > start) out.push_back(s.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

// Shared: load a panel and derive the chronological split from the config.
struct PanelBundle {
    Panel panel;
    SplitIndex split;
};

PanelBundle load_panel(const KvMap& cfg, KvMap& eff, Manifest& m) {
    const std::string& path = need(cfg, "panel");
    add_input(m, path);
    PanelBundle pb;
    pb.panel = read_panel_csv(path);
    const double ft = num_or(cfg, "f_train", 0.6);
    const double fv = num_or(cfg, "f_val", 0.2);
    const int z = static_cast<int>(num_or(cfg, "embargo", 5));
    pb.split = chronological_split(pb.panel, ft, fv, z);
    eff["panel"] = path;
    eff["f_train"] = fmt_double(ft);
    eff["f_val"] = fmt_double(fv);
    eff["embargo"] = fmt_int(z);
    return pb;
}

// TrainConfig keys only, with everything command-level stripped out.
KvMap train_keys_only(const KvMap& cfg) {
    KvMap out = cfg;
    for (const char* k : {"panel", "out", "f_train", "f_val", "embargo", "threads"})
        out.erase(k);
    return out;
}

/* ---- commands ------------------------------------------------------------ */

void run_fetch(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "fetch";
    KvMap eff = cfg;

    const std::string& endpoint = need(cfg, "endpoint");
    const std::int64_t start = parse_iso8601(need(cfg, "start"));
    const std::int64_t end = parse_iso8601(need(cfg, "end"));
    FetchOptions opt;
    opt.page_limit = static_cast<int>(num_or(cfg, "page_limit", opt.page_limit));
    eff["page_limit"] = fmt_int(opt.page_limit);

    for (const std::string& sym : split_list(need(cfg, "symbols"))) {
        std::vector<std::string> rows = fetch_klines(endpoint, sym, start, end, opt);
        const std::string path = dir + "/" + sym + ".csv";
        write_kline_csv(path, rows);
        m.outputs.push_back(path);
        std::cout << sym << ": " << rows.size() << " candles -> " << path << "\n";
    }
    finish(m, eff, dir);
}

void run_ingest(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "ingest";
    KvMap eff = cfg;

    std::vector<std::string> files;
    if (cfg.count("klines")) {
        files = split_list(cfg.at("klines"));
    } else {
        const std::string& kdir = need(cfg, "klines_dir");
        for (const auto& entry : fs::directory_iterator(kdir))
            if (entry.path().extension() == ".csv") files.push_back(entry.path().string());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw IoError("no .csv kline files in " + kdir);
    }

    std::vector<CandleSeries> series;
    for (const std::string& f : files) {
        add_input(m, f);
        series.push_back(read_kline_csv(f, fs::path(f).stem().string()));
    }
    const std::string& sched_path = need(cfg, "schedule");
    add_input(m, sched_path);
    Panel panel = assemble_panel(std::move(series), read_schedule_csv(sched_path));

    const std::string out = dir + "/panel.csv";
    write_panel_csv(out, panel);
    m.outputs.push_back(out);
    std::cout << "panel: " << panel.n_tokens() << " tokens x " << panel.n_hours()
              << " hours, " << panel.events.size() << " events -> " << out << "\n";
    finish(m, eff, dir);
}

void run_features(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "features";
    KvMap eff = cfg;

    PanelBundle pb = load_panel(cfg, eff, m);
    FeaturePanel fp = build_feature_matrix(pb.panel);
    StandardizeStats stats = standardize(fp, pb.split.train_begin, pb.split.train_end);

    const std::string feat_path = dir + "/features.csv";
    write_features_csv(feat_path, fp);
    m.outputs.push_back(feat_path);

    std::string stats_csv = "feature,mean,std\n";
    for (int f = 0; f < kFeatureCount; ++f)
        stats_csv += feature_names()[static_cast<std::size_t>(f)] + "," +
                     fmt_double(stats.mean[static_cast<std::size_t>(f)]) + "," +
                     fmt_double(stats.std[static_cast<std::size_t>(f)]) + "\n";
    const std::string stats_path = dir + "/standardize.csv";
    write_file(stats_path, stats_csv);
    m.outputs.push_back(stats_path);

    std::cout << "features: " << fp.n_hours << " hours x " << fp.n_tokens
              << " tokens -> " << feat_path << "\n";
    finish(m, eff, dir);
}

void run_graph(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "graph";
    KvMap eff = cfg;

    PanelBundle pb = load_panel(cfg, eff, m);
    const std::string strategy = get_or(cfg, "strategy", "G1");
    const CorrSignal sig = parse_corr_signal(get_or(cfg, "signal", "num_trades"));
    const double rho = num_or(cfg, "rho", 0.90);
    const double tau_min = num_or(cfg, "tau_min", 0.15);
    const int lookback = static_cast<int>(num_or(cfg, "lookback", 12));
    eff["strategy"] = strategy;
    eff["signal"] = get_or(cfg, "signal", "num_trades");
    eff["rho"] = fmt_double(rho);
    eff["tau_min"] = fmt_double(tau_min);
    eff["lookback"] = fmt_int(lookback);

    if (strategy == "G1" || strategy == "identity") {
        Adjacency adj = strategy == "G1"
                            ? build_static_graph(pb.panel, sig, pb.split.train_begin,
                                                 pb.split.train_end, rho, tau_min)
                            : Adjacency::identity(pb.panel.n_tokens());
        const std::string path = dir + "/edges.csv";
        write_edges_csv(path, adj);
        m.outputs.push_back(path);
        std::cout << strategy << ": " << adj.n_edges() << " edges -> " << path << "\n";
    } else if (strategy == "G2") {
        GraphTimeline tl = build_dynamic_timeline(pb.panel, sig, pb.split.train_begin,
                                                  pb.split.train_end, lookback, rho,
                                                  tau_min);
        const std::string path = dir + "/timeline.csv";
        write_timeline_csv(path, tl);
        m.outputs.push_back(path);
        std::cout << "G2: " << tl.snapshots.size() << " snapshots -> " << path << "\n";
    } else if (strategy == "G3") {
        throw ConfigError("G3 adjacency is learned during training; train a model "
                          "and inspect its checkpoint instead");
    } else {
        throw ConfigError("unknown strategy '" + strategy + "' (G1|G2|G3|identity)");
    }
    finish(m, eff, dir);
}

void run_synth(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "synth";

    KvMap synth_kv = cfg;
    synth_kv.erase("out");
    synth_kv.erase("threads");
    if (!synth_kv.count("seed")) {
        if (auto s = env_seed()) synth_kv["seed"] = *s;
    }
    SynthConfig sc = synth_config_from_kv(synth_kv);
    SynthResult res = generate(sc);

    const std::string panel_path = dir + "/panel.csv";
    const std::string truth_path = dir + "/truth.csv";
    write_panel_csv(panel_path, res.panel);
    write_truth_csv(truth_path, res.events);
    m.outputs.push_back(panel_path);
    m.outputs.push_back(truth_path);

    KvMap eff = synth_config_to_kv(sc);
    eff["out"] = need(cfg, "out");
    std::cout << "synth: " << res.panel.n_tokens() << " tokens x "
              << res.panel.n_hours() << " hours, " << res.events.size()
              << " pumps -> " << panel_path << "\n";
    finish(m, eff, dir);
}

void run_train(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "train";
    KvMap eff = cfg;

    PanelBundle pb = load_panel(cfg, eff, m);
    KvMap train_kv = train_keys_only(cfg);
    if (!train_kv.count("seeds")) {
        if (auto s = env_seed()) train_kv["seeds"] = *s;
    }
    const TrainConfig tc = train_config_from_kv(train_kv);
    for (const auto& [k, v] : train_config_to_kv(tc)) eff[k] = v;

    FeaturePanel fp = build_feature_matrix(pb.panel);
    standardize(fp, pb.split.train_begin, pb.split.train_end);

    auto save_seed = [&](const FitResult& fr, const SeedOutcome& o) {
        const std::string tag = fmt_int(static_cast<std::int64_t>(o.seed));
        const std::string ckpt = dir + "/checkpoint_seed_" + tag + ".ckpt";
        KvMap extra = {{"gamma", fmt_double(fr.gamma)},
                       {"seed", tag},
                       {"signal", tc.signal},
                       {"rho", fmt_double(tc.rho)},
                       {"tau_min", fmt_double(tc.tau_min)},
                       {"lookback", fmt_int(tc.lookback)},
                       {"f_train", eff.at("f_train")},
                       {"f_val", eff.at("f_val")},
                       {"embargo", eff.at("embargo")}};
        save_model(ckpt, fr.model, extra);
        const std::string hist = dir + "/history_seed_" + tag + ".csv";
        write_history_csv(hist, fr.history);
        m.outputs.push_back(ckpt);
        m.outputs.push_back(hist);
        std::cout << "seed " << o.seed << ": gamma=" << fr.gamma
                  << " test F1=" << o.test_scores.f1 << " (best epoch "
                  << fr.best_epoch << ")\n";
    };

    ProtocolReport report = run_protocol(pb.panel, fp, pb.split, tc, save_seed);
    if (report.outcomes.size() == report.failed_seeds.size())
        throw Error("train: every seed failed; see stderr for per-seed reasons");

    const std::string agg = dir + "/aggregate.csv";
    write_aggregate_csv(agg, report);
    m.outputs.push_back(agg);
    const std::string mc_path = dir + "/model_config.txt";
    ModelConfig mc = tc.model;
    mc.n_tokens = fp.n_tokens;
    write_model_config(mc_path, mc);
    m.outputs.push_back(mc_path);

    for (const auto& row : report.aggregate)
        if (row.metric == "f1")
            std::cout << "test F1 mean=" << row.mean << " std=" << row.stddev
                      << " over " << row.values.size() << " seeds\n";
    if (!report.failed_seeds.empty()) {
        std::cerr << "train: " << report.failed_seeds.size() << " seed(s) failed:";
        for (std::uint64_t s : report.failed_seeds) std::cerr << " " << s;
        std::cerr << "\n";
    }
    finish(m, eff, dir);
}

void run_eval(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "eval";
    KvMap eff = cfg;

    const std::string& ckpt_path = need(cfg, "checkpoint");
    add_input(m, ckpt_path);
    KvMap meta;
    StGnn model = load_model(ckpt_path, &meta);

    // Split and graph settings default to what the checkpoint was trained
    // with; flags may override (gamma in particular).
    KvMap merged = meta;
    for (const auto& [k, v] : cfg) merged[k] = v;
    PanelBundle pb = load_panel(merged, eff, m);

    TrainConfig tc;
    tc.model = model.config();
    tc.signal = get_or(merged, "signal", "num_trades");
    tc.rho = num_or(merged, "rho", 0.90);
    tc.tau_min = num_or(merged, "tau_min", 0.15);
    tc.lookback = static_cast<int>(num_or(merged, "lookback", 12));
    const double gamma = num_or(merged, "gamma", 0.5);
    eff["gamma"] = fmt_double(gamma);
    eff["signal"] = tc.signal;
    eff["rho"] = fmt_double(tc.rho);
    eff["tau_min"] = fmt_double(tc.tau_min);
    eff["lookback"] = fmt_int(tc.lookback);
    eff["checkpoint"] = ckpt_path;

    FeaturePanel fp = build_feature_matrix(pb.panel);
    standardize(fp, pb.split.train_begin, pb.split.train_end);
    const GraphBundle graphs = GraphBundle::build(pb.panel, pb.split, tc);

    BlockEval test = evaluate_block(model, fp, graphs, pb.split.test_begin,
                                    pb.split.test_end, 64, 1.0);
    const auto preds = classify(test.probs, gamma);
    const Confusion conf = confusion(preds, test.labels, test.valid);
    const Prf1 scores = prf1(conf);

    std::string metrics_csv = "metric,value\n";
    metrics_csv += "precision," + fmt_double(scores.precision) + "\n";
    metrics_csv += "recall," + fmt_double(scores.recall) + "\n";
    metrics_csv += "f1," + fmt_double(scores.f1) + "\n";
    double auc = std::numeric_limits<double>::quiet_NaN();
    try {
        PRCurve curve = pr_curve(test.probs, test.labels, test.valid);
        auc = curve.auc;
        const std::string pr_path = dir + "/pr.csv";
        write_pr_csv(pr_path, curve);
        m.outputs.push_back(pr_path);
    } catch (const NoPositives&) {
        std::cerr << "eval: test block has no positives; PR curve skipped\n";
    }
    metrics_csv += "pr_auc," + fmt_double(auc) + "\n";
    metrics_csv += "gamma," + fmt_double(gamma) + "\n";
    metrics_csv += "tp," + fmt_int(conf.tp) + "\n";
    metrics_csv += "fp," + fmt_int(conf.fp) + "\n";
    metrics_csv += "fn," + fmt_int(conf.fn) + "\n";
    metrics_csv += "tn," + fmt_int(conf.tn) + "\n";
    const std::string metrics_path = dir + "/metrics.csv";
    write_file(metrics_path, metrics_csv);
    m.outputs.push_back(metrics_path);

    std::string pred_csv = "symbol,timestamp_utc,prob,label,valid\n";
    for (std::size_t r = 0; r < test.probs.size(); ++r) {
        const std::int64_t anchor =
            test.anchors[r / static_cast<std::size_t>(fp.n_tokens)];
        const std::int64_t tok = test.token_of[r];
        pred_csv += fp.symbols[static_cast<std::size_t>(tok)] + "," +
                    format_iso8601(fp.timestamps[static_cast<std::size_t>(anchor)]) +
                    "," + fmt_double(test.probs[r]) + "," +
                    fmt_int(test.labels[r]) + "," + fmt_int(test.valid[r]) + "\n";
    }
    const std::string pred_path = dir + "/predictions.csv";
    write_file(pred_path, pred_csv);
    m.outputs.push_back(pred_path);

    const auto tokens = per_token_report(preds, test.labels, test.valid,
                                         test.token_of, fp.symbols,
                                         static_cast<std::int64_t>(num_or(merged, "min_events", 5)));
    std::string tok_csv = "symbol,events,precision,recall,f1\n";
    for (const TokenReport& tr : tokens)
        tok_csv += tr.symbol + "," + fmt_int(tr.positives) + "," +
                   fmt_double(tr.scores.precision) + "," + fmt_double(tr.scores.recall) +
                   "," + fmt_double(tr.scores.f1) + "\n";
    const std::string tok_path = dir + "/per_token.csv";
    write_file(tok_path, tok_csv);
    m.outputs.push_back(tok_path);

    std::cout << "eval: P=" << scores.precision << " R=" << scores.recall
              << " F1=" << scores.f1 << " PR-AUC=" << auc << " at gamma=" << gamma
              << "\n";
    finish(m, eff, dir);
}

void run_report(const KvMap& cfg) {
    const std::string dir = out_dir(cfg);
    Manifest m;
    m.command = "report";
    KvMap eff = cfg;

    const std::string& pred_path = need(cfg, "predictions");
    add_input(m, pred_path);
    const double recall_min = num_or(cfg, "recall_min", 0.0);
    eff["recall_min"] = fmt_double(recall_min);

    std::vector<double> probs;
    std::vector<std::uint8_t> labels, valid;
    const auto lines = read_lines(pred_path);
    if (lines.empty() || split_csv(lines[0]).size() < 5)
        throw MalformedRow(1, "predictions CSV must have header "
                              "symbol,timestamp_utc,prob,label,valid");
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        const auto f = split_csv(lines[r]);
        if (f.size() < 5) throw MalformedRow(r + 1, "expected 5 fields");
        probs.push_back(parse_double(f[2], r + 1, "prob"));
        labels.push_back(parse_i64(f[3], r + 1, "label") != 0 ? 1 : 0);
        valid.push_back(parse_i64(f[4], r + 1, "valid") != 0 ? 1 : 0);
    }
    PRCurve curve = pr_curve(probs, labels, valid);

    const std::string csv_path = dir + "/pr.csv";
    const std::string svg_path = dir + "/pr.svg";
    write_pr_csv(csv_path, curve, recall_min);
    write_pr_svg(svg_path, curve, recall_min);
    m.outputs.push_back(csv_path);
    m.outputs.push_back(svg_path);
    std::cout << "report: " << curve.points.size() << " points, PR-AUC=" << curve.auc
              << " -> " << csv_path << "\n";
    finish(m, eff, dir);
}

void dispatch(const std::string& command, const KvMap& cfg) {
    if (command == "fetch") run_fetch(cfg);
    else if (command == "ingest") run_ingest(cfg);
    else if (command == "features") run_features(cfg);
    else if (command == "graph") run_graph(cfg);
    else if (command == "synth") run_synth(cfg);
    else if (command == "train") run_train(cfg);
    else if (command == "eval") run_eval(cfg);
    else if (command == "report") run_report(cfg);
    else throw ConfigError("unknown command '" + command + "' in manifest");
}

void run_rerun(const KvMap& cfg) {
    const std::string& path = need(cfg, "manifest");
    Manifest m = read_manifest(path);
    for (const auto& [input, recorded] : m.inputs) {
        const std::string now = hex64(digest_file(input));
        if (now != recorded)
            throw Error("rerun: input " + input + " changed since the manifest was "
                        "written (digest " + now + ", recorded " + recorded + ")");
    }
    KvMap replay = m.config;
    if (cfg.count("out")) replay["out"] = cfg.at("out");
    std::cout << "rerun: replaying '" << m.command << "' from " << path << "\n";
    dispatch(m.command, replay);
}

/* ---- argument plumbing ------------------------------------------------------ */

// Collects one subcommand's options into the resolved key=value map.
struct ArgSink {
    CLI::App* cmd = nullptr;
    std::string config_path;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;

    void add_flag_option(const char* flag, const char* key, const char* help) {
        cmd->add_option_function<std::string>(
            flag, [this, key](const std::string& v) { flags[key] = v; }, help);
    }

    KvMap resolve() const {
        KvMap kv;
        if (!config_path.empty()) kv = read_kv_file(config_path);
        for (const std::string& s : sets) {
            const std::size_t eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--set expects key=value, got '" + s + "'");
            kv[s.substr(0, eq)] = s.substr(eq + 1);
        }
        for (const auto& [k, v] : flags) kv[k] = v;
        return kv;
    }
};

ArgSink* make_command(CLI::App& app, std::vector<std::unique_ptr<ArgSink>>& sinks,
                      const char* name, const char* desc,
                      const std::function<void(const KvMap&)>& fn) {
    auto sink = std::make_unique<ArgSink>();
    ArgSink* raw = sink.get();
    raw->cmd = app.add_subcommand(name, desc);
    raw->cmd->add_option("--config", raw->config_path,
                         "key=value config file (lowest precedence)");
    raw->cmd->add_option("--set", raw->sets, "override any config key (key=value)");
    raw->cmd->callback([raw, fn] { fn(raw->resolve()); });
    sinks.push_back(std::move(sink));
    return raw;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hourly OHLCV pump-and-dump detection pipeline"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "cap on worker parallelism (informational; "
                                         "all commands currently run one worker)");

    std::vector<std::unique_ptr<ArgSink>> sinks;

    ArgSink* fetch = make_command(app, sinks, "fetch",
                                  "download hourly klines from a spot REST endpoint",
                                  run_fetch);
    fetch->add_flag_option("--endpoint", "endpoint", "base URL, e.g. http://host:port");
    fetch->add_flag_option("--symbols", "symbols", "comma-separated symbol list");
    fetch->add_flag_option("--start", "start", "ISO-8601 start (inclusive)");
    fetch->add_flag_option("--end", "end", "ISO-8601 end (inclusive)");
    fetch->add_flag_option("--page-limit", "page_limit", "rows per request");
    fetch->add_flag_option("--out", "out", "output directory");

    ArgSink* ingest = make_command(app, sinks, "ingest",
                                   "assemble kline CSVs + pump schedule into a panel",
                                   run_ingest);
    ingest->add_flag_option("--klines", "klines", "comma-separated kline CSV files");
    ingest->add_flag_option("--klines-dir", "klines_dir",
                            "directory of <SYMBOL>.csv kline files");
    ingest->add_flag_option("--schedule", "schedule", "pump schedule CSV");
    ingest->add_flag_option("--out", "out", "output directory");

    ArgSink* features = make_command(app, sinks, "features",
                                     "build & standardize the feature panel",
                                     run_features);
    features->add_flag_option("--panel", "panel", "panel CSV");
    features->add_flag_option("--f-train", "f_train", "train fraction (default 0.6)");
    features->add_flag_option("--f-val", "f_val", "validation fraction (default 0.2)");
    features->add_flag_option("--embargo", "embargo", "embargo hours (default 5)");
    features->add_flag_option("--out", "out", "output directory");

    ArgSink* graph = make_command(app, sinks, "graph",
                                  "build & export a correlation graph", run_graph);
    graph->add_flag_option("--panel", "panel", "panel CSV");
    graph->add_flag_option("--strategy", "strategy", "G1 | G2 | identity");
    graph->add_flag_option("--signal", "signal", "num_trades | volume");
    graph->add_flag_option("--rho", "rho", "correlation quantile (default 0.90)");
    graph->add_flag_option("--tau-min", "tau_min", "threshold floor (default 0.15)");
    graph->add_flag_option("--lookback", "lookback", "G2 event window (default 12)");
    graph->add_flag_option("--f-train", "f_train", "train fraction");
    graph->add_flag_option("--f-val", "f_val", "validation fraction");
    graph->add_flag_option("--embargo", "embargo", "embargo hours");
    graph->add_flag_option("--out", "out", "output directory");

    ArgSink* synth = make_command(app, sinks, "synth",
                                  "generate a synthetic labeled panel", run_synth);
    synth->add_flag_option("--seed", "seed", "generator seed");
    synth->add_flag_option("--n-tokens", "n_tokens", "tokens (default 20)");
    synth->add_flag_option("--n-hours", "n_hours", "hours (default 4000)");
    synth->add_flag_option("--n-pumps", "n_pumps", "pump events (default 40)");
    synth->add_flag_option("--n-clusters", "n_clusters", "clusters (default 4)");
    synth->add_flag_option("--out", "out", "output directory");

    ArgSink* train = make_command(app, sinks, "train",
                                  "train across seeds and aggregate test metrics",
                                  run_train);
    train->add_flag_option("--panel", "panel", "panel CSV");
    train->add_flag_option("--strategy", "strategy", "G1 | G2 | G3 | identity");
    train->add_flag_option("--seeds", "seeds", "comma-separated seed list");
    train->add_flag_option("--f-train", "f_train", "train fraction");
    train->add_flag_option("--f-val", "f_val", "validation fraction");
    train->add_flag_option("--embargo", "embargo", "embargo hours");
    train->add_flag_option("--out", "out", "output directory");

    ArgSink* eval_cmd = make_command(app, sinks, "eval",
                                     "evaluate a checkpoint on the test block",
                                     run_eval);
    eval_cmd->add_flag_option("--checkpoint", "checkpoint", "model checkpoint");
    eval_cmd->add_flag_option("--panel", "panel", "panel CSV");
    eval_cmd->add_flag_option("--gamma", "gamma", "decision threshold override");
    eval_cmd->add_flag_option("--out", "out", "output directory");

    ArgSink* report = make_command(app, sinks, "report",
                                   "PR curve CSV + SVG from a predictions dump",
                                   run_report);
    report->add_flag_option("--predictions", "predictions", "predictions CSV from eval");
    report->add_flag_option("--recall-min", "recall_min",
                            "drop curve points below this recall");
    report->add_flag_option("--out", "out", "output directory");

    ArgSink* rerun = make_command(app, sinks, "rerun",
                                  "replay a command from its manifest", run_rerun);
    rerun->add_flag_option("--manifest", "manifest", "manifest.json of a previous run");
    rerun->add_flag_option("--out", "out", "output directory override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigInfeasible& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
