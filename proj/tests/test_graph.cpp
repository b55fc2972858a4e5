#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/graph.hpp"
#include "pumpwatch/nn/ops.hpp"
#include "pumpwatch/panel.hpp"
#include "pumpwatch/timeutil.hpp"

using namespace pumpwatch;

namespace {

constexpr std::int64_t kT0 = 1609459200;

// Edge list folded into a (src,dst) -> weight map for order-free comparison.
std::map<std::pair<std::int64_t, std::int64_t>, double> edge_map(const Adjacency& a) {
    std::map<std::pair<std::int64_t, std::int64_t>, double> m;
    for (std::int64_t e = 0; e < a.n_edges(); ++e)
        m[{a.src[static_cast<std::size_t>(e)], a.dst[static_cast<std::size_t>(e)]}] =
            a.weight[static_cast<std::size_t>(e)];
    return m;
}

Candle trade_candle(std::int64_t ts, double trades) {
    Candle c;
    c.open_time = ts;
    c.open = c.high = c.low = c.close = 1.0;
    c.volume = trades * 2.0;
    c.quote_asset_volume = trades * 2.0;
    c.num_trades = static_cast<std::int64_t>(trades);
    c.taker_buy_base = trades;
    c.taker_buy_quote = trades;
    return c;
}

// Panel whose per-token num_trades follow the supplied [token][hour] grid;
// labels go to the listed (token, hour) pairs.
Panel scripted_panel(const std::vector<std::vector<double>>& trades,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& label_at) {
    std::vector<CandleSeries> series(trades.size());
    std::vector<ScheduleEntry> schedule;
    for (std::size_t i = 0; i < trades.size(); ++i) {
        series[i].symbol = "TK" + std::to_string(i);
        for (std::size_t h = 0; h < trades[i].size(); ++h)
            series[i].candles.push_back(
                trade_candle(kT0 + static_cast<std::int64_t>(h) * kSecondsPerHour, trades[i][h]));
    }
    for (auto [tok, hour] : label_at)
        schedule.push_back({"TK" + std::to_string(tok), kT0 + hour * kSecondsPerHour});
    return assemble_panel(std::move(series), schedule);
}

}  // namespace

/* ---- correlation ---- */

TEST_CASE("pearson_matrix equals the two-pass oracle on random panels") {
    std::mt19937_64 rng(20240817);
    std::uniform_int_distribution<std::int64_t> pick_rows(2, 40), pick_cols(2, 20);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::int64_t rows = pick_rows(rng), n = pick_cols(rng);
        std::vector<double> s(static_cast<std::size_t>(rows * n));
        for (double& x : s) x = noise(rng);
        if (rep % 5 == 0)  // plant a constant column: correlates 0 with all
            for (std::int64_t t = 0; t < rows; ++t) s[static_cast<std::size_t>(t * n)] = 3.25;

        const auto got = pearson_matrix(s, rows, n);
        const auto want = oracle::pearson_matrix(s, rows, n);
        REQUIRE(got.size() == want.size());
        for (std::size_t k = 0; k < got.size(); ++k)
            CHECK(std::fabs(got[k] - want[k]) < 1e-12);
        for (std::int64_t i = 0; i < n; ++i) {
            CHECK(got[static_cast<std::size_t>(i * n + i)] == 0.0);
            for (std::int64_t j = 0; j < n; ++j) {
                CHECK(got[static_cast<std::size_t>(i * n + j)] ==
                      got[static_cast<std::size_t>(j * n + i)]);
                CHECK(std::fabs(got[static_cast<std::size_t>(i * n + j)]) <= 1.0 + 1e-12);
            }
        }
    }
    CHECK_THROWS_AS(pearson_matrix({1.0, 2.0}, 1, 2), TooFewSamples);
    CHECK_THROWS_AS(pearson_matrix({1.0, 2.0, 3.0}, 2, 2), ShapeMismatch);
}

TEST_CASE("quantile_threshold interpolates like the sorted oracle") {
    std::mt19937_64 rng(55);
    std::uniform_int_distribution<std::int64_t> pick_n(2, 15);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const std::int64_t n = pick_n(rng);
        std::vector<double> c(static_cast<std::size_t>(n * n), 0.0);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = i + 1; j < n; ++j) {
                const double v = rep % 7 == 0 ? std::round(u(rng) * 4.0) / 4.0 : u(rng);  // ties
                c[static_cast<std::size_t>(i * n + j)] = v;
                c[static_cast<std::size_t>(j * n + i)] = v;
            }
        for (double rho : {0.75, 0.90, 0.95}) {
            const double got = quantile_threshold(c, n, rho, 0.15);
            const double want =
                std::max(0.15, oracle::quantile(oracle::upper_triangle(c, n), rho));
            CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(quantile_threshold({0.0}, 1, 0.9, 0.15), TooFewSamples);
    // The floor binds when the quantile is small.
    std::vector<double> low = {0, 0.01, 0, 0.01, 0, 0.02, 0, 0.02, 0};
    CHECK(quantile_threshold(low, 3, 0.9, 0.15) == 0.15);
}

TEST_CASE("corr_signal_matrix is log1p of the chosen field, zero when absent") {
    Panel p = scripted_panel({{10, 20, 30}, {5, 0, 7}}, {});
    p.present[p.idx(1, 1)] = 0;  // knock out one candle
    auto s = corr_signal_matrix(p, CorrSignal::NumTrades, 0, 3);
    REQUIRE(s.size() == 6);
    CHECK(s[0] == doctest::Approx(std::log1p(10.0)).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(std::log1p(5.0)).epsilon(1e-15));
    CHECK(s[3] == 0.0);  // missing candle reads zero
    auto v = corr_signal_matrix(p, CorrSignal::Volume, 1, 3);
    CHECK(v[1] == 0.0);
    CHECK(v[2] == doctest::Approx(std::log1p(60.0)).epsilon(1e-15));
    CHECK_THROWS_AS(parse_corr_signal("trades"), ConfigError);
    CHECK(parse_corr_signal("volume") == CorrSignal::Volume);
}

/* ---- static strategy ---- */

TEST_CASE("static graph keeps only pairs above the quantile threshold") {
    // Tokens 0/1 move together, 2/3 move together, 4 is independent noise.
    std::mt19937_64 rng(77);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::int64_t T = 50;
    std::vector<std::vector<double>> trades(5, std::vector<double>(T));
    for (std::int64_t t = 0; t < T; ++t) {
        const double a = 40.0 + 25.0 * std::sin(0.37 * static_cast<double>(t));
        const double b = 35.0 + 20.0 * std::cos(0.23 * static_cast<double>(t));
        trades[0][static_cast<std::size_t>(t)] = a + noise(rng);
        trades[1][static_cast<std::size_t>(t)] = 1.5 * a + noise(rng);
        trades[2][static_cast<std::size_t>(t)] = b + noise(rng);
        trades[3][static_cast<std::size_t>(t)] = 2.0 * b + noise(rng);
        trades[4][static_cast<std::size_t>(t)] = 50.0 + 10.0 * noise(rng);
    }
    Panel p = scripted_panel(trades, {});
    const double rho = 0.80, tau_min = 0.15;
    Adjacency a = build_static_graph(p, CorrSignal::NumTrades, 0, T, rho, tau_min);
    CHECK(a.n == 5);

    // Oracle: recompute correlations and the threshold, keep strict exceeders.
    auto s = corr_signal_matrix(p, CorrSignal::NumTrades, 0, T);
    const auto c = oracle::pearson_matrix(s, T, 5);
    const double tau = std::max(tau_min, oracle::quantile(oracle::upper_triangle(c, 5), rho));
    auto got = edge_map(a);
    std::size_t expected_edges = 0;
    for (std::int64_t i = 0; i < 5; ++i)
        for (std::int64_t j = i + 1; j < 5; ++j) {
            const double w = c[static_cast<std::size_t>(i * 5 + j)];
            if (w > tau) {
                expected_edges += 2;
                REQUIRE(got.count({i, j}) == 1);
                REQUIRE(got.count({j, i}) == 1);
                CHECK(got[{i, j}] == doctest::Approx(w).epsilon(1e-12));
                CHECK(got[{j, i}] == doctest::Approx(w).epsilon(1e-12));
            } else {
                CHECK(got.count({i, j}) == 0);
            }
        }
    CHECK(static_cast<std::size_t>(a.n_edges()) == expected_edges);
    CHECK(a.n_edges() > 0);  // the planted pairs must survive

    // Retained fraction of unordered pairs stays within the quantile budget
    // (ties can push it slightly over 1 - rho).
    const double frac = static_cast<double>(a.n_edges() / 2) / 10.0;
    CHECK(frac <= (1.0 - rho) + 1e-9 + 0.1);  // one tie-slot of slack on 10 pairs
}

TEST_CASE("identity adjacency has no edges") {
    Adjacency id = Adjacency::identity(7);
    CHECK(id.n == 7);
    CHECK(id.n_edges() == 0);
}

/* ---- event-driven strategy ---- */

TEST_CASE("dynamic timeline accumulates running-mean snapshots at events") {
    // 6 tokens, 30 hours. Tokens {0,1,2} share one latent, {3,4,5} another,
    // with phase drift so each event window sees different correlations.
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 0.35);
    const std::int64_t T = 30, n = 6;
    std::vector<std::vector<double>> trades(static_cast<std::size_t>(n),
                                            std::vector<double>(static_cast<std::size_t>(T)));
    for (std::int64_t t = 0; t < T; ++t) {
        const double a = std::sin(0.9 * static_cast<double>(t));
        const double b = std::cos(0.4 * static_cast<double>(t) + 1.0);
        for (int i = 0; i < 3; ++i)
            trades[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] =
                60.0 + 30.0 * a + 5.0 * noise(rng) * (i + 1);
        for (int i = 3; i < 6; ++i)
            trades[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] =
                55.0 + 25.0 * b + 5.0 * noise(rng) * (i - 2);
    }
    // Three training events; one more in the "future" must be ignored.
    Panel p = scripted_panel(trades, {{0, 12}, {3, 18}, {1, 24}, {2, 29}});

    const int lookback = 8;
    const double rho = 0.75, tau_min = 0.15;
    GraphTimeline tl = build_dynamic_timeline(p, CorrSignal::NumTrades, 0, 28, lookback,
                                              rho, tau_min);
    REQUIRE(tl.snapshots.size() == 3);
    CHECK(tl.snapshot_ts ==
          std::vector<std::int64_t>{kT0 + 12 * kSecondsPerHour, kT0 + 18 * kSecondsPerHour,
                                    kT0 + 24 * kSecondsPerHour});

    // Oracle: recompute each event window, threshold, fold running means.
    std::map<std::pair<std::int64_t, std::int64_t>, oracle::RunningMean> acc;
    std::vector<std::map<std::pair<std::int64_t, std::int64_t>, double>> want_snapshots;
    for (std::int64_t ev : {12, 18, 24}) {
        const std::int64_t w_begin = std::max<std::int64_t>(0, ev - lookback);
        const std::int64_t rows = ev + 1 - w_begin;
        auto s = corr_signal_matrix(p, CorrSignal::NumTrades, w_begin, ev + 1);
        const auto c = oracle::pearson_matrix(s, rows, n);
        const double tau =
            std::max(tau_min, oracle::quantile(oracle::upper_triangle(c, n), rho));
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = i + 1; j < n; ++j) {
                const double w = c[static_cast<std::size_t>(i * n + j)];
                if (w > tau) acc[{i, j}].add(w);
            }
        std::map<std::pair<std::int64_t, std::int64_t>, double> snap;
        for (const auto& [ij, rm] : acc) {
            snap[ij] = rm.mean();
            snap[{ij.second, ij.first}] = rm.mean();
        }
        want_snapshots.push_back(std::move(snap));
    }

    std::set<std::pair<std::int64_t, std::int64_t>> prev_edges;
    for (std::size_t k = 0; k < 3; ++k) {
        auto got = edge_map(tl.snapshots[k]);
        const auto& want = want_snapshots[k];
        REQUIRE(got.size() == want.size());
        for (const auto& [ij, w] : want) {
            REQUIRE(got.count(ij) == 1);
            CHECK(got[ij] == doctest::Approx(w).epsilon(1e-12));
        }
        // Edge sets never shrink.
        std::set<std::pair<std::int64_t, std::int64_t>> cur;
        for (const auto& [ij, w] : got) cur.insert(ij);
        for (const auto& ij : prev_edges) CHECK(cur.count(ij) == 1);
        prev_edges = std::move(cur);
    }

    // graph_at: identity before, latest snapshot at/after each event, last
    // snapshot for validation/test times.
    CHECK(graph_at(tl, kT0).n_edges() == 0);
    CHECK(graph_at(tl, kT0 + 11 * kSecondsPerHour).n_edges() == 0);
    CHECK(edge_map(graph_at(tl, kT0 + 12 * kSecondsPerHour)) == edge_map(tl.snapshots[0]));
    CHECK(edge_map(graph_at(tl, kT0 + 17 * kSecondsPerHour)) == edge_map(tl.snapshots[0]));
    CHECK(edge_map(graph_at(tl, kT0 + 23 * kSecondsPerHour)) == edge_map(tl.snapshots[1]));
    CHECK(edge_map(graph_at(tl, kT0 + 500 * kSecondsPerHour)) == edge_map(tl.snapshots[2]));

    CHECK_THROWS_AS(
        build_dynamic_timeline(p, CorrSignal::NumTrades, 0, 28, 1, rho, tau_min),
        ConfigError);
}

TEST_CASE("dynamic timeline skips events with a one-row window") {
    // Event at the very first training hour has no trailing data.
    Panel p = scripted_panel({{10, 11, 12, 13, 14, 15}, {10, 12, 11, 14, 13, 15}},
                             {{0, 0}, {1, 4}});
    GraphTimeline tl = build_dynamic_timeline(p, CorrSignal::NumTrades, 0, 6, 4, 0.75, 0.15);
    REQUIRE(tl.snapshots.size() == 1);  // hour-0 event dropped, hour-4 kept
    CHECK(tl.snapshot_ts[0] == kT0 + 4 * kSecondsPerHour);
}

/* ---- learned strategy ---- */

TEST_CASE("adaptive adjacency is row-stochastic and collects epsilon exceeders") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 0.4);
    const std::int64_t n = 9, d = 4;
    std::vector<double> e1v(static_cast<std::size_t>(n * d)), e2v(e1v.size());
    for (double& x : e1v) x = noise(rng);
    for (double& x : e2v) x = noise(rng);
    nn::Tensor e1 = nn::Tensor::from_values(n, d, e1v, true);
    nn::Tensor e2 = nn::Tensor::from_values(n, d, e2v, true);

    const double epsilon = 0.02;
    AdaptiveGraph g = adaptive_adjacency(e1, e2, epsilon);
    REQUIRE(g.dense.rows() == n);
    REQUIRE(g.dense.cols() == n);

    for (std::int64_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::int64_t j = 0; j < n; ++j) row_sum += g.dense.at(i, j);
        CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    // Retained entries are exactly the strict epsilon exceeders, flat-indexed.
    std::size_t count = 0;
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            if (g.dense.at(i, j) > epsilon) ++count;
    REQUIRE(g.src.size() == count);
    REQUIRE(g.flat.size() == count);
    for (std::size_t e = 0; e < count; ++e) {
        const std::int64_t i = g.dst[e], j = g.src[e];
        CHECK(g.flat[e] == i * n + j);
        CHECK(g.dense.at(i, j) > epsilon);
    }

    // Gradients reach both embeddings through the retained entries.
    nn::Tensor picked = nn::gather_elements(g.dense, g.flat);
    nn::backward(nn::reduce_sum(picked));
    double g1 = 0.0, g2 = 0.0;
    for (double x : e1.grad()) g1 += std::fabs(x);
    for (double x : e2.grad()) g2 += std::fabs(x);
    CHECK(g1 > 0.0);
    CHECK(g2 > 0.0);
}

TEST_CASE("zero embeddings give the uniform graph") {
    const std::int64_t n = 84;
    nn::Tensor e1 = nn::Tensor::zeros(n, 48, true);
    nn::Tensor e2 = nn::Tensor::zeros(n, 48, true);
    AdaptiveGraph g = adaptive_adjacency(e1, e2, 0.005);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j)
            CHECK(g.dense.at(i, j) == doctest::Approx(1.0 / static_cast<double>(n)).epsilon(1e-12));
    // 1/84 > 0.005, so the uniform graph stays fully dense.
    CHECK(g.src.size() == static_cast<std::size_t>(n * n));

    nn::Tensor bad = nn::Tensor::zeros(n, 32, true);
    CHECK_THROWS_AS(adaptive_adjacency(e1, bad, 0.005), ShapeMismatch);
}

/* ---- exports ---- */

TEST_CASE("edge and timeline csv exports match the documented shape") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pumpwatch_graph_test";
    fs::create_directories(dir);

    Adjacency a;
    a.n = 3;
    a.src = {0, 1};
    a.dst = {1, 0};
    a.weight = {0.5, 0.5};
    const std::string edges_path = (dir / "edges.csv").string();
    write_edges_csv(edges_path, a);
    std::ifstream f(edges_path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    CHECK(text == "src,dst,weight\n0,1,0.5\n1,0,0.5\n");

    GraphTimeline tl;
    tl.n = 3;
    tl.initial = Adjacency::identity(3);
    tl.snapshot_ts = {kT0};
    tl.snapshots = {a};
    const std::string tl_path = (dir / "timeline.csv").string();
    write_timeline_csv(tl_path, tl);
    std::ifstream g(tl_path);
    std::string text2((std::istreambuf_iterator<char>(g)), std::istreambuf_iterator<char>());
    CHECK(text2 ==
          "snapshot_ts,src,dst,weight\n2021-01-01T00:00:00Z,0,1,0.5\n"
          "2021-01-01T00:00:00Z,1,0,0.5\n");
}
