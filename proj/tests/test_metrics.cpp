#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pumpwatch/errors.hpp"
#include "pumpwatch/metrics.hpp"

using namespace pumpwatch;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

/* ---- confusion counts ---- */

TEST_CASE("confusion tallies only valid observations") {
    const std::vector<std::uint8_t> preds = {1, 1, 0, 0, 1, 0, 1};
    const std::vector<std::uint8_t> labels = {1, 0, 1, 0, 1, 1, 0};
    const std::vector<std::uint8_t> valid = {1, 1, 1, 1, 0, 0, 0};
    Confusion c = confusion(preds, labels, valid);
    CHECK(c.tp == 1);
    CHECK(c.fp == 1);
    CHECK(c.fn == 1);
    CHECK(c.tn == 1);
    CHECK(c.total() == 4);

    CHECK_THROWS_AS(confusion({1}, {1, 0}, {1, 1}), ShapeMismatch);
}

TEST_CASE("prf1 handles every zero-denominator case") {
    // Hand-enumerated tables; expected values from fractions done by hand.
    struct Row {
        Confusion c;
        double p, r, f1;
    };
    const std::vector<Row> table = {
        {{0, 0, 0, 10}, 0.0, 0.0, 0.0},       // nothing predicted, nothing real
        {{0, 5, 0, 5}, 0.0, 0.0, 0.0},        // alarms with no real positives
        {{0, 0, 5, 5}, 0.0, 0.0, 0.0},        // positives fully missed, no alarms
        {{5, 0, 0, 5}, 1.0, 1.0, 1.0},        // perfect
        {{3, 1, 2, 4}, 0.75, 0.6, 2.0 * 0.75 * 0.6 / (0.75 + 0.6)},
        {{1, 9, 0, 0}, 0.1, 1.0, 2.0 * 0.1 / 1.1},
        {{0, 3, 7, 0}, 0.0, 0.0, 0.0},        // all alarms wrong, all misses
    };
    for (const Row& row : table) {
        Prf1 s = prf1(row.c);
        CHECK(s.precision == doctest::Approx(row.p).epsilon(1e-15));
        CHECK(s.recall == doctest::Approx(row.r).epsilon(1e-15));
        CHECK(s.f1 == doctest::Approx(row.f1).epsilon(1e-15));
    }
}

/* ---- precision-recall curve ---- */

TEST_CASE("pr_curve matches the exhaustive oracle on random score vectors") {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    std::bernoulli_distribution coin(0.3);
    std::uniform_int_distribution<int> size(2, 60);

    for (int rep = 0; rep < 100; ++rep) {
        const int m = size(rng);
        std::vector<double> probs(static_cast<std::size_t>(m));
        std::vector<std::uint8_t> labels(probs.size());
        bool any_pos = false;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            probs[i] = score(rng);
            // Quantize every third rep so ties between scores are common.
            if (rep % 3 == 0) probs[i] = std::round(probs[i] * 8.0) / 8.0;
            labels[i] = coin(rng) ? 1 : 0;
            any_pos |= labels[i] == 1;
        }
        if (!any_pos) labels[0] = 1;
        const std::vector<std::uint8_t> valid(probs.size(), 1);

        PRCurve got = pr_curve(probs, labels, valid);
        oracle::PRResult want = oracle::pr_exhaustive(probs, labels, valid);
        REQUIRE(got.points.size() == want.points.size());
        CHECK(std::fabs(got.auc - want.auc) < 1e-12);
        for (std::size_t i = 0; i < want.points.size(); ++i) {
            CHECK(std::fabs(got.points[i].threshold - want.points[i].threshold) < 1e-12);
            CHECK(std::fabs(got.points[i].recall - want.points[i].recall) < 1e-12);
            CHECK(std::fabs(got.points[i].precision - want.points[i].precision) < 1e-12);
        }
        // Recall must never decrease along the curve.
        for (std::size_t i = 1; i < got.points.size(); ++i)
            CHECK(got.points[i].recall >= got.points[i - 1].recall);
    }
}

TEST_CASE("pr_curve on a tiny hand-checked vector") {
    // scores .9 .8 .3 .1, labels 1 0 1 0
    // t=.9: tp1 fp0 -> P1 R.5 | t=.8: tp1 fp1 -> P.5 R.5 | t=.3: tp2 fp1
    // -> P2/3 R1 | t=.1: tp2 fp2 -> P.5 R1
    const std::vector<double> probs = {0.9, 0.8, 0.3, 0.1};
    const std::vector<std::uint8_t> labels = {1, 0, 1, 0};
    PRCurve c = pr_curve(probs, labels, {1, 1, 1, 1});
    REQUIRE(c.points.size() == 4);
    CHECK(c.points[0].threshold == doctest::Approx(0.9));
    CHECK(c.points[0].recall == doctest::Approx(0.5));
    CHECK(c.points[0].precision == doctest::Approx(1.0));
    CHECK(c.points[1].precision == doctest::Approx(0.5));
    CHECK(c.points[2].recall == doctest::Approx(1.0));
    CHECK(c.points[2].precision == doctest::Approx(2.0 / 3.0));
    CHECK(c.points[3].precision == doctest::Approx(0.5));
    // AUC: anchor (0,1), trapezoid over recall.
    // 0.5*(1+1)*0.5 + 0.5*(1+.5)*0 + 0.5*(.5+2/3)*0.5 + 0.5*(2/3+.5)*0
    const double want_auc = 0.5 * (1.0 + 1.0) * 0.5 + 0.5 * (0.5 + 2.0 / 3.0) * 0.5;
    CHECK(c.auc == doctest::Approx(want_auc).epsilon(1e-15));
}

TEST_CASE("pr_curve drops invalid cells and needs a positive") {
    const std::vector<double> probs = {0.9, 0.8, 0.7};
    // Only invalid cell carries the positive -> effectively no positives.
    CHECK_THROWS_AS(pr_curve(probs, {1, 0, 0}, {0, 1, 1}), NoPositives);
    CHECK_THROWS_AS(pr_curve(probs, {0, 0, 0}, {1, 1, 1}), NoPositives);

    // Masking the top-scored false alarm changes the first point.
    PRCurve all = pr_curve(probs, {0, 1, 0}, {1, 1, 1});
    PRCurve masked = pr_curve(probs, {0, 1, 0}, {0, 1, 1});
    CHECK(all.points[0].precision == doctest::Approx(0.0));
    CHECK(masked.points[0].precision == doctest::Approx(1.0));
    CHECK(masked.auc > all.auc);
}

/* ---- per-token breakdown ---- */

TEST_CASE("per_token_report filters rare tokens and recomputes scores") {
    // Two tokens: token 0 has 6 positives (kept), token 1 has 2 (dropped
    // at the default floor of 5).
    std::vector<std::uint8_t> preds, labels, valid;
    std::vector<std::int64_t> token_of;
    auto push = [&](std::int64_t tok, int y, int yhat, int ok) {
        token_of.push_back(tok);
        labels.push_back(static_cast<std::uint8_t>(y));
        preds.push_back(static_cast<std::uint8_t>(yhat));
        valid.push_back(static_cast<std::uint8_t>(ok));
    };
    for (int k = 0; k < 6; ++k) push(0, 1, k < 4 ? 1 : 0, 1);  // 4 tp, 2 fn
    for (int k = 0; k < 3; ++k) push(0, 0, k == 0 ? 1 : 0, 1);  // 1 fp, 2 tn
    push(0, 1, 1, 0);                                           // invalid, ignored
    for (int k = 0; k < 2; ++k) push(1, 1, 1, 1);
    push(1, 0, 0, 1);

    const std::vector<std::string> symbols = {"AAA", "BBB"};
    auto reports = per_token_report(preds, labels, valid, token_of, symbols, 5);
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].symbol == "AAA");
    CHECK(reports[0].positives == 6);
    CHECK(reports[0].conf.tp == 4);
    CHECK(reports[0].conf.fp == 1);
    CHECK(reports[0].conf.fn == 2);
    CHECK(reports[0].conf.tn == 2);
    CHECK(reports[0].scores.precision == doctest::Approx(0.8));
    CHECK(reports[0].scores.recall == doctest::Approx(4.0 / 6.0));

    // Lowering the floor brings BBB in.
    auto both = per_token_report(preds, labels, valid, token_of, symbols, 1);
    REQUIRE(both.size() == 2);
    CHECK(both[1].symbol == "BBB");
    CHECK(both[1].scores.f1 == doctest::Approx(1.0));
}

/* ---- exports ---- */

TEST_CASE("pr exports write the curve and honor the recall floor") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "pumpwatch_metrics_test";
    fs::create_directories(dir);

    const std::vector<double> probs = {0.9, 0.8, 0.3, 0.1};
    const std::vector<std::uint8_t> labels = {1, 0, 1, 0};
    PRCurve c = pr_curve(probs, labels, {1, 1, 1, 1});

    const std::string csv_path = (dir / "pr.csv").string();
    write_pr_csv(csv_path, c);
    const std::string text = slurp(csv_path);
    CHECK(text.rfind("threshold,recall,precision\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 4 points

    // recall_min trims early points from the file, not from the curve.
    write_pr_csv(csv_path, c, 0.75);
    const std::string trimmed = slurp(csv_path);
    CHECK(std::count(trimmed.begin(), trimmed.end(), '\n') == 3);  // header + 2
    CHECK(c.points.size() == 4);

    const std::string svg_path = (dir / "pr.svg").string();
    write_pr_svg(svg_path, c);
    const std::string svg = slurp(svg_path);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
}
