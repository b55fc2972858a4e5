#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pumpwatch {

struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::int64_t total() const { return tp + fp + fn + tn; }
};

struct Prf1 {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

// Point-per-threshold precision-recall curve, recall non-decreasing.
struct PRPoint {
    double threshold = 0.0, recall = 0.0, precision = 0.0;
};

struct PRCurve {
    std::vector<PRPoint> points;
    double auc = 0.0;
};

// Counts over valid observations only; entries with valid[i] == 0 are
// dropped before anything is tallied.
Confusion confusion(const std::vector<std::uint8_t>& preds,
                    const std::vector<std::uint8_t>& labels,
                    const std::vector<std::uint8_t>& valid);

// 0/0 convention: precision, recall and f1 are all 0 when their
// denominators vanish.
Prf1 prf1(const Confusion& c);

// One point per distinct probability, thresholds descending so recall is
// non-decreasing. AUC is the trapezoid over recall after prepending a
// (recall 0, precision of the top point) anchor. Throws NoPositives when
// the valid observations contain no positive labels.
PRCurve pr_curve(const std::vector<double>& probs,
                 const std::vector<std::uint8_t>& labels,
                 const std::vector<std::uint8_t>& valid);

struct TokenReport {
    std::string symbol;
    std::int64_t positives = 0;  // test positives for the token
    Confusion conf;
    Prf1 scores;
};

// Per-token breakdown over test observations. token_of[i] indexes into
// symbols; tokens with fewer than min_events valid positives are omitted.
std::vector<TokenReport> per_token_report(const std::vector<std::uint8_t>& preds,
                                          const std::vector<std::uint8_t>& labels,
                                          const std::vector<std::uint8_t>& valid,
                                          const std::vector<std::int64_t>& token_of,
                                          const std::vector<std::string>& symbols,
                                          std::int64_t min_events = 5);

// CSV with header threshold,recall,precision; optional lower recall bound
// filters the exported points (presentation only, AUC is untouched).
void write_pr_csv(const std::string& path, const PRCurve& curve,
                  double recall_min = 0.0);

// Minimal standalone SVG line chart of the curve (x recall, y precision).
void write_pr_svg(const std::string& path, const PRCurve& curve,
                  double recall_min = 0.0);

}  // namespace pumpwatch
