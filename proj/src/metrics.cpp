#include "pumpwatch/metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "pumpwatch/csvio.hpp"
#include "pumpwatch/errors.hpp"

namespace pumpwatch {

Confusion confusion(const std::vector<std::uint8_t>& preds,
                    const std::vector<std::uint8_t>& labels,
                    const std::vector<std::uint8_t>& valid) {
    if (preds.size() != labels.size() || preds.size() != valid.size())
        throw ShapeMismatch("confusion: got " + std::to_string(preds.size()) +
                            " preds, " + std::to_string(labels.size()) + " labels, " +
                            std::to_string(valid.size()) + " mask entries");
    Confusion c;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!valid[i]) continue;
        if (labels[i]) (preds[i] ? c.tp : c.fn)++;
        else (preds[i] ? c.fp : c.tn)++;
    }
    return c;
}

Prf1 prf1(const Confusion& c) {
    Prf1 r;
    if (c.tp + c.fp > 0) r.precision = static_cast<double>(c.tp) / (c.tp + c.fp);
    if (c.tp + c.fn > 0) r.recall = static_cast<double>(c.tp) / (c.tp + c.fn);
    if (r.precision + r.recall > 0.0)
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    return r;
}

PRCurve pr_curve(const std::vector<double>& probs,
                 const std::vector<std::uint8_t>& labels,
                 const std::vector<std::uint8_t>& valid) {
    if (probs.size() != labels.size() || probs.size() != valid.size())
        throw ShapeMismatch("pr_curve: got " + std::to_string(probs.size()) +
                            " probs, " + std::to_string(labels.size()) + " labels, " +
                            std::to_string(valid.size()) + " mask entries");
    std::vector<std::pair<double, std::uint8_t>> obs;  // (prob, label)
    std::int64_t n_pos = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (!valid[i]) continue;
        obs.emplace_back(probs[i], labels[i]);
        n_pos += labels[i] ? 1 : 0;
    }
    if (n_pos == 0)
        throw NoPositives("pr_curve: no positive labels among " +
                          std::to_string(obs.size()) + " valid observations");

    std::sort(obs.begin(), obs.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    PRCurve curve;
    std::int64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < obs.size()) {
        const double thr = obs[i].first;
        // Consume the whole tie group: classifying at `thr` flips every
        // observation with prob >= thr to positive at once.
        while (i < obs.size() && obs[i].first == thr) {
            (obs[i].second ? tp : fp)++;
            ++i;
        }
        PRPoint p;
        p.threshold = thr;
        p.recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        curve.points.push_back(p);
    }

    // Trapezoid over recall, anchored at (0, precision of the first point).
    double prev_r = 0.0, prev_p = curve.points.front().precision, auc = 0.0;
    for (const PRPoint& p : curve.points) {
        auc += (p.recall - prev_r) * 0.5 * (p.precision + prev_p);
        prev_r = p.recall;
        prev_p = p.precision;
    }
    curve.auc = auc;
    return curve;
}

std::vector<TokenReport> per_token_report(const std::vector<std::uint8_t>& preds,
                                          const std::vector<std::uint8_t>& labels,
                                          const std::vector<std::uint8_t>& valid,
                                          const std::vector<std::int64_t>& token_of,
                                          const std::vector<std::string>& symbols,
                                          std::int64_t min_events) {
    if (preds.size() != labels.size() || preds.size() != valid.size() ||
        preds.size() != token_of.size())
        throw ShapeMismatch("per_token_report: input lengths differ");
    std::map<std::int64_t, Confusion> by_token;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (!valid[i]) continue;
        const std::int64_t t = token_of[i];
        if (t < 0 || t >= static_cast<std::int64_t>(symbols.size()))
            throw BadEdgeIndex("per_token_report: token id " + std::to_string(t) +
                               " outside [0," + std::to_string(symbols.size()) + ")");
        Confusion& c = by_token[t];
        if (labels[i]) (preds[i] ? c.tp : c.fn)++;
        else (preds[i] ? c.fp : c.tn)++;
    }
    std::vector<TokenReport> out;
    for (const auto& [t, c] : by_token) {
        const std::int64_t positives = c.tp + c.fn;
        if (positives < min_events) continue;
        TokenReport r;
        r.symbol = symbols[static_cast<std::size_t>(t)];
        r.positives = positives;
        r.conf = c;
        r.scores = prf1(c);
        out.push_back(std::move(r));
    }
    return out;
}

void write_pr_csv(const std::string& path, const PRCurve& curve, double recall_min) {
    std::string out = "threshold,recall,precision\n";
    for (const PRPoint& p : curve.points) {
        if (p.recall < recall_min) continue;
        out += fmt_double(p.threshold) + "," + fmt_double(p.recall) + "," +
               fmt_double(p.precision) + "\n";
    }
    write_file(path, out);
}

void write_pr_svg(const std::string& path, const PRCurve& curve, double recall_min) {
    const double w = 640.0, h = 480.0, pad = 48.0;
    auto px = [&](double recall) { return pad + recall * (w - 2 * pad); };
    auto py = [&](double prec) { return h - pad - prec * (h - 2 * pad); };

    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
        "viewBox=\"0 0 640 480\">\n"
        "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n"
        "<line x1=\"48\" y1=\"432\" x2=\"592\" y2=\"432\" stroke=\"black\"/>\n"
        "<line x1=\"48\" y1=\"48\" x2=\"48\" y2=\"432\" stroke=\"black\"/>\n"
        "<text x=\"320\" y=\"470\" text-anchor=\"middle\" font-size=\"14\">recall</text>\n"
        "<text x=\"16\" y=\"240\" text-anchor=\"middle\" font-size=\"14\" "
        "transform=\"rotate(-90 16 240)\">precision</text>\n";

    std::string pts;
    for (const PRPoint& p : curve.points) {
        if (p.recall < recall_min) continue;
        if (!pts.empty()) pts += " ";
        pts += fmt_double(px(p.recall)) + "," + fmt_double(py(p.precision));
    }
    svg += "<polyline fill=\"none\" stroke=\"#1965b0\" stroke-width=\"2\" points=\"" +
           pts + "\"/>\n";
    svg += "<text x=\"560\" y=\"64\" text-anchor=\"end\" font-size=\"14\">AUC " +
           fmt_double(curve.auc) + "</text>\n</svg>\n";
    write_file(path, svg);
}

}  // namespace pumpwatch
