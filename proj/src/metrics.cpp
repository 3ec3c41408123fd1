#include "skpca/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace skpca {

namespace {
constexpr std::string_view kModule = "eval_harness";
}

std::size_t LabeledScores::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::outlier));
}

std::size_t LabeledScores::negatives() const { return labels.size() - positives(); }

void LabeledScores::validate(bool need_both_classes) const {
    require(!scores.empty(), kModule, "no scores");
    require(scores.size() == labels.size(), kModule, "scores and labels differ in length");
    for (double s : scores) require(!std::isnan(s), kModule, "score is NaN");
    if (need_both_classes) {
        require(positives() > 0 && negatives() > 0, kModule,
                "ROC needs both inliers and outliers");
    }
}

double f1_score(const LabeledScores& ls, double threshold) {
    ls.validate(false);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < ls.scores.size(); ++i) {
        const bool predicted = ls.scores[i] > threshold;
        const bool actual = ls.labels[i] == Label::outlier;
        tp += predicted && actual;
        fp += predicted && !actual;
        fn += !predicted && actual;
    }
    const double precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    const double recall = tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

namespace {

struct RocCounts {
    std::vector<std::size_t> tp, fp;
    std::vector<double> thresholds;
    std::size_t P = 0, N = 0;
};

RocCounts roc_counts(const LabeledScores& ls) {
    ls.validate(true);
    const std::size_t n = ls.scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return ls.scores[a] > ls.scores[b]; });
    RocCounts c;
    c.P = ls.positives();
    c.N = ls.negatives();
    c.tp.push_back(0);
    c.fp.push_back(0);
    c.thresholds.push_back(std::numeric_limits<double>::infinity());
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < n;) {
        const double s = ls.scores[order[k]];
        while (k < n && ls.scores[order[k]] == s) {
            (ls.labels[order[k]] == Label::outlier ? tp : fp) += 1;
            ++k;
        }
        c.tp.push_back(tp);
        c.fp.push_back(fp);
        c.thresholds.push_back(s);
    }
    return c;
}

}  // namespace

std::vector<RocPoint> roc_curve(const LabeledScores& ls) {
    const RocCounts c = roc_counts(ls);
    std::vector<RocPoint> out;
    out.reserve(c.tp.size());
    for (std::size_t k = 0; k < c.tp.size(); ++k) {
        out.push_back({static_cast<double>(c.fp[k]) / static_cast<double>(c.N),
                       static_cast<double>(c.tp[k]) / static_cast<double>(c.P), c.thresholds[k]});
    }
    return out;
}

double auroc(const LabeledScores& ls) {
    const RocCounts c = roc_counts(ls);
    // Trapezoids in integer counts: sum dFP * (TP_k + TP_{k-1}) / (2 P N).
    unsigned long long twice_area = 0;
    for (std::size_t k = 1; k < c.tp.size(); ++k) {
        twice_area += static_cast<unsigned long long>(c.fp[k] - c.fp[k - 1]) *
                      static_cast<unsigned long long>(c.tp[k] + c.tp[k - 1]);
    }
    return static_cast<double>(twice_area) /
           (2.0 * static_cast<double>(c.P) * static_cast<double>(c.N));
}

Summary summarize(std::span<const double> values) {
    Summary s;
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double acc = 0.0;
        for (double v : values) acc += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(values.size() - 1));
    }
    return s;
}

}  // namespace skpca
