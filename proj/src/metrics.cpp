#include "kanmlp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <limits>
#include <numeric>

#include "kanmlp/error.hpp"

namespace kanmlp {

namespace {

void check_label(int label, std::size_t index, const char* which) {
    if (label != 0 && label != 1) {
        throw MetricError(std::string(which) + " label " + std::to_string(label) + " at index " +
                          std::to_string(index) + " is not 0 or 1");
    }
}

double safe_ratio(std::size_t num, std::size_t den, bool& degenerate) {
    if (den == 0) {
        degenerate = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

void check_scores(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw MetricError(std::to_string(scores.size()) + " scores but " +
                          std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
        check_label(labels[i], i, "true");
        if (!std::isfinite(scores[i])) {
            throw MetricError("score at index " + std::to_string(i) + " is not finite");
        }
    }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
    const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const std::size_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) {
        throw MetricError("AUC is undefined unless both classes are present");
    }
    return {pos, neg};
}

// Shortest round-trip form, so CSVs are exact and stable.
std::string num(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

std::string fixed4(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 4);
    return {buf, res.ptr};
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> labels_true, std::span<const int> labels_pred) {
    if (labels_true.size() != labels_pred.size()) {
        throw MetricError(std::to_string(labels_true.size()) + " true labels but " +
                          std::to_string(labels_pred.size()) + " predictions");
    }
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels_true.size(); ++i) {
        check_label(labels_true[i], i, "true");
        check_label(labels_pred[i], i, "predicted");
        const bool actual = labels_true[i] == 1;
        const bool predicted = labels_pred[i] == 1;
        if (actual && predicted) ++cm.tp;
        else if (!actual && predicted) ++cm.fp;
        else if (actual) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double f1_score(double precision, double recall) {
    const double sum = precision + recall;
    return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm) {
    PrecisionRecallF1 out;
    out.precision = safe_ratio(cm.tp, cm.tp + cm.fp, out.precision_degenerate);
    out.recall = safe_ratio(cm.tp, cm.tp + cm.fn, out.recall_degenerate);
    if (out.precision + out.recall > 0.0) {
        out.f1 = f1_score(out.precision, out.recall);
    } else {
        out.f1_degenerate = true;
    }
    return out;
}

ClassReport per_class_report(const ConfusionMatrix& cm) {
    ClassReport report;
    report.matrix = cm;

    const auto gen = precision_recall_f1(cm);
    report.generated = {gen.precision, gen.recall, gen.f1, cm.tp + cm.fn};
    const auto real = precision_recall_f1(cm.swapped());
    report.real = {real.precision, real.recall, real.f1, cm.tn + cm.fp};

    const std::size_t total = cm.total();
    report.accuracy = total == 0 ? 0.0
                                 : static_cast<double>(cm.tp + cm.tn) / static_cast<double>(total);
    return report;
}

ClassReport per_class_report(std::span<const int> labels_true, std::span<const int> labels_pred) {
    return per_class_report(confusion(labels_true, labels_pred));
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels_true) {
    check_scores(scores, labels_true);
    const auto [pos, neg] = class_counts(labels_true);

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});

    // The area is accumulated in counts and divided once, so tied groups stay exact.
    double area = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        const std::size_t prev_tp = tp;
        const std::size_t prev_fp = fp;
        while (i < order.size() && scores[order[i]] == threshold) {
            if (labels_true[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        area += static_cast<double>(fp - prev_fp) * static_cast<double>(tp + prev_tp) / 2.0;
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                                static_cast<double>(tp) / static_cast<double>(pos), threshold});
    }
    curve.auc = area / (static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

double auc_rank_oracle(std::span<const double> scores, std::span<const int> labels_true) {
    check_scores(scores, labels_true);
    const auto [pos, neg] = class_counts(labels_true);

    double wins = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels_true[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels_true[j] != 0) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

void write_report_csv_header(std::ostream& out) { out << kReportCsvHeader << '\n'; }

void write_report_csv_rows(const ClassReport& report, const std::string& dataset,
                           const std::string& approach, std::ostream& out) {
    auto row = [&](const char* cls, const ClassMetrics& m) {
        out << dataset << ',' << approach << ',' << cls << ',' << fixed4(m.precision) << ','
            << fixed4(m.recall) << ',' << fixed4(m.f1) << ',' << m.support << '\n';
    };
    row("real", report.real);
    row("generated", report.generated);
}

void write_roc_csv(const RocCurve& curve, std::ostream& out) {
    out << kRocCsvHeader << '\n';
    for (const auto& p : curve.points) {
        out << num(p.fpr) << ',' << num(p.tpr) << ',' << num(p.threshold) << '\n';
    }
}

void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out) {
    out << ",actual_generated,actual_real\n";
    out << "predicted_generated," << cm.tp << ',' << cm.fp << '\n';
    out << "predicted_real," << cm.fn << ',' << cm.tn << '\n';
}

}  // namespace kanmlp
