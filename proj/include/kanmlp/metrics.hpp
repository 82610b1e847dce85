#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace kanmlp {

// Positive class = Generated (label 1).
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const noexcept { return tp + fp + fn + tn; }
    // The same predictions scored with Real as the positive class.
    ConfusionMatrix swapped() const noexcept { return {tn, fn, fp, tp}; }
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> labels_true, std::span<const int> labels_pred);

// Zero denominators yield 0 and set the matching flag instead of producing NaN.
struct PrecisionRecallF1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    bool precision_degenerate = false;
    bool recall_degenerate = false;
    bool f1_degenerate = false;

    bool degenerate() const noexcept {
        return precision_degenerate || recall_degenerate || f1_degenerate;
    }
};

PrecisionRecallF1 precision_recall_f1(const ConfusionMatrix& cm);
// Harmonic mean of already-known precision and recall (0 if both are 0).
double f1_score(double precision, double recall);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct ClassReport {
    ClassMetrics real;
    ClassMetrics generated;
    double accuracy = 0.0;
    ConfusionMatrix matrix;
};

ClassReport per_class_report(std::span<const int> labels_true, std::span<const int> labels_pred);
ClassReport per_class_report(const ConfusionMatrix& cm);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  // predict Generated when score >= threshold; +inf for the origin
};

struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

// One point per distinct score (descending) after the (0, 0) sentinel. Tied
// scores move the curve in a single diagonal step. AUC by the trapezoidal rule.
// Throws MetricError unless both classes are present and scores are finite.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels_true);

// Mann-Whitney pair counting: (correctly ordered pairs + ties / 2) / (P * N).
// O(P * N); an independent check on roc_curve's area.
double auc_rank_oracle(std::span<const double> scores, std::span<const int> labels_true);

// ---- CSV exports -------------------------------------------------------------

inline constexpr const char* kReportCsvHeader = "dataset,approach,class,precision,recall,f1,support";
inline constexpr const char* kRocCsvHeader = "fpr,tpr,threshold";

// Two rows (real, generated) in the layout of a per-approach results table.
void write_report_csv_header(std::ostream& out);
void write_report_csv_rows(const ClassReport& report, const std::string& dataset,
                           const std::string& approach, std::ostream& out);
void write_roc_csv(const RocCurve& curve, std::ostream& out);
// Cells in the (TP FP / FN TN) arrangement, labelled by predicted (rows) and
// actual (columns) class.
void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& out);

}  // namespace kanmlp
