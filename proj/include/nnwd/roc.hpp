#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "nnwd/dataset.hpp"
#include "nnwd/tensor.hpp"

namespace nnwd {

struct RocPoint {
    double threshold;  // predict POS iff score >= threshold; the first point uses +inf
    double fpr;
    double tpr;
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// FPR and TPR are non-decreasing along `points`, which start at (0, 0) and
/// end at (1, 1).
struct RocCurve {
    std::vector<RocPoint> points;
    double auc = 0.0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

class RocError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One point per distinct score plus the +inf sentinel. Tied scores enter
/// together. AUC by the trapezoid rule, accumulated in integer counts so that
/// it equals the Mann-Whitney statistic U / (P N) exactly.
RocCurve roc(std::span<const double> scores, std::span<const bool> positive);

/// Micro-averaged one-vs-rest pooling over an n x K score matrix: pair (i, k)
/// is POS iff true_class[i] == k. Rejected rows score zero in every column;
/// rows without a class (out of distribution) are NEG for every k.
RocCurve normalized_multiclass_roc(const Tensor& class_scores, std::span<const std::optional<int>> true_class,
                                   std::span<const bool> accepted);

/// Writes `threshold,fpr,tpr` rows with a header.
void write_roc_csv(std::ostream& out, const RocCurve& curve);

/// Outcome of the pipeline for one sample as seen by accuracy_report.
struct Decision {
    bool accepted = false;
    std::optional<int> predicted;  // argmax class when accepted
};

struct DualLabel {
    std::optional<int> class_label;
    DistributionLabel distribution = DistributionLabel::in;
};

std::vector<DualLabel> dual_labels(const Dataset& dataset);

/// Gating treats IN as positive: TPR = accepted IN / IN, FPR = accepted OUT / OUT.
/// End-to-end correct = (IN, accepted, argmax == class) or (OUT, rejected).
/// Rates with an empty denominator are reported as 0.
struct AccuracyReport {
    std::size_t total = 0;
    std::size_t in_total = 0;
    std::size_t out_total = 0;
    std::size_t in_accepted = 0;
    std::size_t out_accepted = 0;
    std::size_t in_correct = 0;  // accepted and correctly classified
    std::size_t end_to_end_correct = 0;

    double gating_tpr = 0.0;
    double gating_fpr = 0.0;
    double gating_precision = 0.0;
    double end_to_end = 0.0;
    double in_accuracy = 0.0;  // in_correct / in_total
};

AccuracyReport accuracy_report(std::span<const Decision> decisions, std::span<const DualLabel> labels);

}  // namespace nnwd
