#include "nnwd/roc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

namespace nnwd {

RocCurve roc(std::span<const double> scores, std::span<const bool> positive) {
    if (scores.size() != positive.size()) {
        throw RocError("roc: " + std::to_string(scores.size()) + " scores but " + std::to_string(positive.size()) +
                       " labels");
    }
    std::size_t p = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!std::isfinite(scores[i])) throw RocError("roc: score " + std::to_string(i) + " is not finite");
        p += positive[i];
    }
    const std::size_t n = scores.size() - p;
    if (p == 0 || n == 0) throw RocError("roc needs at least one positive and one negative label");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.positives = p;
    curve.negatives = n;
    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    std::uint64_t tp = 0, fp = 0;
    std::uint64_t twice_area = 0;  // sum of dFP * (TP_prev + TP), i.e. 2 * P * N * AUC
    for (std::size_t i = 0; i < order.size();) {
        const double t = scores[order[i]];
        const std::uint64_t tp_prev = tp, fp_prev = fp;
        for (; i < order.size() && scores[order[i]] == t; ++i) (positive[order[i]] ? tp : fp) += 1;
        twice_area += (fp - fp_prev) * (tp_prev + tp);
        curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(n),
                                static_cast<double>(tp) / static_cast<double>(p)});
    }
    curve.auc = static_cast<double>(twice_area) / (2.0 * static_cast<double>(p) * static_cast<double>(n));
    return curve;
}

RocCurve normalized_multiclass_roc(const Tensor& class_scores, std::span<const std::optional<int>> true_class,
                                   std::span<const bool> accepted) {
    if (class_scores.rank() != 2) throw RocError("class scores must be an n x K matrix");
    const std::size_t rows = class_scores.rows();
    const std::size_t k = class_scores.cols();
    if (true_class.size() != rows || accepted.size() != rows) {
        throw RocError("normalized_multiclass_roc: score rows, labels and acceptance flags differ in length");
    }
    std::vector<double> scores(rows * k);
    std::vector<char> pos(rows * k);
    for (std::size_t i = 0; i < rows; ++i) {
        if (true_class[i] && (*true_class[i] < 0 || static_cast<std::size_t>(*true_class[i]) >= k)) {
            throw RocError("normalized_multiclass_roc: class label out of range at row " + std::to_string(i));
        }
        for (std::size_t c = 0; c < k; ++c) {
            scores[i * k + c] = accepted[i] ? class_scores.at(i, c) : 0.0;
            pos[i * k + c] = true_class[i] && static_cast<std::size_t>(*true_class[i]) == c;
        }
    }
    std::unique_ptr<bool[]> flags(new bool[pos.size()]);
    for (std::size_t i = 0; i < pos.size(); ++i) flags[i] = pos[i] != 0;
    return roc(scores, std::span<const bool>(flags.get(), pos.size()));
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
    out << "threshold,fpr,tpr\n";
    const auto old = out.precision(17);
    for (const auto& pt : curve.points) out << pt.threshold << ',' << pt.fpr << ',' << pt.tpr << '\n';
    out.precision(old);
}

std::vector<DualLabel> dual_labels(const Dataset& dataset) {
    std::vector<DualLabel> labels;
    labels.reserve(dataset.size());
    for (const auto& s : dataset.samples) labels.push_back({s.class_label, s.distribution});
    return labels;
}

AccuracyReport accuracy_report(std::span<const Decision> decisions, std::span<const DualLabel> labels) {
    if (decisions.size() != labels.size()) {
        throw std::invalid_argument("accuracy_report: " + std::to_string(decisions.size()) + " decisions but " +
                                    std::to_string(labels.size()) + " labels");
    }
    AccuracyReport r;
    r.total = decisions.size();
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& d = decisions[i];
        if (labels[i].distribution == DistributionLabel::in) {
            ++r.in_total;
            if (d.accepted) {
                ++r.in_accepted;
                if (d.predicted && labels[i].class_label && *d.predicted == *labels[i].class_label) ++r.in_correct;
            }
        } else {
            ++r.out_total;
            if (d.accepted) ++r.out_accepted;
        }
    }
    r.end_to_end_correct = r.in_correct + (r.out_total - r.out_accepted);
    auto rate = [](std::size_t num, std::size_t den) { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; };
    r.gating_tpr = rate(r.in_accepted, r.in_total);
    r.gating_fpr = rate(r.out_accepted, r.out_total);
    r.gating_precision = rate(r.in_accepted, r.in_accepted + r.out_accepted);
    r.end_to_end = rate(r.end_to_end_correct, r.total);
    r.in_accuracy = rate(r.in_correct, r.in_total);
    return r;
}

}  // namespace nnwd
