#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nnwd/autoencoder.hpp"
#include "nnwd/classifiers.hpp"
#include "nnwd/roc.hpp"

namespace nnwd {

/// Tier order is fixed: SSIM gate, then binary classifier, then core.
struct PipelineConfig {
    double tau = 0.85;
    double tier2_threshold = 0.5;
    bool tier1 = true;
    bool tier2 = true;
    std::shared_ptr<const Model> autoencoder;
    std::shared_ptr<const Model> binary;
    std::shared_ptr<const Model> core;
    SsimParams ssim;

    /// Throws std::invalid_argument without a core model, or when an enabled
    /// tier has no model.
    void validate() const;
    PipelineConfig with_tiers(bool tier1_on, bool tier2_on) const;
};

enum class Outcome { rejected_tier1, rejected_tier2, classified };

std::string to_string(Outcome outcome);

/// A score is present iff its tier ran. REJECTED_TIER1 implies
/// tier1_score < tau; CLASSIFIED implies every enabled gate passed.
struct Verdict {
    Outcome outcome = Outcome::classified;
    std::optional<double> tier1_score;
    std::optional<double> tier2_p_in;
    std::optional<int> predicted;
    std::vector<double> probabilities;  // empty unless classified
};

/// How many inputs each stage actually evaluated.
struct GuardCounters {
    std::size_t inputs = 0;
    std::size_t tier1 = 0;
    std::size_t tier2 = 0;
    std::size_t core = 0;
    friend bool operator==(const GuardCounters&, const GuardCounters&) = default;
};

Verdict guard(const PipelineConfig& pipeline, const Image& image, GuardCounters* counters = nullptr);

/// Same decisions as per-sample guard, with each stage batched over the
/// inputs that reached it.
std::vector<Verdict> guard_all(const PipelineConfig& pipeline, const Dataset& dataset,
                               GuardCounters* counters = nullptr);

struct GateCounts {
    std::size_t in_pass = 0;
    std::size_t in_reject = 0;
    std::size_t out_pass = 0;
    std::size_t out_reject = 0;
};

/// One configuration evaluated on one dataset.
struct RunReport {
    std::string label;
    bool tier1 = false;
    bool tier2 = false;
    double tau = 0.0;
    double tier2_threshold = 0.0;
    std::uint64_t dataset_hash = 0;  // data actually evaluated
    std::uint64_t source_hash = 0;   // dataset it was derived from (equal unless filtered)
    std::size_t samples = 0;
    GateCounts tier1_counts;  // over inputs that reached tier 1
    GateCounts tier2_counts;  // over inputs that reached tier 2
    std::size_t classified = 0;
    GuardCounters counters;
    AccuracyReport accuracy;
    RocCurve roc;  // normalized multiclass ROC, rejected rows scored zero
};

struct EvaluationReport {
    RunReport unguarded;
    RunReport guarded;
    RunReport baseline;  // core alone on the IN subset
};

RunReport evaluate_run(const PipelineConfig& pipeline, const Dataset& dataset, const std::string& label,
                       std::uint64_t source_hash, std::vector<Verdict>* verdicts = nullptr);

/// Unguarded (both tiers off), guarded (as configured) and IN-only baseline.
EvaluationReport evaluate(const PipelineConfig& pipeline, const Dataset& mixed,
                          std::vector<Verdict>* guarded_verdicts = nullptr);

class ReportMismatchError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Comparison {
    double unguarded_auc = 0.0;
    double guarded_auc = 0.0;
    double baseline_auc = 0.0;
    double guarded_minus_unguarded_auc = 0.0;
    double baseline_minus_guarded_auc = 0.0;
    double unguarded_end_to_end = 0.0;
    double guarded_end_to_end = 0.0;
    double baseline_end_to_end = 0.0;
    double guarded_minus_unguarded_end_to_end = 0.0;
    std::uint64_t dataset_hash = 0;
};

/// Throws ReportMismatchError unless unguarded and guarded share a dataset
/// hash and the baseline was derived from it.
Comparison compare_report(const RunReport& unguarded, const RunReport& guarded, const RunReport& baseline);

/// `curve,threshold,fpr,tpr` with curves labeled unguarded, guarded, baseline.
void write_comparison_csv(std::ostream& out, const RunReport& unguarded, const RunReport& guarded,
                          const RunReport& baseline);

/// Contact sheet of up to `limit` inputs with the given outcome, or nullopt
/// when none matched.
std::optional<Image> rejection_gallery(const Dataset& dataset, const std::vector<Verdict>& verdicts, Outcome outcome,
                                       std::size_t limit = 64, std::size_t columns = 8);

}  // namespace nnwd
