#include "nnwd/report_json.hpp"

#include <cmath>
#include <cstdio>

namespace nnwd {

using nlohmann::json;

std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const RocCurve& curve) {
    json points = json::array();
    for (const auto& p : curve.points) {
        points.push_back({{"threshold", std::isinf(p.threshold) ? json("inf") : json(p.threshold)},
                          {"fpr", p.fpr},
                          {"tpr", p.tpr}});
    }
    return {{"auc", curve.auc}, {"positives", curve.positives}, {"negatives", curve.negatives}, {"points", points}};
}

json to_json(const AccuracyReport& r) {
    return {{"total", r.total},
            {"in_total", r.in_total},
            {"out_total", r.out_total},
            {"in_accepted", r.in_accepted},
            {"out_accepted", r.out_accepted},
            {"in_correct", r.in_correct},
            {"end_to_end_correct", r.end_to_end_correct},
            {"gating_tpr", r.gating_tpr},
            {"gating_fpr", r.gating_fpr},
            {"gating_precision", r.gating_precision},
            {"end_to_end_accuracy", r.end_to_end},
            {"in_accuracy", r.in_accuracy}};
}

json to_json(const GuardCounters& c) {
    return {{"inputs", c.inputs}, {"tier1", c.tier1}, {"tier2", c.tier2}, {"core", c.core}};
}

json to_json(const GateCounts& g) {
    return {{"in_pass", g.in_pass}, {"in_reject", g.in_reject}, {"out_pass", g.out_pass}, {"out_reject", g.out_reject}};
}

json to_json(const RunReport& r) {
    return {{"label", r.label},
            {"tiers", {{"tier1", r.tier1}, {"tier2", r.tier2}}},
            {"tau", r.tau},
            {"tier2_threshold", r.tier2_threshold},
            {"dataset_hash", hex64(r.dataset_hash)},
            {"source_hash", hex64(r.source_hash)},
            {"samples", r.samples},
            {"tier1_counts", to_json(r.tier1_counts)},
            {"tier2_counts", to_json(r.tier2_counts)},
            {"classified", r.classified},
            {"counters", to_json(r.counters)},
            {"accuracy", to_json(r.accuracy)},
            {"roc", to_json(r.roc)}};
}

json to_json(const EvaluationReport& r) {
    return {{"unguarded", to_json(r.unguarded)}, {"guarded", to_json(r.guarded)}, {"baseline", to_json(r.baseline)}};
}

json to_json(const Comparison& c) {
    return {{"dataset_hash", hex64(c.dataset_hash)},
            {"auc", {{"unguarded", c.unguarded_auc}, {"guarded", c.guarded_auc}, {"baseline", c.baseline_auc}}},
            {"end_to_end_accuracy",
             {{"unguarded", c.unguarded_end_to_end}, {"guarded", c.guarded_end_to_end}, {"baseline", c.baseline_end_to_end}}},
            {"deltas",
             {{"auc_guarded_minus_unguarded", c.guarded_minus_unguarded_auc},
              {"auc_baseline_minus_guarded", c.baseline_minus_guarded_auc},
              {"end_to_end_guarded_minus_unguarded", c.guarded_minus_unguarded_end_to_end}}}};
}

json to_json(const CalibrationReport& r) {
    json per_class = json::object();
    for (const auto& [c, m] : r.per_class_mean) per_class[std::to_string(c)] = m;
    json sweep = json::array();
    for (std::size_t i = 0; i < r.grid.size(); ++i) sweep.push_back({{"tau", r.grid[i]}, {"youden", r.youden[i]}});
    return {{"roc", to_json(r.roc)},
            {"interval", {{"low", r.interval_low}, {"high", r.interval_high}}},
            {"chosen_tau", r.chosen_tau},
            {"overridden", r.overridden},
            {"in_mean", r.in_mean},
            {"ood_mean", r.ood_mean},
            {"per_class_mean", per_class},
            {"sweep", sweep}};
}

json to_json(const History& history) {
    json rows = json::array();
    for (const auto& e : history) {
        rows.push_back({{"epoch", e.epoch},
                        {"train_loss", finite_or_null(e.train_loss)},
                        {"val_loss", finite_or_null(e.val_loss)},
                        {"train_acc", finite_or_null(e.train_acc)},
                        {"val_acc", finite_or_null(e.val_acc)}});
    }
    return rows;
}

json to_json(const Verdict& v) {
    json j = {{"verdict", to_string(v.outcome)},
              {"tier1_score", v.tier1_score ? json(*v.tier1_score) : json(nullptr)},
              {"tier2_p_in", v.tier2_p_in ? json(*v.tier2_p_in) : json(nullptr)}};
    if (v.outcome == Outcome::classified) {
        j["class"] = *v.predicted;
        j["probabilities"] = v.probabilities;
    }
    return j;
}

json generation_summary(const GeneratedBatch& batch, const GeneratorConfig& config) {
    double mean = 0.0, iterations = 0.0;
    json samples = json::array();
    for (const auto& s : batch.samples) {
        mean += s.score;
        iterations += static_cast<double>(s.iterations);
        samples.push_back({{"score", s.score}, {"iterations", s.iterations}, {"seed", s.provenance}});
    }
    const double n = batch.samples.empty() ? 1.0 : static_cast<double>(batch.samples.size());
    return {{"target", config.target},
            {"tolerance", config.tolerance},
            {"seed_mode", to_string(config.seed_mode)},
            {"seed", config.seed},
            {"requested", batch.samples.size()},
            {"attempts", batch.attempts},
            {"failures", batch.failures},
            {"mean_score", mean / n},
            {"mean_iterations", iterations / n},
            {"samples", samples}};
}

}  // namespace nnwd
