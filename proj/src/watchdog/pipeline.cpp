#include "nnwd/pipeline.hpp"

#include <algorithm>
#include <stdexcept>

namespace nnwd {

std::string to_string(Outcome outcome) {
    switch (outcome) {
        case Outcome::rejected_tier1: return "REJECTED_TIER1";
        case Outcome::rejected_tier2: return "REJECTED_TIER2";
        case Outcome::classified: return "CLASSIFIED";
    }
    return "?";
}

void PipelineConfig::validate() const {
    if (!core) throw std::invalid_argument("pipeline has no core classifier");
    if (tier1 && !autoencoder) throw std::invalid_argument("tier 1 is enabled but no autoencoder is configured");
    if (tier2 && !binary) throw std::invalid_argument("tier 2 is enabled but no binary classifier is configured");
    if (!(tier2_threshold >= 0.0 && tier2_threshold <= 1.0)) throw std::invalid_argument("tier-2 threshold must lie in [0, 1]");
    ssim.validate();
}

PipelineConfig PipelineConfig::with_tiers(bool tier1_on, bool tier2_on) const {
    PipelineConfig c = *this;
    c.tier1 = tier1_on;
    c.tier2 = tier2_on;
    return c;
}

namespace {

void classify_into(Verdict& v, std::span<const double> p) {
    v.outcome = Outcome::classified;
    v.probabilities.assign(p.begin(), p.end());
    v.predicted = static_cast<int>(argmax(p));
}

void check_dims(const Model& m, const Image& image, const char* which) {
    const auto in = m.spec.input_size();
    if (in && *in != image.size()) {
        throw ShapeError(std::string(which) + " expects " + std::to_string(*in) + " values, image has " +
                         std::to_string(image.size()));
    }
}

void check_all_dims(const PipelineConfig& p, const Image& image) {
    if (p.tier1) check_dims(*p.autoencoder, image, "autoencoder");
    if (p.tier2) check_dims(*p.binary, image, "binary classifier");
    check_dims(*p.core, image, "core classifier");
}

}  // namespace

Verdict guard(const PipelineConfig& pipeline, const Image& image, GuardCounters* counters) {
    pipeline.validate();
    check_all_dims(pipeline, image);
    GuardCounters local;
    GuardCounters& c = counters ? *counters : local;
    ++c.inputs;
    Verdict v;
    if (pipeline.tier1) {
        ++c.tier1;
        v.tier1_score = tier1_score(*pipeline.autoencoder, image, pipeline.ssim);
        if (tier1_gate(*v.tier1_score, pipeline.tau) == GateDecision::reject) {
            v.outcome = Outcome::rejected_tier1;
            return v;
        }
    }
    if (pipeline.tier2) {
        ++c.tier2;
        v.tier2_p_in = binary_score(*pipeline.binary, image);
        if (!(*v.tier2_p_in >= pipeline.tier2_threshold)) {
            v.outcome = Outcome::rejected_tier2;
            return v;
        }
    }
    ++c.core;
    classify_into(v, classify(*pipeline.core, image));
    return v;
}

std::vector<Verdict> guard_all(const PipelineConfig& pipeline, const Dataset& dataset, GuardCounters* counters) {
    pipeline.validate();
    std::vector<Verdict> out(dataset.size());
    if (dataset.empty()) return out;
    for (const auto& s : dataset.samples) check_all_dims(pipeline, s.image);
    GuardCounters local;
    GuardCounters& c = counters ? *counters : local;
    c.inputs += dataset.size();

    std::vector<std::size_t> alive(dataset.size());
    for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
    auto images_of = [&](const std::vector<std::size_t>& idx) {
        std::vector<const Image*> imgs;
        imgs.reserve(idx.size());
        for (auto i : idx) imgs.push_back(&dataset.samples[i].image);
        return imgs;
    };

    if (pipeline.tier1 && !alive.empty()) {
        c.tier1 += alive.size();
        const auto imgs = images_of(alive);
        const auto recon = reconstruct_all(*pipeline.autoencoder, imgs);
        std::vector<std::size_t> next;
        for (std::size_t j = 0; j < alive.size(); ++j) {
            Verdict& v = out[alive[j]];
            v.tier1_score = ssim(*imgs[j], recon[j], pipeline.ssim);
            if (tier1_gate(*v.tier1_score, pipeline.tau) == GateDecision::reject) {
                v.outcome = Outcome::rejected_tier1;
            } else {
                next.push_back(alive[j]);
            }
        }
        alive = std::move(next);
    }
    if (pipeline.tier2 && !alive.empty()) {
        c.tier2 += alive.size();
        const Model& b = *pipeline.binary;
        const Tensor p = predict_chunked(b.spec, b.params, images_to_batch(images_of(alive)));
        std::vector<std::size_t> next;
        for (std::size_t j = 0; j < alive.size(); ++j) {
            Verdict& v = out[alive[j]];
            v.tier2_p_in = p[j];
            if (!(p[j] >= pipeline.tier2_threshold)) {
                v.outcome = Outcome::rejected_tier2;
            } else {
                next.push_back(alive[j]);
            }
        }
        alive = std::move(next);
    }
    if (!alive.empty()) {
        c.core += alive.size();
        const Model& m = *pipeline.core;
        const Tensor p = predict_chunked(m.spec, m.params, images_to_batch(images_of(alive)));
        for (std::size_t j = 0; j < alive.size(); ++j) classify_into(out[alive[j]], p.row(j));
    }
    return out;
}

RunReport evaluate_run(const PipelineConfig& pipeline, const Dataset& dataset, const std::string& label,
                       std::uint64_t source_hash, std::vector<Verdict>* verdicts_out) {
    if (dataset.empty()) throw std::invalid_argument("evaluation dataset '" + dataset.manifest.name + "' is empty");
    RunReport r;
    r.label = label;
    r.tier1 = pipeline.tier1;
    r.tier2 = pipeline.tier2;
    r.tau = pipeline.tau;
    r.tier2_threshold = pipeline.tier2_threshold;
    r.dataset_hash = dataset_hash(dataset);
    r.source_hash = source_hash;
    r.samples = dataset.size();

    const auto verdicts = guard_all(pipeline, dataset, &r.counters);
    const std::size_t k = pipeline.core->spec.output_size().value_or(0);
    Tensor scores({dataset.size(), k});
    std::unique_ptr<bool[]> accepted(new bool[dataset.size()]);
    std::vector<std::optional<int>> truth(dataset.size());
    std::vector<Decision> decisions(dataset.size());
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& s = dataset.samples[i];
        const Verdict& v = verdicts[i];
        const bool in = s.distribution == DistributionLabel::in;
        if (in) truth[i] = s.class_label;
        if (v.tier1_score) {
            GateCounts& g = r.tier1_counts;
            const bool pass = v.outcome != Outcome::rejected_tier1;
            (in ? (pass ? g.in_pass : g.in_reject) : (pass ? g.out_pass : g.out_reject))++;
        }
        if (v.tier2_p_in) {
            GateCounts& g = r.tier2_counts;
            const bool pass = v.outcome == Outcome::classified;
            (in ? (pass ? g.in_pass : g.in_reject) : (pass ? g.out_pass : g.out_reject))++;
        }
        accepted[i] = v.outcome == Outcome::classified;
        if (accepted[i]) {
            ++r.classified;
            std::copy(v.probabilities.begin(), v.probabilities.end(), scores.row(i).begin());
        }
        decisions[i] = {accepted[i], v.predicted};
    }
    r.accuracy = accuracy_report(decisions, dual_labels(dataset));
    r.roc = normalized_multiclass_roc(scores, truth, std::span<const bool>(accepted.get(), dataset.size()));
    if (verdicts_out) *verdicts_out = verdicts;
    return r;
}

EvaluationReport evaluate(const PipelineConfig& pipeline, const Dataset& mixed, std::vector<Verdict>* guarded_verdicts) {
    pipeline.validate();
    if (mixed.empty()) throw std::invalid_argument("evaluation dataset is empty");
    const std::uint64_t source = dataset_hash(mixed);
    const Dataset in_only = mixed.filter(DistributionLabel::in, mixed.manifest.name + "-in");
    if (in_only.empty()) throw std::invalid_argument("evaluation dataset has no IN samples for the baseline");
    EvaluationReport report;
    report.unguarded = evaluate_run(pipeline.with_tiers(false, false), mixed, "unguarded", source);
    report.guarded = evaluate_run(pipeline, mixed, "guarded", source, guarded_verdicts);
    report.baseline = evaluate_run(pipeline.with_tiers(false, false), in_only, "baseline", source);
    return report;
}

Comparison compare_report(const RunReport& unguarded, const RunReport& guarded, const RunReport& baseline) {
    if (unguarded.dataset_hash != guarded.dataset_hash) {
        throw ReportMismatchError("unguarded and guarded reports were computed on different datasets");
    }
    if (baseline.source_hash != guarded.dataset_hash) {
        throw ReportMismatchError("baseline report was not derived from the evaluation dataset");
    }
    Comparison c;
    c.dataset_hash = guarded.dataset_hash;
    c.unguarded_auc = unguarded.roc.auc;
    c.guarded_auc = guarded.roc.auc;
    c.baseline_auc = baseline.roc.auc;
    c.guarded_minus_unguarded_auc = guarded.roc.auc - unguarded.roc.auc;
    c.baseline_minus_guarded_auc = baseline.roc.auc - guarded.roc.auc;
    c.unguarded_end_to_end = unguarded.accuracy.end_to_end;
    c.guarded_end_to_end = guarded.accuracy.end_to_end;
    c.baseline_end_to_end = baseline.accuracy.end_to_end;
    c.guarded_minus_unguarded_end_to_end = guarded.accuracy.end_to_end - unguarded.accuracy.end_to_end;
    return c;
}

void write_comparison_csv(std::ostream& out, const RunReport& unguarded, const RunReport& guarded,
                          const RunReport& baseline) {
    compare_report(unguarded, guarded, baseline);
    const auto old_precision = out.precision(17);
    out << "curve,threshold,fpr,tpr\n";
    for (const RunReport* r : {&unguarded, &guarded, &baseline}) {
        for (const auto& p : r->roc.points) out << r->label << ',' << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
    }
    out.precision(old_precision);
}

std::optional<Image> rejection_gallery(const Dataset& dataset, const std::vector<Verdict>& verdicts, Outcome outcome,
                                       std::size_t limit, std::size_t columns) {
    if (verdicts.size() != dataset.size()) throw std::invalid_argument("verdict count does not match the dataset");
    std::vector<Image> tiles;
    for (std::size_t i = 0; i < dataset.size() && tiles.size() < limit; ++i) {
        if (verdicts[i].outcome == outcome) tiles.push_back(to_grayscale(dataset.samples[i].image));
    }
    if (tiles.empty()) return std::nullopt;
    return contact_sheet(tiles, std::min(columns, tiles.size()));
}

}  // namespace nnwd
