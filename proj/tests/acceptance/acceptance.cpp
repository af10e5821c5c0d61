// End-to-end acceptance run: prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.
//
// Criteria 4-10 run on a full default-config experiment driven through the
// same stage code as the nnwd executable, executed twice into separate
// directories.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "manifest.hpp"
#include "nnwd/generator.hpp"
#include "nnwd/pipeline.hpp"
#include "stages.hpp"
#include "support/random_net.hpp"
#include "support/reference.hpp"
#include "support/temp_dir.hpp"

using namespace nnwd;
namespace fs = std::filesystem;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

std::string bytes_of(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double auc_of(const std::vector<double>& scores, const std::vector<bool>& positive) {
    std::unique_ptr<bool[]> flags(new bool[positive.size()]);
    for (std::size_t i = 0; i < positive.size(); ++i) flags[i] = positive[i];
    return roc(scores, std::span<const bool>(flags.get(), positive.size())).auc;
}

Image random_image(Rng& rng, std::size_t h, std::size_t w) {
    Image img(h, w);
    for (double& v : img.pixels) v = rng.uniform();
    return img;
}

// 1. SSIM against a direct per-window formula.
Result ssim_correctness() {
    Rng rng(1001);
    double worst_oracle = 0.0, worst_symmetry = 0.0;
    bool self_exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t h = 8 + rng.below(25), w = 8 + rng.below(25);
        const Image x = random_image(rng, h, w);
        Image y = x;
        const double noise = rng.uniform(0.0, 0.5);
        for (double& v : y.pixels) v = std::clamp(v + noise * (rng.uniform() - 0.5), 0.0, 1.0);
        SsimParams p;
        p.window = std::array<std::size_t, 3>{3, 5, 7}[rng.below(3)];
        const double s = ssim(x, y, p);
        worst_oracle = std::max(worst_oracle, std::abs(s - double(ref::ssim_brute_force(x.pixels, y.pixels, h, w, p.window))));
        worst_symmetry = std::max(worst_symmetry, std::abs(s - ssim(y, x, p)));
        self_exact = self_exact && ssim(x, x, p) == 1.0 && ssim(y, y, p) == 1.0;
    }
    return {self_exact && worst_symmetry <= 1e-12 && worst_oracle < 1e-9,
            fmt("self=1 exact: %s, max asymmetry %.2e, max oracle gap %.2e over 100 pairs", self_exact ? "yes" : "no",
                worst_symmetry, worst_oracle)};
}

// 2. Reverse-mode gradients against extended-precision central differences.
Result gradient_fidelity() {
    double worst_net = 0.0;
    for (std::uint64_t seed = 5000; seed < 5120; ++seed) {
        const auto inst = testnet::random_instance(seed);
        const auto audit = ref::audit_gradients(inst.spec, inst.params, inst.batch, inst.target, inst.loss);
        worst_net = std::max({worst_net, audit.params, audit.input});
    }
    // Input gradient through autoencoder and SSIM, as used by the generator.
    const NetworkSpec spec = NetworkSpec::mlp({64, 24, 8, 24, 64}, ActivationKind::tanh, ActivationLayer{ActivationKind::sigmoid});
    Rng rng(2002);
    double worst_ae = 0.0;
    for (int trial = 0; trial < 12; ++trial) {
        const Model ae{spec, init_params(spec, 300 + trial)};
        Image x(8, 8);
        for (auto& v : x.pixels) v = rng.uniform(0.1, 0.9);
        SsimParams p;
        if (trial % 2) p.aggregation = SsimAggregation::global;
        const double target = 0.9;
        const auto og = boundary_objective(ae, x, target, p);
        auto f = [&](const ref::Vec& xs) {
            const ref::Vec y = ref::forward_sample(spec, ae.params, xs);
            const ref::Real s = p.aggregation == SsimAggregation::global ? ref::window_ssim(xs, y, 1e-4L, 9e-4L)
                                                                         : ref::ssim_brute_force(xs, y, 8, 8, p.window);
            return (s - target) * (s - target);
        };
        const ref::Vec xs = ref::widen(x.pixels);
        const ref::Real h = 1e-6L;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            ref::Vec a = xs, b = xs;
            a[k] += h;
            b[k] -= h;
            worst_ae = std::max(worst_ae, double(ref::relative_error(og.grad[k], (f(a) - f(b)) / (2 * h))));
        }
    }
    return {worst_net < 1e-6 && worst_ae < 1e-5,
            fmt("120 random nets max rel err %.2e (< 1e-6); AE+SSIM input path max rel err %.2e (< 1e-5)", worst_net, worst_ae)};
}

// 3. ROC against brute-force enumeration and Mann-Whitney.
Result roc_oracle() {
    Rng rng(3003);
    std::size_t mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(200);
        const double grain = std::array<double, 3>{0.0, 0.1, 0.01}[rng.below(3)];
        std::vector<double> scores(n);
        std::vector<bool> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = rng.uniform();
            scores[i] = grain > 0 ? std::round(s / grain) * grain : s;
            pos[i] = rng.bernoulli(0.4);
        }
        pos[0] = true;
        pos[1] = false;
        std::unique_ptr<bool[]> flags(new bool[n]);
        for (std::size_t i = 0; i < n; ++i) flags[i] = pos[i];
        const RocCurve curve = roc(scores, std::span<const bool>(flags.get(), n));
        const auto brute = ref::roc_brute_force(scores, pos);
        bool same = curve.points.size() == brute.size() && curve.auc == ref::mann_whitney_auc(scores, pos);
        for (std::size_t k = 0; same && k < brute.size(); ++k) {
            same = curve.points[k].threshold == brute[k].threshold && curve.points[k].fpr == brute[k].fpr &&
                   curve.points[k].tpr == brute[k].tpr;
        }
        mismatches += !same;
    }
    return {mismatches == 0, fmt("%zu of 100 random instances differ from the oracles", mismatches)};
}

struct Run {
    fs::path dir;
    cli::StageContext ctx;
    std::map<std::string, double> seconds;
};

Run run_experiment(const fs::path& dir) {
    cli::ExperimentConfig config = cli::load_config(fs::path(NNWD_SOURCE_DIR) / "configs/default.ini");
    Run r{dir, {config, dir, true}, {}};
    for (const auto& stage : cli::stage_names()) {
        const auto t0 = std::chrono::steady_clock::now();
        cli::run_stage(stage, r.ctx);
        r.seconds[stage] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return r;
}

struct Loaded {
    std::shared_ptr<const Model> ae, binary, core;
    Dataset train_in, eval_in, mixed, calib_in, calib_ood;
};

Loaded load(const fs::path& dir) {
    Loaded l;
    l.ae = std::make_shared<const Model>(load_params(dir / "models/autoencoder.nnwd"));
    l.binary = std::make_shared<const Model>(load_params(dir / "models/binary.nnwd"));
    l.core = std::make_shared<const Model>(load_params(dir / "models/core.nnwd"));
    l.train_in = load_dataset(dir / "data/train-in");
    l.eval_in = load_dataset(dir / "data/eval-in");
    l.mixed = load_dataset(dir / "data/eval-mixed");
    l.calib_in = load_dataset(dir / "data/calib-in");
    l.calib_ood = load_dataset(dir / "data/calib-ood");
    return l;
}

// 4. Tier-1 separation on held-out data and a non-empty calibrated band.
Result tier1_separation(const Run& run, const Loaded& l) {
    const SsimParams& p = run.ctx.config.ssim;
    const auto scores = tier1_scores(*l.ae, l.mixed, p);
    std::vector<bool> in;
    for (const auto& s : l.mixed.samples) in.push_back(s.distribution == DistributionLabel::in);
    const double auc = auc_of(scores, in);
    const CalibrationReport cal = calibrate(*l.ae, l.calib_in, l.calib_ood, run.ctx.config.calibration, p);
    const double seconds = run.seconds.at("train-ae");
    const bool band = cal.interval_low <= cal.interval_high && cal.interval_low <= cal.chosen_tau && cal.chosen_tau <= cal.interval_high;
    return {auc >= 0.90 && band && seconds <= 300.0,
            fmt("held-out AUC %.4f (>= 0.90); band [%.3f, %.3f], chosen %.3f; training %.1f s (<= 300)", auc, cal.interval_low,
                cal.interval_high, cal.chosen_tau, seconds)};
}

// 5. Boundary generation success rate and gate pass-through.
Result boundary_generation(const Run& run, const Loaded& l) {
    GeneratorConfig cfg = run.ctx.config.generator;
    cfg.seed = run.ctx.config.effective_seed(cfg.seed);
    const auto pool = l.train_in.images();
    std::size_t ok = 0, gate_pass = 0;
    for (std::size_t j = 0; j < 200; ++j) {
        Rng rng(derive_seed(cfg.seed, j));
        try {
            const GeneratedSample s = generate_boundary(*l.ae, pool, cfg, rng);
            ++ok;
            const double fresh = tier1_score(*l.ae, s.image, cfg.ssim);
            gate_pass += std::abs(fresh - cfg.target) <= cfg.tolerance && tier1_gate(fresh, 0.85) == GateDecision::pass;
        } catch (const GenerationError&) {
        }
    }
    return {ok >= 160 && gate_pass == ok,
            fmt("%zu of 200 attempts within %.2f +- %.2f (>= 160); %zu of %zu pass tau 0.85", ok, cfg.target, cfg.tolerance, gate_pass, ok)};
}

// 6. Binary tier on held-out IN images and freshly generated boundary samples.
Result tier2_discrimination(const Run& run, const Loaded& l) {
    GeneratorConfig cfg = run.ctx.config.generator;
    cfg.seed = derive_seed(run.ctx.config.effective_seed(cfg.seed), 0xacce);
    const GeneratedBatch fresh = batch_generate(*l.ae, l.eval_in, cfg, 200, "held-out-generated");
    const Dataset in = l.eval_in.slice(0, 500, "held-out-in");
    std::vector<double> scores = binary_scores(*l.binary, in);
    const std::vector<double> gen = binary_scores(*l.binary, fresh.dataset);
    std::vector<bool> positive(scores.size(), true);
    scores.insert(scores.end(), gen.begin(), gen.end());
    positive.resize(scores.size(), false);
    const double threshold = run.ctx.config.binary.threshold;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) correct += (scores[i] >= threshold) == positive[i];
    const double acc = double(correct) / double(scores.size());
    const double auc = auc_of(scores, positive);
    return {acc >= 0.90 && auc >= 0.95, fmt("held-out accuracy %.4f (>= 0.90), AUC %.4f (>= 0.95) on 500 IN + 200 generated", acc, auc)};
}

PipelineConfig pipeline_of(const Run& run, const Loaded& l) {
    PipelineConfig p;
    p.tau = *run.ctx.config.pipeline.tau;
    p.tier2_threshold = run.ctx.config.pipeline.tier2_threshold;
    p.autoencoder = l.ae;
    p.binary = l.binary;
    p.core = l.core;
    p.ssim = run.ctx.config.ssim;
    return p;
}

// 7. Unguarded end-to-end accuracy collapses to the IN fraction.
Result unguarded_collapse(const EvaluationReport& r) {
    const double in_fraction = double(r.unguarded.accuracy.in_total) / double(r.unguarded.accuracy.total);
    const double baseline = r.baseline.accuracy.end_to_end;
    const double expected = in_fraction * baseline;
    const double got = r.unguarded.accuracy.end_to_end;
    return {baseline >= 0.90 && std::abs(got - expected) <= 0.05,
            fmt("IN fraction %.4f, core IN accuracy %.4f (>= 0.90), unguarded %.4f vs expected %.4f (+- 0.05)", in_fraction,
                baseline, got, expected)};
}

// 8. Guarded beats unguarded in accuracy and normalized AUC.
Result guarded_improvement(const EvaluationReport& r) {
    const Comparison c = compare_report(r.unguarded, r.guarded, r.baseline);
    const bool accuracy = c.guarded_end_to_end > c.unguarded_end_to_end;
    const bool auc = c.guarded_minus_unguarded_auc >= 0.10;
    const bool ideal = c.baseline_auc >= c.guarded_auc;
    return {accuracy && auc && ideal,
            fmt("end-to-end %.4f -> %.4f (%s); normalized AUC unguarded %.4f, guarded %.4f, delta %.4f (>= 0.10: %s); baseline "
                "%.4f >= guarded: %s",
                c.unguarded_end_to_end, c.guarded_end_to_end, accuracy ? "higher" : "NOT higher", c.unguarded_auc, c.guarded_auc,
                c.guarded_minus_unguarded_auc, auc ? "yes" : "no", c.baseline_auc, ideal ? "yes" : "no")};
}

// 9. Reruns are bitwise identical; persistence is lossless.
Result determinism(const Run& a, const Run& b) {
    const auto ma = cli::RunManifest::load(a.dir), mb = cli::RunManifest::load(b.dir);
    std::size_t differing = 0, models = 0;
    for (const auto& [path, entry] : ma.artifacts) {
        const auto other = mb.artifacts.find(path);
        const bool same = other != mb.artifacts.end() && other->second.sha256 == entry.sha256;
        differing += !same;
        models += path.rfind("models/", 0) == 0 && same;
    }
    differing += ma.artifacts.size() != mb.artifacts.size();

    TempDir scratch;
    std::size_t lossy = 0;
    for (const char* m : {"models/autoencoder.nnwd", "models/binary.nnwd", "models/core.nnwd"}) {
        const Model loaded = load_params(a.dir / m);
        save_params(loaded.spec, loaded.params, scratch.path() / "m.nnwd");
        lossy += bytes_of(scratch.path() / "m.nnwd") != bytes_of(a.dir / m);
    }
    const Dataset mixed = load_dataset(a.dir / "data/eval-mixed");
    save_dataset(mixed, scratch.path() / "mixed");
    for (const auto& e : fs::directory_iterator(a.dir / "data/eval-mixed")) {
        lossy += bytes_of(e.path()) != bytes_of(scratch.path() / "mixed" / e.path().filename());
    }
    lossy += dataset_hash(load_dataset(scratch.path() / "mixed")) != dataset_hash(mixed);
    return {differing == 0 && models == 3 && lossy == 0,
            fmt("%zu artifacts compared, %zu differ, %zu of 3 models identical; %zu lossy round trips", ma.artifacts.size(), differing,
                models, lossy)};
}

// 10. Short-circuiting and the tiers-disabled identity.
Result pipeline_logic(const PipelineConfig& pipeline, const Loaded& l) {
    GuardCounters counters;
    const auto verdicts = guard_all(pipeline, l.mixed, &counters);
    std::size_t pass1 = 0, pass2 = 0, leaks = 0;
    for (const auto& v : verdicts) {
        if (v.outcome == Outcome::rejected_tier1) {
            leaks += v.tier2_p_in.has_value() || v.predicted.has_value() || !v.probabilities.empty();
        } else {
            ++pass1;
            if (v.outcome == Outcome::rejected_tier2) {
                leaks += v.predicted.has_value() || !v.probabilities.empty();
            } else {
                ++pass2;
            }
        }
    }
    const bool counted = counters.inputs == l.mixed.size() && counters.tier1 == l.mixed.size() && counters.tier2 == pass1 &&
                         counters.core == pass2;

    // Per-sample guard agrees with the batched one on a prefix.
    GuardCounters single;
    std::size_t disagree = 0;
    for (std::size_t i = 0; i < 300; ++i) {
        const Verdict v = guard(pipeline, l.mixed.samples[i].image, &single);
        disagree += v.outcome != verdicts[i].outcome || v.predicted != verdicts[i].predicted;
    }

    const PipelineConfig bare = pipeline.with_tiers(false, false);
    GuardCounters bare_counters;
    const auto plain = guard_all(bare, l.mixed, &bare_counters);
    const Tensor probs = classify_all(*l.core, l.mixed);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < plain.size(); ++i) {
        const auto row = probs.row(i);
        differ += plain[i].outcome != Outcome::classified || !std::equal(row.begin(), row.end(), plain[i].probabilities.begin(),
                                                                         plain[i].probabilities.end());
    }
    const bool bare_counted = bare_counters.tier1 == 0 && bare_counters.tier2 == 0 && bare_counters.core == l.mixed.size();
    return {counted && leaks == 0 && disagree == 0 && differ == 0 && bare_counted,
            fmt("counters in/t1/t2/core %zu/%zu/%zu/%zu match passes %zu/%zu: %s; %zu leaks; %zu single/batched disagreements; "
                "tiers-off differs from bare classification on %zu of %zu",
                counters.inputs, counters.tier1, counters.tier2, counters.core, pass1, pass2, counted ? "yes" : "no", leaks,
                disagree, differ, plain.size())};
}

}  // namespace

int main() {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::pair<std::string, std::function<Result()>>> criteria;
    criteria.emplace_back("ssim correctness", ssim_correctness);
    criteria.emplace_back("gradient fidelity", gradient_fidelity);
    criteria.emplace_back("roc oracle equivalence", roc_oracle);

    TempDir first_dir, second_dir;
    std::optional<Run> first, second;
    std::optional<Loaded> loaded;
    std::optional<EvaluationReport> report;
    std::optional<PipelineConfig> pipeline;
    std::string setup_error;
    try {
        first = run_experiment(first_dir.path());
        second = run_experiment(second_dir.path());
        loaded = load(first->dir);
        pipeline = pipeline_of(*first, *loaded);
        report = evaluate(*pipeline, loaded->mixed);
    } catch (const std::exception& e) {
        setup_error = e.what();
    }
    auto needs = [&](std::function<Result()> body) {
        return [body, &setup_error]() -> Result {
            if (!setup_error.empty()) return {false, "experiment run failed: " + setup_error};
            return body();
        };
    };
    criteria.emplace_back("tier-1 separation", needs([&] { return tier1_separation(*first, *loaded); }));
    criteria.emplace_back("boundary generation", needs([&] { return boundary_generation(*first, *loaded); }));
    criteria.emplace_back("tier-2 discrimination", needs([&] { return tier2_discrimination(*first, *loaded); }));
    criteria.emplace_back("unguarded collapse", needs([&] { return unguarded_collapse(*report); }));
    criteria.emplace_back("guarded improvement", needs([&] { return guarded_improvement(*report); }));
    criteria.emplace_back("determinism and persistence", needs([&] { return determinism(*first, *second); }));
    criteria.emplace_back("pipeline logic", needs([&] { return pipeline_logic(*pipeline, *loaded); }));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Result o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << "criterion " << (i + 1) << " " << criteria[i].first << ": " << (o.pass ? "PASS" : "FAIL") << " | " << o.detail
                  << std::endl;
    }
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
    std::cout << (criteria.size() - failed) << " of " << criteria.size() << " criteria pass (" << fmt("%.1f", minutes) << " min)"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
