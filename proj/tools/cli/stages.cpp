#include "stages.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include "manifest.hpp"
#include "nnwd/pipeline.hpp"
#include "nnwd/report_json.hpp"

#ifndef NNWD_VERSION
#define NNWD_VERSION "unknown"
#endif

namespace nnwd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Output layout, relative to the output directory.
const fs::path kTrainIn = "data/train-in";
const fs::path kEvalIn = "data/eval-in";
const fs::path kEvalOod = "data/eval-ood";
const fs::path kEvalMixed = "data/eval-mixed";
const fs::path kCalibIn = "data/calib-in";
const fs::path kCalibOod = "data/calib-ood";
const fs::path kGenerated = "data/generated";
const fs::path kAutoencoder = "models/autoencoder.nnwd";
const fs::path kBinary = "models/binary.nnwd";
const fs::path kCore = "models/core.nnwd";
const fs::path kCalibration = "reports/calibration.json";

// Seed slots mixed into each section's effective seed.
enum : std::uint64_t { kSlotTrain = 1, kSlotEval = 2, kSlotCalib = 3, kSlotMix = 4, kSlotEvalOod = 10, kSlotCalibOod = 20 };

constexpr OodKind kOodKinds[] = {OodKind::texture_noise, OodKind::alien_glyphs, OodKind::blended};

class Writer {
public:
    explicit Writer(const StageContext& ctx) : ctx_(ctx) {}

    fs::path path(const fs::path& rel) {
        const fs::path full = ctx_.out / rel;
        fs::create_directories(full.parent_path());
        return full;
    }
    void text(const fs::path& rel, const std::string& body) {
        std::ofstream out(path(rel), std::ios::binary | std::ios::trunc);
        out << body;
        if (!out) throw std::runtime_error("cannot write " + (ctx_.out / rel).string());
        files_.push_back(rel);
    }
    void json_file(const fs::path& rel, const json& j) { text(rel, j.dump(2) + "\n"); }
    void history(const fs::path& rel, const History& h) {
        std::ostringstream csv;
        write_history_csv(csv, h);
        text(rel, csv.str());
    }
    void model(const fs::path& rel, const Model& m) {
        save_params(m.spec, m.params, path(rel));
        files_.push_back(rel);
    }
    void image(const fs::path& rel, const Image& img) {
        write_netpbm(img, path(rel));
        files_.push_back(rel);
    }
    /// Replaces the directory wholesale so no file of an earlier run survives.
    void dataset(const fs::path& rel, const Dataset& d) {
        const fs::path full = ctx_.out / rel;
        fs::remove_all(full);
        fs::create_directories(full);
        save_dataset(d, full);
        std::vector<fs::path> names;
        for (const auto& e : fs::directory_iterator(full)) names.push_back(rel / e.path().filename());
        std::sort(names.begin(), names.end());
        files_.insert(files_.end(), names.begin(), names.end());
    }
    const std::vector<fs::path>& files() const { return files_; }

private:
    const StageContext& ctx_;
    std::vector<fs::path> files_;
};

void require(const StageContext& ctx, const fs::path& rel, const std::string& producer) {
    if (!fs::exists(ctx.out / rel)) throw MissingStageError(producer, rel);
}

Dataset load(const StageContext& ctx, const fs::path& rel, const std::string& producer) {
    require(ctx, rel, producer);
    return load_dataset(ctx.out / rel);
}

Model load_model(const StageContext& ctx, const fs::path& rel, const std::string& producer) {
    require(ctx, rel, producer);
    return load_params(ctx.out / rel);
}

/// Concatenation of the three OOD kinds (counts split as evenly as possible),
/// plus any imported images.
std::vector<Dataset> ood_parts(const ExperimentConfig& c, std::size_t total, std::uint64_t seed, const std::string& prefix) {
    const SyntheticSpec& s = c.dataset.synthetic;
    std::vector<Dataset> parts;
    for (std::size_t k = 0; k < 3; ++k) {
        const std::size_t n = total / 3 + (k < total % 3 ? 1 : 0);
        parts.push_back(synth_ood(kOodKinds[k], derive_seed(seed, k), n, s.height, s.width, s.channels,
                                  prefix + "-" + to_string(kOodKinds[k])));
    }
    return parts;
}

Dataset concatenate(const std::vector<Dataset>& parts, const std::string& name) {
    Dataset out;
    out.manifest = parts.front().manifest;
    out.manifest.name = name;
    out.manifest.sources.clear();
    for (const auto& p : parts) {
        out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
        out.manifest.sources.emplace_back(p.manifest.name, p.size());
        if (p.manifest.provenance != out.manifest.provenance) out.manifest.provenance = Provenance::mixed;
    }
    out.manifest.count = out.samples.size();
    return out;
}

Dataset import_ood(const ExperimentConfig& c) {
    Dataset d = import_directory(*c.dataset.ood_import, DistributionLabel::out, std::nullopt, c.dataset.synthetic.channels == 1);
    const SyntheticSpec& s = c.dataset.synthetic;
    for (std::size_t i = 0; i < d.size(); ++i) {
        const Image& img = d.samples[i].image;
        if (img.height != s.height || img.width != s.width || img.channels != s.channels) {
            throw DatasetError("imported image #" + std::to_string(i) + " (sorted by name) does not match the configured " + std::to_string(s.height) +
                               "x" + std::to_string(s.width) + "x" + std::to_string(s.channels) + " dims");
        }
    }
    d.manifest.name = "imported";
    return d;
}

void synth_data(const StageContext& ctx, Writer& w) {
    const ExperimentConfig& c = ctx.config;
    const std::uint64_t seed = c.effective_seed(c.dataset.seed);
    const SyntheticSpec& spec = c.dataset.synthetic;
    const Dataset train = synth_in_distribution(spec, derive_seed(seed, kSlotTrain), c.dataset.train_in, "train-in");
    const Dataset eval_in = synth_in_distribution(spec, derive_seed(seed, kSlotEval), c.dataset.eval_in, "eval-in");
    const Dataset calib_in = synth_in_distribution(spec, derive_seed(seed, kSlotCalib), c.dataset.calib_in, "calib-in");
    auto eval_parts = ood_parts(c, c.dataset.eval_ood, derive_seed(seed, kSlotEvalOod), "eval-ood");
    if (c.dataset.ood_import) eval_parts.push_back(import_ood(c));
    const auto calib_parts = ood_parts(c, c.dataset.calib_ood, derive_seed(seed, kSlotCalibOod), "calib-ood");
    const Dataset mixed = mix(eval_in, eval_parts, derive_seed(seed, kSlotMix), "eval-mixed");

    w.dataset(kTrainIn, train);
    w.dataset(kEvalIn, eval_in);
    w.dataset(kCalibIn, calib_in);
    w.dataset(kEvalOod, concatenate(eval_parts, "eval-ood"));
    w.dataset(kCalibOod, concatenate(calib_parts, "calib-ood"));
    w.dataset(kEvalMixed, mixed);
    ctx.log("synth-data", std::to_string(train.size()) + " train, " + std::to_string(mixed.size()) + " mixed eval (" +
                              std::to_string(eval_in.size()) + " IN)");
}

void train_ae(const StageContext& ctx, Writer& w) {
    const Dataset train = load(ctx, kTrainIn, "synth-data");
    AutoencoderConfig cfg = ctx.config.autoencoder;
    cfg.train.seed = ctx.config.effective_seed(cfg.train.seed);
    const auto r = train_autoencoder(train, cfg);
    w.model(kAutoencoder, r.model);
    w.history("reports/autoencoder_history.csv", r.history);
    w.json_file("reports/autoencoder.json", {{"initial_val_mse", r.initial_val_loss},
                                             {"final_val_mse", r.history.empty() ? r.initial_val_loss : r.history.back().val_loss},
                                             {"latent", latent_width(cfg.spec)},
                                             {"history", to_json(r.history)}});
    ctx.log("train-ae", "validation mse " + std::to_string(r.initial_val_loss) + " -> " +
                            std::to_string(r.history.empty() ? r.initial_val_loss : r.history.back().val_loss));
}

void calibrate_stage(const StageContext& ctx, Writer& w) {
    const Model ae = load_model(ctx, kAutoencoder, "train-ae");
    const Dataset in = load(ctx, kCalibIn, "synth-data");
    const Dataset ood = load(ctx, kCalibOod, "synth-data");
    const CalibrationReport r = calibrate(ae, in, ood, ctx.config.calibration, ctx.config.ssim);
    w.json_file(kCalibration, to_json(r));
    std::ostringstream csv;
    write_roc_csv(csv, r.roc);
    w.text("reports/calibration_roc.csv", csv.str());
    ctx.log("calibrate", "AUC " + std::to_string(r.roc.auc) + ", interval [" + std::to_string(r.interval_low) + ", " +
                             std::to_string(r.interval_high) + "], chosen tau " + std::to_string(r.chosen_tau));
}

void gen_boundary(const StageContext& ctx, Writer& w) {
    const Model ae = load_model(ctx, kAutoencoder, "train-ae");
    const Dataset pool = load(ctx, kTrainIn, "synth-data");
    GeneratorConfig cfg = ctx.config.generator;
    cfg.seed = ctx.config.effective_seed(cfg.seed);
    const GeneratedBatch batch = batch_generate(ae, pool, cfg, ctx.config.generator_count, "generated");
    w.dataset(kGenerated, batch.dataset);
    w.json_file("reports/generation.json", generation_summary(batch, cfg));
    std::vector<Image> tiles;
    for (std::size_t i = 0; i < std::min<std::size_t>(64, batch.samples.size()); ++i) tiles.push_back(batch.samples[i].image);
    w.image("galleries/generated.pgm", contact_sheet(tiles, 8));
    ctx.log("gen-boundary", std::to_string(batch.samples.size()) + " samples in " + std::to_string(batch.attempts) + " attempts");
}

void train_binary_stage(const StageContext& ctx, Writer& w) {
    load_model(ctx, kAutoencoder, "train-ae");
    const Dataset generated = load(ctx, kGenerated, "gen-boundary");
    const Dataset train = load(ctx, kTrainIn, "synth-data");
    const Dataset in = train.slice(0, std::min(ctx.config.binary_in, train.size()), "binary-in");
    BinaryClassifierConfig cfg = ctx.config.binary;
    cfg.train.seed = ctx.config.effective_seed(cfg.train.seed);
    const auto r = train_binary(in, generated, cfg);
    w.model(kBinary, r.model);
    w.history("reports/binary_history.csv", r.history);
    w.json_file("reports/binary.json", {{"pairs", std::min(in.size(), generated.size())},
                                        {"threshold", cfg.threshold},
                                        {"history", to_json(r.history)}});
    if (!r.history.empty()) ctx.log("train-binary", "held-out accuracy " + std::to_string(r.history.back().val_acc));
}

void train_core_stage(const StageContext& ctx, Writer& w) {
    const Dataset train = load(ctx, kTrainIn, "synth-data");
    CoreClassifierConfig cfg = ctx.config.core;
    cfg.train.seed = ctx.config.effective_seed(cfg.train.seed);
    const auto r = train_core(train, cfg);
    w.model(kCore, r.model);
    w.history("reports/core_history.csv", r.history);
    w.json_file("reports/core.json", {{"classes", cfg.classes()}, {"history", to_json(r.history)}});
    if (!r.history.empty()) ctx.log("train-core", "validation accuracy " + std::to_string(r.history.back().val_acc));
}

double pipeline_tau(const StageContext& ctx) {
    if (ctx.config.pipeline.tau) return *ctx.config.pipeline.tau;
    require(ctx, kCalibration, "calibrate");
    std::ifstream in(ctx.out / kCalibration);
    return json::parse(in).at("chosen_tau").get<double>();
}

PipelineConfig build_pipeline(const StageContext& ctx, const ScoreRequest* overrides = nullptr) {
    const PipelineSection& p = ctx.config.pipeline;
    PipelineConfig cfg;
    cfg.tau = pipeline_tau(ctx);
    cfg.tier2_threshold = p.tier2_threshold;
    cfg.tier1 = p.tier1;
    cfg.tier2 = p.tier2;
    cfg.ssim = ctx.config.ssim;
    auto model = [&](const std::optional<fs::path>& given, const fs::path& rel, const std::string& producer) {
        if (given) {
            if (!fs::exists(*given)) throw MissingStageError(producer, *given);
            return std::make_shared<const Model>(load_params(*given));
        }
        return std::make_shared<const Model>(load_model(ctx, rel, producer));
    };
    const std::optional<fs::path> none;
    if (cfg.tier1) cfg.autoencoder = model(overrides ? overrides->autoencoder : none, kAutoencoder, "train-ae");
    if (cfg.tier2) cfg.binary = model(overrides ? overrides->binary : none, kBinary, "train-binary");
    cfg.core = model(overrides ? overrides->core : none, kCore, "train-core");
    return cfg;
}

void evaluate_stage(const StageContext& ctx, Writer& w) {
    const PipelineConfig pipeline = build_pipeline(ctx);
    const Dataset mixed = load(ctx, kEvalMixed, "synth-data");
    std::vector<Verdict> verdicts;
    const EvaluationReport report = evaluate(pipeline, mixed, &verdicts);
    const Comparison cmp = compare_report(report.unguarded, report.guarded, report.baseline);

    json j = to_json(report);
    j["pipeline"] = {{"tau", pipeline.tau},
                     {"tier2_threshold", pipeline.tier2_threshold},
                     {"tier1", pipeline.tier1},
                     {"tier2", pipeline.tier2}};
    w.json_file("reports/evaluation.json", j);
    w.json_file("reports/comparison.json", to_json(cmp));
    std::ostringstream csv;
    write_comparison_csv(csv, report.unguarded, report.guarded, report.baseline);
    w.text("reports/comparison.csv", csv.str());

    for (auto [outcome, name] : {std::pair{Outcome::rejected_tier1, "rejected_tier1"}, std::pair{Outcome::rejected_tier2, "rejected_tier2"}}) {
        if (auto sheet = rejection_gallery(mixed, verdicts, outcome)) w.image(fs::path("galleries") / (std::string(name) + ".pgm"), *sheet);
    }
    // Reconstruction triptychs for the first few IN and OUT samples.
    if (pipeline.autoencoder) {
        std::map<DistributionLabel, std::size_t> written;
        for (const auto& s : mixed.samples) {
            std::size_t& n = written[s.distribution];
            if (n >= 4) continue;
            const std::string label = s.distribution == DistributionLabel::in ? "in" : "out";
            w.image(fs::path("galleries/triptychs") / (label + "_" + std::to_string(n++) + ".pgm"),
                    reconstruction_triptych(*pipeline.autoencoder, s.image, pipeline.ssim));
        }
    }
    ctx.log("evaluate", "end-to-end accuracy unguarded " + std::to_string(cmp.unguarded_end_to_end) + ", guarded " +
                            std::to_string(cmp.guarded_end_to_end) + "; AUC unguarded " + std::to_string(cmp.unguarded_auc) +
                            ", guarded " + std::to_string(cmp.guarded_auc) + ", baseline " + std::to_string(cmp.baseline_auc));
}

}  // namespace

void StageContext::log(const std::string& stage, const std::string& message) const {
    if (!quiet) std::cerr << "[" << stage << "] " << message << std::endl;
}

OutputLock::OutputLock(const fs::path& out) {
    fs::create_directories(out);
    const fs::path lock = out / ".lock";
    fd_ = ::open(lock.c_str(), O_CREAT | O_RDWR | O_CLOEXEC, 0644);
    if (fd_ < 0) throw LockError("cannot open lock file " + lock.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw LockError("output directory " + out.string() + " is in use by another command");
    }
}

OutputLock::~OutputLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"synth-data", "train-ae", "calibrate", "gen-boundary",
                                                   "train-binary", "train-core", "evaluate"};
    return names;
}

void run_stage(const std::string& stage, const StageContext& ctx) {
    using Fn = void (*)(const StageContext&, Writer&);
    static const std::map<std::string, Fn> table = {
        {"synth-data", synth_data},         {"train-ae", train_ae},           {"calibrate", calibrate_stage},
        {"gen-boundary", gen_boundary},     {"train-binary", train_binary_stage}, {"train-core", train_core_stage},
        {"evaluate", evaluate_stage}};
    const auto fn = table.find(stage);
    if (fn == table.end()) throw std::invalid_argument("unknown stage '" + stage + "'");
    const auto t0 = std::chrono::steady_clock::now();
    Writer w(ctx);
    fn->second(ctx, w);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    RunManifest m = RunManifest::load(ctx.out);
    m.tool_version = NNWD_VERSION;
    m.record(stage, ctx.out, w.files(), sha256_text(ctx.config.canonical().dump()), seconds);
    m.save(ctx.out);
    ctx.log(stage, "done in " + std::to_string(seconds) + " s, " + std::to_string(w.files().size()) + " artifacts");
}

std::string score_image(const StageContext& ctx, const ScoreRequest& request) {
    const Image image = read_netpbm(request.image);
    const PipelineConfig pipeline = build_pipeline(ctx, &request);
    json j = to_json(guard(pipeline, image));
    j["image"] = request.image.string();
    j["tau"] = pipeline.tau;
    j["tier2_threshold"] = pipeline.tier2_threshold;
    return j.dump(2);
}

std::vector<std::string> audit(const StageContext& ctx) {
    if (!fs::exists(RunManifest::file(ctx.out))) throw MissingStageError("synth-data", RunManifest::file(ctx.out));
    return RunManifest::load(ctx.out).audit(ctx.out);
}

}  // namespace nnwd::cli
