#include "config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace nnwd::cli {

namespace {

using Setter = std::function<void(const std::string&)>;
using Schema = std::map<std::string, std::map<std::string, Setter>>;

struct BadValue : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

std::uint64_t to_u64(const std::string& s) {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
        throw BadValue("expected an unsigned integer, got '" + s + "'");
    }
    return v;
}

double to_double(const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (s.empty() || used != s.size() || !std::isfinite(v)) throw BadValue("expected a number, got '" + s + "'");
    return v;
}

bool to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw BadValue("expected true or false, got '" + s + "'");
}

std::vector<std::size_t> to_widths(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto first = item.find_first_not_of(' ');
        const auto last = item.find_last_not_of(' ');
        if (first == std::string::npos) throw BadValue("empty entry in width list '" + s + "'");
        const std::size_t w = to_u64(item.substr(first, last - first + 1));
        if (w == 0) throw BadValue("layer widths must be positive");
        out.push_back(w);
    }
    return out;
}

/// "rotate:3, horizontal-flip:0.5" or "none".
AugmentationSpec to_augmentation(const std::string& s) {
    AugmentationSpec spec;
    if (s == "none" || s.empty()) return spec;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(' '));
        item.erase(item.find_last_not_of(' ') + 1);
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw BadValue("augmentation entry '" + item + "' is not kind:value");
        const std::string kind = item.substr(0, colon);
        const double value = to_double(item.substr(colon + 1));
        bool found = false;
        for (auto k : {AugmentKind::rotate, AugmentKind::crop_resize, AugmentKind::horizontal_flip, AugmentKind::grayscale}) {
            if (to_string(k) == kind) {
                spec.ops.push_back({k, value});
                found = true;
            }
        }
        if (!found) throw BadValue("unknown augmentation '" + kind + "' (rotate, crop-resize, horizontal-flip, grayscale)");
    }
    return spec;
}

std::string to_text(const AugmentationSpec& spec) {
    if (spec.ops.empty()) return "none";
    std::string out;
    for (const auto& op : spec.ops) {
        if (!out.empty()) out += ",";
        std::ostringstream v;
        v << op.value;
        out += to_string(op.kind) + ":" + v.str();
    }
    return out;
}

template <class E>
E wrap_enum(E (*parse)(const std::string&), const std::string& s) {
    try {
        return parse(s);
    } catch (const std::invalid_argument& e) {
        throw BadValue(e.what());
    }
}

void train_keys(std::map<std::string, Setter>& keys, TrainConfig& t) {
    keys["epochs"] = [&](const std::string& v) { t.epochs = to_u64(v); };
    keys["batch_size"] = [&](const std::string& v) { t.batch_size = to_u64(v); };
    keys["learning_rate"] = [&](const std::string& v) { t.optimizer.learning_rate = to_double(v); };
    keys["optimizer"] = [&](const std::string& v) { t.optimizer.kind = wrap_enum(optimizer_kind_from_string, v); };
    keys["validation_fraction"] = [&](const std::string& v) { t.validation_fraction = to_double(v); };
    keys["seed"] = [&](const std::string& v) { t.seed = to_u64(v); };
}

Schema make_schema(ExperimentConfig& c) {
    Schema s;
    auto& ex = s["experiment"];
    ex["out"] = [&](const std::string& v) { c.out = v; };
    ex["seed"] = [&](const std::string& v) { c.seed = to_u64(v); };

    auto& ds = s["dataset"];
    SyntheticSpec& syn = c.dataset.synthetic;
    ds["classes"] = [&](const std::string& v) { syn.classes = to_u64(v); };
    ds["height"] = [&](const std::string& v) { syn.height = to_u64(v); };
    ds["width"] = [&](const std::string& v) { syn.width = to_u64(v); };
    ds["channels"] = [&](const std::string& v) { syn.channels = to_u64(v); };
    ds["radius_fraction"] = [&](const std::string& v) { syn.radius_fraction = to_double(v); };
    ds["scale_min"] = [&](const std::string& v) { syn.scale_min = to_double(v); };
    ds["scale_max"] = [&](const std::string& v) { syn.scale_max = to_double(v); };
    ds["jitter_px"] = [&](const std::string& v) { syn.jitter_px = to_double(v); };
    ds["rotation_deg"] = [&](const std::string& v) { syn.rotation_deg = to_double(v); };
    ds["noise"] = [&](const std::string& v) { syn.noise = to_double(v); };
    ds["train_in"] = [&](const std::string& v) { c.dataset.train_in = to_u64(v); };
    ds["eval_in"] = [&](const std::string& v) { c.dataset.eval_in = to_u64(v); };
    ds["eval_ood"] = [&](const std::string& v) { c.dataset.eval_ood = to_u64(v); };
    ds["calib_in"] = [&](const std::string& v) { c.dataset.calib_in = to_u64(v); };
    ds["calib_ood"] = [&](const std::string& v) { c.dataset.calib_ood = to_u64(v); };
    ds["ood_import"] = [&](const std::string& v) {
        if (v.empty()) {
            c.dataset.ood_import.reset();
        } else {
            c.dataset.ood_import = v;
        }
    };
    ds["seed"] = [&](const std::string& v) { c.dataset.seed = to_u64(v); };

    auto& ae = s["autoencoder"];
    train_keys(ae, c.autoencoder.train);
    ae["hidden"] = [&](const std::string& v) { c.autoencoder_hidden = to_widths(v); };
    ae["augmentation"] = [&](const std::string& v) { c.autoencoder.augmentation = to_augmentation(v); };

    auto& cal = s["calibration"];
    cal["tau"] = [&](const std::string& v) { c.calibration.tau = to_double(v); };
    cal["grid_step"] = [&](const std::string& v) { c.calibration.grid_step = to_double(v); };
    cal["band"] = [&](const std::string& v) { c.calibration.band = to_double(v); };
    cal["override"] = [&](const std::string& v) { c.calibration.override_tau = to_bool(v); };

    auto& gen = s["generator"];
    gen["target"] = [&](const std::string& v) { c.generator.target = to_double(v); };
    gen["tolerance"] = [&](const std::string& v) { c.generator.tolerance = to_double(v); };
    gen["max_iterations"] = [&](const std::string& v) { c.generator.max_iterations = to_u64(v); };
    gen["step"] = [&](const std::string& v) { c.generator.step = to_double(v); };
    gen["max_halvings"] = [&](const std::string& v) { c.generator.max_halvings = to_u64(v); };
    gen["seed_mode"] = [&](const std::string& v) { c.generator.seed_mode = wrap_enum(seed_mode_from_string, v); };
    gen["retry_budget"] = [&](const std::string& v) { c.generator.retry_budget = to_u64(v); };
    gen["count"] = [&](const std::string& v) { c.generator_count = to_u64(v); };
    gen["seed"] = [&](const std::string& v) { c.generator.seed = to_u64(v); };

    auto& bin = s["binary"];
    train_keys(bin, c.binary.train);
    bin["hidden"] = [&](const std::string& v) { c.binary_hidden = to_widths(v); };
    bin["threshold"] = [&](const std::string& v) { c.binary.threshold = to_double(v); };
    bin["in_count"] = [&](const std::string& v) { c.binary_in = to_u64(v); };

    auto& core = s["core"];
    train_keys(core, c.core.train);
    core["hidden"] = [&](const std::string& v) { c.core_hidden = to_widths(v); };
    core["augmentation"] = [&](const std::string& v) { c.core.augmentation = to_augmentation(v); };

    auto& pipe = s["pipeline"];
    pipe["tau"] = [&](const std::string& v) {
        if (v == "calibrated") {
            c.pipeline.tau.reset();
        } else {
            c.pipeline.tau = to_double(v);
        }
    };
    pipe["tier2_threshold"] = [&](const std::string& v) { c.pipeline.tier2_threshold = to_double(v); };
    pipe["tier1"] = [&](const std::string& v) { c.pipeline.tier1 = to_bool(v); };
    pipe["tier2"] = [&](const std::string& v) { c.pipeline.tier2 = to_bool(v); };

    auto& ss = s["ssim"];
    ss["k1"] = [&](const std::string& v) { c.ssim.k1 = to_double(v); };
    ss["k2"] = [&](const std::string& v) { c.ssim.k2 = to_double(v); };
    ss["window"] = [&](const std::string& v) { c.ssim.window = to_u64(v); };
    ss["aggregation"] = [&](const std::string& v) { c.ssim.aggregation = wrap_enum(ssim_aggregation_from_string, v); };
    return s;
}

std::vector<std::size_t> with_ends(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> widths{in};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    return widths;
}

template <class F>
void checked(const std::string& key, F&& check) {
    try {
        check();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

}  // namespace

std::uint64_t ExperimentConfig::effective_seed(std::uint64_t section_seed) const { return derive_seed(seed, section_seed); }

void ExperimentConfig::finalize() {
    checked("dataset", [&] { dataset.synthetic.validate(); });
    const std::size_t in = dataset.synthetic.height * dataset.synthetic.width * dataset.synthetic.channels;
    const std::size_t k = dataset.synthetic.classes;
    autoencoder.spec = NetworkSpec::mlp(with_ends(in, autoencoder_hidden, in), ActivationKind::relu,
                                        ActivationLayer{ActivationKind::sigmoid});
    binary.spec = NetworkSpec::mlp(with_ends(in, binary_hidden, 1), ActivationKind::relu, ActivationLayer{ActivationKind::sigmoid});
    core.spec = NetworkSpec::mlp(with_ends(in, core_hidden, k), ActivationKind::relu, SoftmaxLayer{});
    generator.ssim = ssim;
    checked("autoencoder", [&] { autoencoder.validate(); });
    checked("calibration", [&] { calibration.validate(); });
    checked("generator", [&] { generator.validate(); });
    checked("binary", [&] { binary.validate(); });
    checked("core", [&] { core.validate(); });
    checked("ssim", [&] { ssim.validate(); });
    if (dataset.train_in < k) throw ConfigError("dataset.train_in", "needs at least one sample per class");
    if (dataset.eval_in < k) throw ConfigError("dataset.eval_in", "needs at least one sample per class");
    if (dataset.calib_in < k) throw ConfigError("dataset.calib_in", "needs at least one sample per class");
    if (dataset.eval_ood < 3) throw ConfigError("dataset.eval_ood", "needs at least one sample per OOD kind");
    if (dataset.calib_ood < 3) throw ConfigError("dataset.calib_ood", "needs at least one sample per OOD kind");
    if (dataset.ood_import && !std::filesystem::is_directory(*dataset.ood_import)) {
        throw ConfigError("dataset.ood_import", "directory '" + dataset.ood_import->string() + "' does not exist");
    }
    if (generator_count == 0) throw ConfigError("generator.count", "must be at least 1");
    if (binary_in == 0) throw ConfigError("binary.in_count", "must be at least 1");
    if (pipeline.tau && !(*pipeline.tau >= 0.0)) throw ConfigError("pipeline.tau", "must be non-negative or 'calibrated'");
    if (!(pipeline.tier2_threshold >= 0.0 && pipeline.tier2_threshold <= 1.0)) {
        throw ConfigError("pipeline.tier2_threshold", "must lie in [0, 1]");
    }
}

nlohmann::json ExperimentConfig::canonical() const {
    const SyntheticSpec& s = dataset.synthetic;
    auto train = [](const TrainConfig& t) {
        return nlohmann::json{{"epochs", t.epochs},
                              {"batch_size", t.batch_size},
                              {"learning_rate", t.optimizer.learning_rate},
                              {"optimizer", to_string(t.optimizer.kind)},
                              {"validation_fraction", t.validation_fraction},
                              {"seed", t.seed}};
    };
    return {{"seed", seed},
            {"dataset",
             {{"classes", s.classes},
              {"height", s.height},
              {"width", s.width},
              {"channels", s.channels},
              {"radius_fraction", s.radius_fraction},
              {"scale", {s.scale_min, s.scale_max}},
              {"jitter_px", s.jitter_px},
              {"rotation_deg", s.rotation_deg},
              {"noise", s.noise},
              {"train_in", dataset.train_in},
              {"eval_in", dataset.eval_in},
              {"eval_ood", dataset.eval_ood},
              {"calib_in", dataset.calib_in},
              {"calib_ood", dataset.calib_ood},
              {"ood_import", dataset.ood_import ? dataset.ood_import->string() : ""},
              {"seed", dataset.seed}}},
            {"autoencoder",
             {{"spec", autoencoder.spec.to_text()}, {"train", train(autoencoder.train)}, {"augmentation", to_text(autoencoder.augmentation)}}},
            {"calibration",
             {{"tau", calibration.tau}, {"grid_step", calibration.grid_step}, {"band", calibration.band}, {"override", calibration.override_tau}}},
            {"generator",
             {{"target", generator.target},
              {"tolerance", generator.tolerance},
              {"max_iterations", generator.max_iterations},
              {"step", generator.step},
              {"max_halvings", generator.max_halvings},
              {"seed_mode", to_string(generator.seed_mode)},
              {"retry_budget", generator.retry_budget},
              {"count", generator_count},
              {"seed", generator.seed}}},
            {"binary",
             {{"spec", binary.spec.to_text()}, {"train", train(binary.train)}, {"threshold", binary.threshold}, {"in_count", binary_in}}},
            {"core", {{"spec", core.spec.to_text()}, {"train", train(core.train)}, {"augmentation", to_text(core.augmentation)}}},
            {"pipeline",
             {{"tau", pipeline.tau ? nlohmann::json(*pipeline.tau) : nlohmann::json("calibrated")},
              {"tier2_threshold", pipeline.tier2_threshold},
              {"tier1", pipeline.tier1},
              {"tier2", pipeline.tier2}}},
            {"ssim", {{"k1", ssim.k1}, {"k2", ssim.k2}, {"window", ssim.window}, {"aggregation", to_string(ssim.aggregation)}}}};
}

ExperimentConfig parse_config(const std::string& ini_text) {
    boost::property_tree::ptree tree;
    std::istringstream in(ini_text);
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("", "line " + std::to_string(e.line()) + ": " + e.message());
    }
    ExperimentConfig cfg;
    Schema schema = make_schema(cfg);
    for (const auto& [section, entries] : tree) {
        const auto known = schema.find(section);
        if (known == schema.end()) {
            if (entries.empty() && !entries.data().empty()) throw ConfigError(section, "key outside any section");
            throw ConfigError(section, "unknown section");
        }
        for (const auto& [key, value] : entries) {
            const std::string path = section + "." + key;
            const auto setter = known->second.find(key);
            if (setter == known->second.end()) throw ConfigError(path, "unknown key");
            try {
                setter->second(value.data());
            } catch (const BadValue& e) {
                throw ConfigError(path, e.what());
            }
        }
    }
    cfg.finalize();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("", "cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

}  // namespace nnwd::cli
