#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "nnwd/autoencoder.hpp"
#include "nnwd/classifiers.hpp"
#include "nnwd/generator.hpp"
#include "nnwd/synthetic.hpp"

namespace nnwd::cli {

/// Malformed or inconsistent configuration. `key` is the dotted path of the
/// offending entry ("autoencoder.epochs"), or empty for file-level errors.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

struct DatasetSection {
    SyntheticSpec synthetic;
    std::size_t train_in = 4000;
    std::size_t eval_in = 1000;
    std::size_t eval_ood = 2000;  // split across the three OOD kinds
    std::size_t calib_in = 500;
    std::size_t calib_ood = 600;
    std::optional<std::filesystem::path> ood_import;  // extra OUT images appended to the OOD eval set
    std::uint64_t seed = 1;
};

struct PipelineSection {
    std::optional<double> tau = 0.85;  // nullopt: use the calibrated tau
    double tier2_threshold = 0.5;
    bool tier1 = true;
    bool tier2 = true;
};

/// Section seeds are mixed with the experiment seed: the effective seed of a
/// stage is derive_seed(experiment.seed, section.seed), so --seed reseeds
/// every stage at once while each section keeps its own stream.
struct ExperimentConfig {
    std::filesystem::path out = "run";
    std::uint64_t seed = 1;
    DatasetSection dataset;
    std::vector<std::size_t> autoencoder_hidden{256, 64, 256};
    std::vector<std::size_t> binary_hidden{128, 32};
    std::vector<std::size_t> core_hidden{256, 64};
    AutoencoderConfig autoencoder = AutoencoderConfig::defaults();
    ThresholdConfig calibration;
    GeneratorConfig generator;
    std::size_t generator_count = 500;
    BinaryClassifierConfig binary = BinaryClassifierConfig::defaults();
    std::size_t binary_in = 500;  // IN samples offered to the balanced binary set
    CoreClassifierConfig core = CoreClassifierConfig::defaults();
    PipelineSection pipeline;
    SsimParams ssim;

    std::uint64_t effective_seed(std::uint64_t section_seed) const;
    /// Rebuilds network specs from the dataset dims and hidden widths;
    /// throws ConfigError.
    void finalize();
    /// Canonical form hashed into the run manifest (excludes `out`).
    nlohmann::json canonical() const;
};

/// Sections and keys are fixed; unknown keys are errors.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& ini_text);

}  // namespace nnwd::cli
