#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "nnwd/autoencoder.hpp"

namespace nnwd {

enum class SeedMode { in_distribution_image, uniform_noise, blend };

std::string to_string(SeedMode mode);
SeedMode seed_mode_from_string(const std::string& name);

struct GeneratorConfig {
    double target = 0.90;
    double tolerance = 0.02;
    std::size_t max_iterations = 500;
    double step = 0.05;  // largest per-pixel change of a full step
    std::size_t max_halvings = 10;
    SeedMode seed_mode = SeedMode::blend;
    std::uint64_t seed = 1;
    std::size_t retry_budget = 500;  // failed attempts tolerated by batch_generate
    SsimParams ssim;

    /// Throws std::invalid_argument unless target in (0, 1], tolerance > 0
    /// and max_iterations >= 1.
    void validate() const;
};

struct GeneratedSample {
    Image image;
    double score = 0.0;  // fresh tier-1 evaluation of `image`
    std::size_t iterations = 0;
    std::string provenance;       // seed mode and pool index
    std::vector<double> objective;  // f at the start and after every accepted step
};

/// No step within tolerance after max_iterations, or the line search found no
/// decrease. Carries the best score reached.
class GenerationError : public std::runtime_error {
public:
    GenerationError(const std::string& what, double best_score, std::size_t iterations)
        : std::runtime_error(what), best_score_(best_score), iterations_(iterations) {}
    double best_score() const { return best_score_; }
    std::size_t iterations() const { return iterations_; }

private:
    double best_score_;
    std::size_t iterations_;
};

struct ObjectiveGradient {
    double score = 0.0;                  // ssim(x, AE(x))
    double value = 0.0;                  // (score - target)^2
    std::vector<double> grad;            // df/dx
};

/// f(x) = (ssim(x, AE(x)) - target)^2 and its gradient: the direct SSIM
/// term plus the autoencoder Jacobian transpose applied to dSSIM/dAE(x).
ObjectiveGradient boundary_objective(const Model& ae, const Image& x, double target, const SsimParams& ssim_params);

/// Starting image for one attempt drawn from `pool` (IN images) per the mode.
Image seed_image(SeedMode mode, const std::vector<const Image*>& pool, Rng& rng, std::size_t& pool_index);

/// Descends f along -g / max|g| with backtracking; every iterate is clipped
/// to [0, 1]. Throws GenerationError on failure.
GeneratedSample generate_boundary(const Model& ae, const std::vector<const Image*>& pool, const GeneratorConfig& config,
                                  Rng& rng);

/// Optimizes from a given start image.
GeneratedSample refine_to_target(const Model& ae, Image start, const GeneratorConfig& config);

struct GeneratedBatch {
    Dataset dataset;  // OUT, class NONE, provenance generated-boundary
    std::vector<GeneratedSample> samples;
    std::size_t attempts = 0;
    std::size_t failures = 0;
};

/// n successes; attempt j draws from derive_seed(config.seed, j). Throws
/// GenerationError when more than retry_budget attempts fail.
GeneratedBatch batch_generate(const Model& ae, const Dataset& pool, const GeneratorConfig& config, std::size_t n,
                              const std::string& name = "generated");

}  // namespace nnwd
