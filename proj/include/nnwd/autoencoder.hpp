#pragma once

#include <map>
#include <optional>
#include <vector>

#include "nnwd/augment.hpp"
#include "nnwd/dataset.hpp"
#include "nnwd/model_io.hpp"
#include "nnwd/roc.hpp"
#include "nnwd/ssim.hpp"
#include "nnwd/training.hpp"

namespace nnwd {

struct AutoencoderConfig {
    NetworkSpec spec;
    TrainConfig train;
    AugmentationSpec augmentation;

    /// 1024-256-64-256-1024 with relu hidden layers and a sigmoid output,
    /// sized to `input` elements (the hidden widths are fixed).
    static AutoencoderConfig defaults(std::size_t input = 1024);

    /// Input and output sizes must agree and some dense layer must be
    /// strictly narrower than the input. Throws std::invalid_argument.
    void validate() const;
};

/// Narrowest dense output width.
std::size_t latent_width(const NetworkSpec& spec);

struct AutoencoderResult {
    Model model;
    History history;  // train_loss / val_loss are per-element MSE
    double initial_val_loss = 0.0;
};

/// Trains on IN images (augmented inputs, reconstruction target = the
/// augmented input). With a zero validation fraction val_loss is measured
/// on the training set. Deterministic for a fixed config.
AutoencoderResult train_autoencoder(const Dataset& train_set, const AutoencoderConfig& config);

/// Forward pass reshaped to the input's dims.
Image reconstruct(const Model& ae, const Image& image);
std::vector<Image> reconstruct_all(const Model& ae, const std::vector<const Image*>& images);

/// ssim(image, reconstruct(ae, image)).
double tier1_score(const Model& ae, const Image& image, const SsimParams& ssim_params = {});
std::vector<double> tier1_scores(const Model& ae, const Dataset& dataset, const SsimParams& ssim_params = {});

enum class GateDecision { pass, reject };

/// PASS iff score >= tau.
inline GateDecision tier1_gate(double score, double tau) {
    return score >= tau ? GateDecision::pass : GateDecision::reject;
}

struct ThresholdConfig {
    double tau = 0.85;
    double grid_step = 0.005;  // sweep 0, step, ..., 1
    double band = 0.02;        // absolute Youden J slack defining the interval
    bool override_tau = false;  // calibrate reports `tau` as chosen instead of the Youden midpoint

    void validate() const;
    std::size_t grid_points() const;
    double grid_value(std::size_t i) const;
};

struct CalibrationReport {
    RocCurve roc;  // POS = IN, score = tier-1 score
    std::vector<double> grid;
    std::vector<double> youden;  // TPR - FPR at each grid tau
    double interval_low = 0.0;
    double interval_high = 0.0;
    double chosen_tau = 0.0;  // on the grid
    bool overridden = false;
    double in_mean = 0.0;
    double ood_mean = 0.0;
    std::map<int, double> per_class_mean;
};

/// Sweep on precomputed scores; used by calibrate and testable in isolation.
/// The interval is the contiguous run of grid taus with J >= max J - band
/// around the smallest maximizing tau; chosen tau is its midpoint rounded
/// to the nearest grid point.
CalibrationReport calibrate_scores(std::span<const double> in_scores, std::span<const double> ood_scores,
                                   const ThresholdConfig& config);

CalibrationReport calibrate(const Model& ae, const Dataset& in_val, const Dataset& ood_val,
                            const ThresholdConfig& config, const SsimParams& ssim_params = {});

/// Original | reconstruction | SSIM map (centered, mapped to [0, 1]) with
/// one-pixel separators.
Image reconstruction_triptych(const Model& ae, const Image& image, const SsimParams& ssim_params = {});

}  // namespace nnwd
