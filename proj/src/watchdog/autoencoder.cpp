#include "nnwd/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>

namespace nnwd {

AutoencoderConfig AutoencoderConfig::defaults(std::size_t input) {
    AutoencoderConfig c;
    c.spec = NetworkSpec::mlp({input, 256, 64, 256, input}, ActivationKind::relu, ActivationLayer{ActivationKind::sigmoid});
    c.train.epochs = 30;
    c.train.batch_size = 64;
    c.train.optimizer.learning_rate = 1e-3;
    // Geometric warps are kept mild: zero-padded rotation and crop zoom move
    // mass the decoder then spends capacity on.
    c.augmentation = {{{AugmentKind::rotate, 3.0},
                       {AugmentKind::horizontal_flip, 0.5},
                       {AugmentKind::grayscale, 0.2}}};
    return c;
}

std::size_t latent_width(const NetworkSpec& spec) {
    std::size_t narrowest = 0;
    for (const auto& layer : spec.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            narrowest = narrowest == 0 ? d->out : std::min(narrowest, d->out);
        }
    }
    return narrowest;
}

void AutoencoderConfig::validate() const {
    spec.validate();
    train.validate();
    augmentation.validate();
    const auto in = spec.input_size();
    const auto out = spec.output_size();
    if (!in || !out || *in != *out) throw std::invalid_argument("autoencoder input and output sizes must be equal");
    const std::size_t latent = latent_width(spec);
    if (latent == 0 || latent >= *in) {
        throw std::invalid_argument("autoencoder needs a latent layer narrower than its " + std::to_string(*in) +
                                    " inputs");
    }
}

AutoencoderResult train_autoencoder(const Dataset& train_set, const AutoencoderConfig& config) {
    config.validate();
    if (train_set.empty()) throw std::invalid_argument("autoencoder training set is empty");
    for (const auto& s : train_set.samples) {
        if (s.distribution != DistributionLabel::in) throw std::invalid_argument("autoencoder trains on IN data only");
    }
    if (train_set.samples.front().image.size() != *config.spec.input_size()) {
        throw ShapeError("autoencoder input size " + std::to_string(*config.spec.input_size()) +
                         " does not match image size " + std::to_string(train_set.samples.front().image.size()));
    }

    AutoencoderResult result;
    result.model.spec = config.spec;
    result.model.params = init_params(config.spec, config.train.seed);

    const Split split = split_indices(train_set.size(), config.train.validation_fraction, derive_seed(config.train.seed, 0));
    const auto& val_idx = split.validation.empty() ? split.train : split.validation;
    const Tensor val_batch = train_set.batch(val_idx);
    auto val_loss = [&](const ParameterSet& params) {
        return loss(LossKind::mse, predict_chunked(config.spec, params, val_batch), val_batch);
    };
    result.initial_val_loss = val_loss(result.model.params);

    const BatchBuilder build = [&](std::span<const std::size_t> idx, Rng& rng) {
        std::vector<Image> augmented;
        augmented.reserve(idx.size());
        for (auto i : idx) augmented.push_back(augment(train_set.samples[i].image, config.augmentation, rng));
        std::vector<const Image*> ptrs;
        for (const auto& img : augmented) ptrs.push_back(&img);
        Tensor x = images_to_batch(ptrs);
        return Minibatch{x, x};
    };
    result.history = train_network(config.spec, result.model.params, config.train, LossKind::mse, split.train, build,
                                   [&](const ParameterSet& params, EpochRecord& r) { r.val_loss = val_loss(params); });
    return result;
}

namespace {

Image to_image_like(std::span<const double> values, const Image& like) {
    Image out(like.height, like.width, like.channels);
    if (values.size() != out.size()) throw ShapeError("autoencoder output size does not match the image");
    // Outputs of a sigmoid head already lie in [0, 1]; the clip guards
    // against linear heads and rounding at the ends.
    for (std::size_t i = 0; i < values.size(); ++i) out.pixels[i] = std::clamp(values[i], 0.0, 1.0);
    return out;
}

void check_input(const Model& ae, const Image& image) {
    const auto in = ae.spec.input_size();
    if (in && *in != image.size()) {
        throw ShapeError("image has " + std::to_string(image.size()) + " values but the autoencoder expects " +
                         std::to_string(*in));
    }
}

}  // namespace

Image reconstruct(const Model& ae, const Image& image) {
    check_input(ae, image);
    const Tensor y = predict(ae.spec, ae.params, image_to_batch(image));
    return to_image_like(y.data(), image);
}

std::vector<Image> reconstruct_all(const Model& ae, const std::vector<const Image*>& images) {
    std::vector<Image> out;
    if (images.empty()) return out;
    for (const Image* img : images) check_input(ae, *img);
    const Tensor y = predict_chunked(ae.spec, ae.params, images_to_batch(images));
    out.reserve(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) out.push_back(to_image_like(y.row(i), *images[i]));
    return out;
}

double tier1_score(const Model& ae, const Image& image, const SsimParams& ssim_params) {
    return ssim(image, reconstruct(ae, image), ssim_params);
}

std::vector<double> tier1_scores(const Model& ae, const Dataset& dataset, const SsimParams& ssim_params) {
    const auto images = dataset.images();
    const auto recon = reconstruct_all(ae, images);
    std::vector<double> scores(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) scores[i] = ssim(*images[i], recon[i], ssim_params);
    return scores;
}

void ThresholdConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
    if (!(grid_step > 0.0 && grid_step <= 1.0)) throw std::invalid_argument("grid step must lie in (0, 1]");
    if (!(band >= 0.0)) throw std::invalid_argument("calibration band must be non-negative");
}

std::size_t ThresholdConfig::grid_points() const { return static_cast<std::size_t>(std::floor(1.0 / grid_step + 1e-9)) + 1; }

double ThresholdConfig::grid_value(std::size_t i) const { return std::min(1.0, static_cast<double>(i) * grid_step); }

CalibrationReport calibrate_scores(std::span<const double> in_scores, std::span<const double> ood_scores,
                                   const ThresholdConfig& config) {
    config.validate();
    if (in_scores.empty() || ood_scores.empty()) throw std::invalid_argument("calibration needs IN and OOD scores");
    CalibrationReport report;
    std::vector<double> scores(in_scores.begin(), in_scores.end());
    scores.insert(scores.end(), ood_scores.begin(), ood_scores.end());
    std::unique_ptr<bool[]> positive(new bool[scores.size()]);
    for (std::size_t i = 0; i < scores.size(); ++i) positive[i] = i < in_scores.size();
    report.roc = roc(scores, std::span<const bool>(positive.get(), scores.size()));

    const std::size_t points = config.grid_points();
    std::size_t best = 0;
    for (std::size_t g = 0; g < points; ++g) {
        const double tau = config.grid_value(g);
        std::size_t tp = 0, fp = 0;
        for (double s : in_scores) tp += tier1_gate(s, tau) == GateDecision::pass;
        for (double s : ood_scores) fp += tier1_gate(s, tau) == GateDecision::pass;
        report.grid.push_back(tau);
        report.youden.push_back(static_cast<double>(tp) / static_cast<double>(in_scores.size()) -
                                static_cast<double>(fp) / static_cast<double>(ood_scores.size()));
        if (report.youden[g] > report.youden[best]) best = g;
    }
    const double floor_j = report.youden[best] - config.band;
    std::size_t lo = best, hi = best;
    while (lo > 0 && report.youden[lo - 1] >= floor_j) --lo;
    while (hi + 1 < points && report.youden[hi + 1] >= floor_j) ++hi;
    report.interval_low = report.grid[lo];
    report.interval_high = report.grid[hi];
    if (config.override_tau) {
        const auto g = static_cast<std::size_t>(std::llround(config.tau / config.grid_step));
        report.chosen_tau = config.grid_value(std::min(g, points - 1));
        report.overridden = true;
    } else {
        // Midpoint of the index range; ties round toward the larger tau.
        report.chosen_tau = report.grid[(lo + hi + 1) / 2];
    }
    report.in_mean = std::accumulate(in_scores.begin(), in_scores.end(), 0.0) / static_cast<double>(in_scores.size());
    report.ood_mean = std::accumulate(ood_scores.begin(), ood_scores.end(), 0.0) / static_cast<double>(ood_scores.size());
    return report;
}

CalibrationReport calibrate(const Model& ae, const Dataset& in_val, const Dataset& ood_val,
                            const ThresholdConfig& config, const SsimParams& ssim_params) {
    if (in_val.empty() || ood_val.empty()) throw std::invalid_argument("calibration sets must be non-empty");
    const auto in_scores = tier1_scores(ae, in_val, ssim_params);
    const auto ood_scores = tier1_scores(ae, ood_val, ssim_params);
    CalibrationReport report = calibrate_scores(in_scores, ood_scores, config);
    std::map<int, std::pair<double, std::size_t>> sums;
    for (std::size_t i = 0; i < in_val.size(); ++i) {
        if (const auto& c = in_val.samples[i].class_label) {
            sums[*c].first += in_scores[i];
            ++sums[*c].second;
        }
    }
    for (const auto& [c, s] : sums) report.per_class_mean[c] = s.first / static_cast<double>(s.second);
    return report;
}

Image reconstruction_triptych(const Model& ae, const Image& image, const SsimParams& ssim_params) {
    const Image gray = to_grayscale(image);
    const Image recon = to_grayscale(reconstruct(ae, image));
    const SsimMap map = ssim_map(image, reconstruct(ae, image), ssim_params);
    Image map_tile(gray.height, gray.width, 1, 0.0);
    const Image small = map.to_image();
    const std::size_t top = (gray.height - std::min(gray.height, small.height)) / 2;
    const std::size_t left = (gray.width - std::min(gray.width, small.width)) / 2;
    if (small.height == 1 && small.width == 1) {
        std::fill(map_tile.pixels.begin(), map_tile.pixels.end(), small.pixels[0]);
    } else {
        for (std::size_t r = 0; r < small.height; ++r) {
            for (std::size_t c = 0; c < small.width; ++c) map_tile.at(top + r, left + c) = small.at(r, c);
        }
    }
    return contact_sheet({gray, recon, map_tile}, 3);
}

}  // namespace nnwd
