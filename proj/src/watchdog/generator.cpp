#include "nnwd/generator.hpp"

#include <algorithm>
#include <cmath>

namespace nnwd {

std::string to_string(SeedMode mode) {
    switch (mode) {
        case SeedMode::in_distribution_image: return "in-distribution-image";
        case SeedMode::uniform_noise: return "uniform-noise";
        case SeedMode::blend: return "blend";
    }
    return "?";
}

SeedMode seed_mode_from_string(const std::string& name) {
    for (auto m : {SeedMode::in_distribution_image, SeedMode::uniform_noise, SeedMode::blend}) {
        if (to_string(m) == name) return m;
    }
    throw std::invalid_argument("unknown seed mode '" + name + "' (in-distribution-image, uniform-noise, blend)");
}

void GeneratorConfig::validate() const {
    if (!(target > 0.0 && target <= 1.0)) throw std::invalid_argument("generator target must lie in (0, 1]");
    if (!(tolerance > 0.0)) throw std::invalid_argument("generator tolerance must be positive");
    if (max_iterations < 1) throw std::invalid_argument("generator needs at least one iteration");
    if (!(step > 0.0)) throw std::invalid_argument("generator step must be positive");
    ssim.validate();
}

ObjectiveGradient boundary_objective(const Model& ae, const Image& x, double target, const SsimParams& ssim_params) {
    const auto in = ae.spec.input_size();
    if (in && *in != x.size()) throw ShapeError("generator image does not match the autoencoder input");
    auto fwd = forward(ae.spec, ae.params, image_to_batch(x));
    // Reconstruction used by the score is the clipped output; a sigmoid head
    // never leaves [0, 1], so the clip contributes no gradient there.
    std::vector<double> y(fwd.output.values().begin(), fwd.output.values().end());
    for (double& v : y) v = std::clamp(v, 0.0, 1.0);
    const SsimGradient sg = ssim_gradient(x.pixels, y, x.height, x.width, x.channels, ssim_params);

    ObjectiveGradient out;
    out.score = sg.value;
    const double diff = sg.value - target;
    out.value = diff * diff;
    fwd.tape.attach_output_gradient(Tensor(fwd.output.shape(), sg.dy), sg.value);
    const Gradients g = backward(fwd.tape, true);
    const Tensor& through = *g.input;
    out.grad.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.grad[i] = 2.0 * diff * (sg.dx[i] + through[i]);
    return out;
}

Image seed_image(SeedMode mode, const std::vector<const Image*>& pool, Rng& rng, std::size_t& pool_index) {
    if (mode != SeedMode::uniform_noise && pool.empty()) throw std::invalid_argument("seed mode needs a non-empty IN pool");
    Image img;
    if (mode == SeedMode::uniform_noise) {
        if (pool.empty()) throw std::invalid_argument("uniform-noise seeds take their dims from the IN pool");
        img = Image(pool.front()->height, pool.front()->width, pool.front()->channels);
        for (auto& v : img.pixels) v = rng.uniform();
        pool_index = 0;
        return img;
    }
    pool_index = rng.below(pool.size());
    img = *pool[pool_index];
    if (mode == SeedMode::blend) {
        for (auto& v : img.pixels) v = 0.5 * v + 0.5 * rng.uniform();
    }
    return img;
}

GeneratedSample refine_to_target(const Model& ae, Image x, const GeneratorConfig& config) {
    config.validate();
    x.clip();
    GeneratedSample out;
    ObjectiveGradient cur = boundary_objective(ae, x, config.target, config.ssim);
    out.objective.push_back(cur.value);
    double best_score = cur.score;
    std::size_t it = 0;
    for (;; ++it) {
        if (std::abs(cur.score - config.target) <= config.tolerance) break;
        if (it == config.max_iterations) {
            throw GenerationError("no sample within tolerance after " + std::to_string(it) + " iterations", best_score, it);
        }
        double gmax = 0.0;
        for (double v : cur.grad) gmax = std::max(gmax, std::abs(v));
        if (!(gmax > 0.0)) throw GenerationError("objective gradient vanished", best_score, it);

        bool accepted = false;
        double eta = config.step;
        for (std::size_t h = 0; h <= config.max_halvings && !accepted; ++h, eta *= 0.5) {
            Image trial = x;
            for (std::size_t i = 0; i < trial.size(); ++i) {
                trial.pixels[i] = std::clamp(x.pixels[i] - eta * cur.grad[i] / gmax, 0.0, 1.0);
            }
            ObjectiveGradient next = boundary_objective(ae, trial, config.target, config.ssim);
            if (next.value < cur.value) {
                x = std::move(trial);
                cur = std::move(next);
                accepted = true;
            }
        }
        if (!accepted) throw GenerationError("line search found no decrease", best_score, it);
        out.objective.push_back(cur.value);
        if (std::abs(cur.score - config.target) < std::abs(best_score - config.target)) best_score = cur.score;
    }
    out.iterations = it;
    out.score = tier1_score(ae, x, config.ssim);
    if (std::abs(out.score - config.target) > config.tolerance) {
        throw GenerationError("fresh evaluation left the tolerance band", out.score, it);
    }
    out.image = std::move(x);
    return out;
}

GeneratedSample generate_boundary(const Model& ae, const std::vector<const Image*>& pool, const GeneratorConfig& config,
                                  Rng& rng) {
    std::size_t index = 0;
    Image start = seed_image(config.seed_mode, pool, rng, index);
    GeneratedSample s = refine_to_target(ae, std::move(start), config);
    s.provenance = to_string(config.seed_mode) +
                   (config.seed_mode == SeedMode::uniform_noise ? std::string() : ":" + std::to_string(index));
    return s;
}

GeneratedBatch batch_generate(const Model& ae, const Dataset& pool, const GeneratorConfig& config, std::size_t n,
                              const std::string& name) {
    config.validate();
    if (n == 0) throw std::invalid_argument("batch_generate needs n >= 1");
    if (pool.empty()) throw std::invalid_argument("batch_generate needs a non-empty IN pool");
    const auto images = pool.images();
    GeneratedBatch out;
    out.dataset.manifest = {name, 0, pool.manifest.classes, pool.manifest.width, pool.manifest.height,
                            pool.manifest.channels, config.seed, Provenance::generated_boundary, {}};
    while (out.samples.size() < n) {
        Rng rng(derive_seed(config.seed, out.attempts++));
        try {
            GeneratedSample s = generate_boundary(ae, images, config, rng);
            out.dataset.samples.push_back({s.image, std::nullopt, DistributionLabel::out, name});
            out.samples.push_back(std::move(s));
        } catch (const GenerationError& e) {
            if (++out.failures > config.retry_budget) {
                throw GenerationError("retry budget of " + std::to_string(config.retry_budget) + " exhausted after " +
                                          std::to_string(out.samples.size()) + " of " + std::to_string(n) +
                                          " samples: " + e.what(),
                                      e.best_score(), e.iterations());
            }
        }
    }
    out.dataset.manifest.count = out.dataset.samples.size();
    return out;
}

}  // namespace nnwd
