#include <algorithm>
#include <cmath>

#include "nnwd/network.hpp"

namespace nnwd {

namespace {

double clamp_probability(double p) { return std::clamp(p, kLogClamp, 1.0 - kLogClamp); }

bool inside_clamp(double p) { return p > kLogClamp && p < 1.0 - kLogClamp; }

// Expands class-index targets ([B] or [B,1] with K > 1 outputs) into one-hot rows
// and validates explicit one-hot rows.
Tensor one_hot_targets(const Tensor& prediction, const Tensor& target) {
    const std::size_t rows = prediction.rows();
    const std::size_t classes = prediction.cols();
    if (target.size() == prediction.size()) {
        for (std::size_t r = 0; r < rows; ++r) {
            auto row = target.row(r);
            std::size_t ones = 0;
            for (double v : row) {
                if (v == 1.0) {
                    ++ones;
                } else if (v != 0.0) {
                    throw ShapeError("categorical target row " + std::to_string(r) + " is not one-hot");
                }
            }
            if (ones != 1) throw ShapeError("categorical target row " + std::to_string(r) + " is not one-hot");
        }
        return target.reshaped({rows, classes});
    }
    if (target.size() != rows) {
        throw ShapeError("categorical target " + shape_string(target.shape()) + " does not fit prediction " +
                         shape_string(prediction.shape()));
    }
    Tensor hot({rows, classes});
    for (std::size_t r = 0; r < rows; ++r) {
        const double label = target[r];
        if (label < 0 || label >= static_cast<double>(classes) || label != std::floor(label)) {
            throw ShapeError("class index " + std::to_string(label) + " out of range for " +
                             std::to_string(classes) + " classes");
        }
        hot.at(r, static_cast<std::size_t>(label)) = 1.0;
    }
    return hot;
}

}  // namespace

LossResult loss_with_grad(LossKind kind, const Tensor& prediction, const Tensor& target) {
    if (prediction.empty()) throw ShapeError("loss of an empty prediction");
    if (!prediction.all_finite()) throw NumericError("loss: prediction contains non-finite values");
    const std::size_t rows = prediction.rows();
    LossResult result{0.0, Tensor(prediction.shape())};
    auto& grad = result.grad.values();
    const auto& p = prediction.values();

    switch (kind) {
        case LossKind::mse: {
            if (target.size() != prediction.size()) {
                throw ShapeError("mse: target " + shape_string(target.shape()) + " vs prediction " +
                                 shape_string(prediction.shape()));
            }
            const double n = static_cast<double>(p.size());
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double d = p[i] - target[i];
                total += d * d;
                grad[i] = 2.0 * d / n;
            }
            result.value = total / n;
            break;
        }
        case LossKind::categorical_cross_entropy: {
            const Tensor hot = one_hot_targets(prediction, target);
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                if (hot[i] == 0.0) continue;
                total -= hot[i] * std::log(clamp_probability(p[i]));
                grad[i] = inside_clamp(p[i]) ? -hot[i] / p[i] / static_cast<double>(rows) : 0.0;
            }
            result.value = total / static_cast<double>(rows);
            break;
        }
        case LossKind::binary_cross_entropy: {
            if (target.size() != prediction.size()) {
                throw ShapeError("binary-cross-entropy: target " + shape_string(target.shape()) +
                                 " vs prediction " + shape_string(prediction.shape()));
            }
            double total = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double t = target[i];
                if (t < 0.0 || t > 1.0) throw ShapeError("binary target outside [0, 1]");
                const double q = clamp_probability(p[i]);
                total -= t * std::log(q) + (1.0 - t) * std::log(1.0 - q);
                grad[i] = inside_clamp(p[i]) ? (-t / q + (1.0 - t) / (1.0 - q)) / static_cast<double>(rows) : 0.0;
            }
            result.value = total / static_cast<double>(rows);
            break;
        }
    }
    return result;
}

double loss(LossKind kind, const Tensor& prediction, const Tensor& target) {
    return loss_with_grad(kind, prediction, target).value;
}

}  // namespace nnwd
