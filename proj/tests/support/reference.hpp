#pragma once

// Test-only reference implementations. They share no code with the library's
// numeric paths: plain loops, extended precision, direct textbook formulas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "nnwd/network.hpp"

namespace ref {

using Real = long double;
using Vec = std::vector<Real>;

inline Vec widen(std::span<const double> v) { return Vec(v.begin(), v.end()); }

/// Per-sample forward pass in extended precision.
inline Vec forward_sample(const nnwd::NetworkSpec& spec, const nnwd::ParameterSet& params, Vec x,
                          const std::function<Real(std::size_t, std::size_t, bool, std::size_t)>* override = nullptr) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& layer = spec.layers[i];
        if (auto d = std::get_if<nnwd::DenseLayer>(&layer)) {
            const auto& p = params.dense.at(i);
            Vec y(d->out);
            for (std::size_t o = 0; o < d->out; ++o) {
                Real acc = override ? (*override)(i, o, true, 0) : Real(p.bias[o]);
                for (std::size_t k = 0; k < d->in; ++k) {
                    const Real w = override ? (*override)(i, k * d->out + o, false, 0) : Real(p.weight[k * d->out + o]);
                    acc += x[k] * w;
                }
                y[o] = acc;
            }
            x = std::move(y);
        } else if (auto a = std::get_if<nnwd::ActivationLayer>(&layer)) {
            for (auto& v : x) {
                switch (a->kind) {
                    case nnwd::ActivationKind::relu: v = v > 0 ? v : 0; break;
                    case nnwd::ActivationKind::sigmoid: v = 1 / (1 + std::exp(-v)); break;
                    case nnwd::ActivationKind::tanh: v = std::tanh(v); break;
                }
            }
        } else if (std::holds_alternative<nnwd::SoftmaxLayer>(layer)) {
            Real total = 0;
            for (auto v : x) total += std::exp(v);
            for (auto& v : x) v = std::exp(v) / total;
        }
    }
    return x;
}

inline Real loss(nnwd::LossKind kind, const std::vector<Vec>& pred, const nnwd::Tensor& target) {
    const Real eps = nnwd::kLogClamp;
    Real total = 0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        for (std::size_t c = 0; c < pred[r].size(); ++c) {
            const Real p = pred[r][c];
            const Real t = target[r * pred[r].size() + c];
            const Real q = std::clamp(p, eps, 1 - eps);
            switch (kind) {
                case nnwd::LossKind::mse: total += (p - t) * (p - t); break;
                case nnwd::LossKind::categorical_cross_entropy: total -= t * std::log(q); break;
                case nnwd::LossKind::binary_cross_entropy: total -= t * std::log(q) + (1 - t) * std::log(1 - q); break;
            }
            ++n;
        }
    }
    return kind == nnwd::LossKind::mse ? total / Real(n) : total / Real(pred.size());
}

inline Real batch_loss(const nnwd::NetworkSpec& spec, const nnwd::ParameterSet& params, const std::vector<Vec>& batch,
                       const nnwd::Tensor& target, nnwd::LossKind kind) {
    std::vector<Vec> out;
    for (const auto& x : batch) out.push_back(forward_sample(spec, params, x));
    return loss(kind, out, target);
}

inline std::vector<Vec> rows_of(const nnwd::Tensor& t) {
    std::vector<Vec> rows;
    for (std::size_t r = 0; r < t.rows(); ++r) rows.push_back(widen(t.row(r)));
    return rows;
}

inline Real relative_error(Real analytic, Real numeric) {
    return std::abs(analytic - numeric) / std::max<Real>(1e-12L, std::abs(analytic) + std::abs(numeric));
}

/// Central differences of the extended-precision loss, compared against the
/// library's analytic gradients (parameters and input).
struct GradientAudit {
    double params = 0.0;
    double input = 0.0;
};

inline GradientAudit audit_gradients(const nnwd::NetworkSpec& spec, const nnwd::ParameterSet& params,
                                     const nnwd::Tensor& batch, const nnwd::Tensor& target, nnwd::LossKind kind,
                                     Real step = 1e-6L) {
    auto fwd = nnwd::forward(spec, params, batch);
    fwd.tape.attach_loss(kind, target);
    const auto grads = nnwd::backward(fwd.tape, true);

    GradientAudit audit;
    auto rows = rows_of(batch);
    // Perturb one parameter through the override hook so the library's
    // ParameterSet (double) is never touched.
    for (const auto& [layer, p] : params.dense) {
        for (int which = 0; which < 2; ++which) {
            const bool is_bias = which == 1;
            const auto& values = is_bias ? p.bias : p.weight;
            const auto& analytic = is_bias ? grads.dense.at(layer).bias : grads.dense.at(layer).weight;
            for (std::size_t idx = 0; idx < values.size(); ++idx) {
                auto eval = [&](Real delta) {
                    std::function<Real(std::size_t, std::size_t, bool, std::size_t)> hook =
                        [&](std::size_t l, std::size_t i, bool bias, std::size_t) -> Real {
                        const auto& src = bias ? params.dense.at(l).bias : params.dense.at(l).weight;
                        Real v = src[i];
                        if (l == layer && bias == is_bias && i == idx) v += delta;
                        return v;
                    };
                    std::vector<Vec> out;
                    for (const auto& x : rows) out.push_back(forward_sample(spec, params, x, &hook));
                    return loss(kind, out, target);
                };
                const Real numeric = (eval(step) - eval(-step)) / (2 * step);
                audit.params = std::max(audit.params, double(relative_error(analytic[idx], numeric)));
            }
        }
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            auto shifted = rows;
            shifted[r][c] += step;
            const Real plus = batch_loss(spec, params, shifted, target, kind);
            shifted[r][c] -= 2 * step;
            const Real minus = batch_loss(spec, params, shifted, target, kind);
            const Real numeric = (plus - minus) / (2 * step);
            audit.input =
                std::max(audit.input, double(relative_error((*grads.input)[r * rows[r].size() + c], numeric)));
        }
    }
    return audit;
}

/// Direct-formula SSIM of one window: explicit means, two-pass population
/// variances and covariance, product form.
inline Real window_ssim(const std::vector<Real>& x, const std::vector<Real>& y, Real c1, Real c2) {
    const Real n = Real(x.size());
    Real mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    Real vx = 0, vy = 0, cxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
        cxy += (x[i] - mx) * (y[i] - my);
    }
    vx /= n;
    vy /= n;
    cxy /= n;
    return ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

/// Mean of window_ssim over every stride-1 `window` x `window` placement of a
/// single-channel height x width image pair.
template <class Image>
Real ssim_brute_force(const Image& x, const Image& y, std::size_t height, std::size_t width, std::size_t window,
                      Real k1 = 0.01L, Real k2 = 0.03L, Real range = 1.0L) {
    const Real c1 = (k1 * range) * (k1 * range);
    const Real c2 = (k2 * range) * (k2 * range);
    Real total = 0;
    std::size_t count = 0;
    for (std::size_t top = 0; top + window <= height; ++top) {
        for (std::size_t left = 0; left + window <= width; ++left) {
            std::vector<Real> wx, wy;
            for (std::size_t r = top; r < top + window; ++r) {
                for (std::size_t c = left; c < left + window; ++c) {
                    wx.push_back(x[r * width + c]);
                    wy.push_back(y[r * width + c]);
                }
            }
            total += window_ssim(wx, wy, c1, c2);
            ++count;
        }
    }
    return total / Real(count);
}

/// Brute-force ROC: for every candidate threshold (+inf and each distinct
/// score) count the scores at or above it. Returns (threshold, fpr, tpr) rows
/// ordered by decreasing threshold.
struct RocRow {
    double threshold, fpr, tpr;
};

inline std::vector<RocRow> roc_brute_force(const std::vector<double>& scores, const std::vector<bool>& pos) {
    std::vector<double> thresholds(scores);
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.insert(thresholds.begin(), std::numeric_limits<double>::infinity());
    std::size_t p = 0;
    for (bool b : pos) p += b;
    const std::size_t n = pos.size() - p;
    std::vector<RocRow> rows;
    for (double t : thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) (pos[i] ? tp : fp) += 1;
        }
        rows.push_back({t, double(fp) / double(n), double(tp) / double(p)});
    }
    return rows;
}

/// Pairwise Mann-Whitney U / (P N), ties counted one half.
inline double mann_whitney_auc(const std::vector<double>& scores, const std::vector<bool>& pos) {
    std::uint64_t twice_u = 0, p = 0, n = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!pos[i]) continue;
        ++p;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (pos[j]) continue;
            twice_u += scores[i] > scores[j] ? 2 : scores[i] == scores[j] ? 1 : 0;
        }
    }
    n = scores.size() - p;
    return double(twice_u) / (2.0 * double(p) * double(n));
}

}  // namespace ref
