#include "nnwd/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace nnwd {

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::adam ? "adam" : "sgd-momentum";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "sgd-momentum" || name == "sgd") return OptimizerKind::sgd_momentum;
    throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::string param_key(std::size_t layer, bool bias) {
    return std::to_string(layer) + (bias ? ".bias" : ".weight");
}

namespace {

void update(OptimizerState& state, const std::string& key, Tensor& param, const Tensor& grad) {
    if (grad.shape() != param.shape()) {
        throw ShapeError("gradient " + key + " has shape " + shape_string(grad.shape()) + ", parameter has " +
                         shape_string(param.shape()));
    }
    const auto& cfg = state.config;
    auto [first_it, _] = state.first.try_emplace(key, param.shape());
    Tensor& m = first_it->second;
    if (cfg.kind == OptimizerKind::sgd_momentum) {
        for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = cfg.momentum * m[i] - cfg.learning_rate * grad[i];
            param[i] += m[i];
        }
        return;
    }
    auto [second_it, __] = state.second.try_emplace(key, param.shape());
    Tensor& v = second_it->second;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(cfg.momentum, t);
    const double correction2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double g = grad[i];
        m[i] = cfg.momentum * m[i] + (1.0 - cfg.momentum) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        param[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

}  // namespace

void optimizer_step(OptimizerState& state, ParameterSet& params, const Gradients& grads) {
    for (const auto& [layer, g] : grads.dense) {
        if (!g.weight.all_finite()) throw NumericError("non-finite gradient for " + param_key(layer, false));
        if (!g.bias.all_finite()) throw NumericError("non-finite gradient for " + param_key(layer, true));
        if (!params.dense.contains(layer)) throw ShapeError("gradient for unknown layer " + std::to_string(layer));
    }
    ++state.step;
    for (const auto& [layer, g] : grads.dense) {
        auto& p = params.dense.at(layer);
        update(state, param_key(layer, false), p.weight, g.weight);
        update(state, param_key(layer, true), p.bias, g.bias);
    }
}

double fit_batch(const NetworkSpec& spec, ParameterSet& params, OptimizerState& state, const Tensor& inputs,
                 const Tensor& targets, LossKind loss_kind) {
    auto fwd = forward(spec, params, inputs);
    const double value = fwd.tape.attach_loss(loss_kind, targets);
    if (!std::isfinite(value)) throw NumericError("non-finite training loss");
    const Gradients grads = backward(fwd.tape);
    optimizer_step(state, params, grads);
    return value;
}

}  // namespace nnwd
