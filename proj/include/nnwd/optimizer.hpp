#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "nnwd/network.hpp"

namespace nnwd {

enum class OptimizerKind { sgd_momentum, adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double momentum = 0.9;  // beta1 for adam
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment buffers keyed "<layer>.weight" / "<layer>.bias".
struct OptimizerState {
    OptimizerConfig config;
    std::uint64_t step = 0;
    std::map<std::string, Tensor> first;
    std::map<std::string, Tensor> second;

    explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
};

std::string param_key(std::size_t layer, bool bias);

/// sgd-momentum: v <- mu*v - lr*g, p <- p + v.
/// adam: bias-corrected first/second moments.
/// Throws NumericError naming the parameter key if any gradient is non-finite;
/// params and state are left untouched in that case.
void optimizer_step(OptimizerState& state, ParameterSet& params, const Gradients& grads);

/// One forward/backward/update cycle on a minibatch. Returns the loss before the update.
double fit_batch(const NetworkSpec& spec, ParameterSet& params, OptimizerState& state, const Tensor& inputs,
                 const Tensor& targets, LossKind loss_kind);

}  // namespace nnwd
