#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "nnwd/tensor.hpp"

namespace nnwd {

enum class ActivationKind { relu, sigmoid, tanh };

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ActivationLayer {
    ActivationKind kind = ActivationKind::relu;
    friend bool operator==(const ActivationLayer&, const ActivationLayer&) = default;
};

struct SoftmaxLayer {
    friend bool operator==(const SoftmaxLayer&, const SoftmaxLayer&) = default;
};

/// Reinterprets the per-sample trailing shape; element count must not change.
struct ReshapeLayer {
    Shape shape;
    friend bool operator==(const ReshapeLayer&, const ReshapeLayer&) = default;
};

using Layer = std::variant<DenseLayer, ActivationLayer, SoftmaxLayer, ReshapeLayer>;

/// Shape error raised while building or running a network. Carries the index
/// of the layer at which the mismatch was detected.
class LayerShapeError : public ShapeError {
public:
    LayerShapeError(std::size_t layer, const std::string& what);
    std::size_t layer() const { return layer_; }

private:
    std::size_t layer_;
};

/// Ordered layer list of a feed-forward network.
struct NetworkSpec {
    std::vector<Layer> layers;

    /// Throws LayerShapeError when adjacent layers disagree or softmax is not last.
    void validate() const;

    /// Per-sample input element count, if any layer pins it.
    std::optional<std::size_t> input_size() const;
    /// Per-sample output element count, if any layer pins it.
    std::optional<std::size_t> output_size() const;
    /// Trailing output shape for a given trailing input shape.
    Shape output_shape(const Shape& input_shape) const;

    std::size_t dense_count() const;

    /// One layer per line: `dense 4 3`, `relu`, `sigmoid`, `tanh`, `softmax`, `reshape 32 32`.
    std::string to_text() const;
    static NetworkSpec from_text(const std::string& text);

    /// Dense stack with `hidden` activations between layers and an optional head.
    static NetworkSpec mlp(const std::vector<std::size_t>& widths, ActivationKind hidden,
                           std::optional<Layer> head);

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

std::string to_string(ActivationKind kind);

struct DenseParams {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]
    friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

/// Trained weights of one network. Keys are layer indices into NetworkSpec::layers.
struct ParameterSet {
    std::map<std::size_t, DenseParams> dense;
    std::uint64_t seed = 0;
    std::uint32_t epochs = 0;

    std::size_t value_count() const;
    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;
};

/// Scaled uniform (Glorot) initialization, zero biases.
ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Throws LayerShapeError if `params` does not fit `spec` exactly.
void check_params(const NetworkSpec& spec, const ParameterSet& params);

/// Gradient of a scalar with respect to every dense parameter, and
/// optionally with respect to the network input.
struct Gradients {
    std::map<std::size_t, DenseParams> dense;
    std::optional<Tensor> input;
};

enum class LossKind { mse, categorical_cross_entropy, binary_cross_entropy };

std::string to_string(LossKind kind);

/// Probabilities are clamped into [kLogClamp, 1 - kLogClamp] before any log.
inline constexpr double kLogClamp = 1e-12;

struct LossResult {
    double value = 0.0;
    Tensor grad;  // d(value)/d(prediction)
};

double loss(LossKind kind, const Tensor& prediction, const Tensor& target);
LossResult loss_with_grad(LossKind kind, const Tensor& prediction, const Tensor& target);

struct ForwardResult;

class TapeError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Record of one forward pass. Holds every intermediate activation and
/// references (not copies) of the spec and parameters, which must outlive it.
class GradientTape {
public:
    const Tensor& output() const { return activations_.back(); }
    const Tensor& input() const { return activations_.front(); }
    const std::vector<Tensor>& activations() const { return activations_; }

    /// Terminates the tape in a scalar loss and returns its value.
    double attach_loss(LossKind kind, const Tensor& target);
    /// Terminates the tape with an externally computed d(scalar)/d(output).
    void attach_output_gradient(Tensor grad, double value);

    bool terminated() const { return seed_.has_value(); }
    double loss_value() const { return loss_value_; }

    /// Re-runs the recorded forward pass and loss; equals loss_value() exactly.
    double replay() const;

private:
    friend ForwardResult forward(const NetworkSpec&, const ParameterSet&, const Tensor&);
    friend Gradients backward(const GradientTape&, bool);

    const NetworkSpec* spec_ = nullptr;
    const ParameterSet* params_ = nullptr;
    Shape output_shape_;
    std::vector<Tensor> activations_;  // [0] = flattened input, [i + 1] = output of layer i
    std::optional<Tensor> seed_;
    std::optional<std::pair<LossKind, Tensor>> loss_;
    double loss_value_ = 0.0;
};

struct ForwardResult {
    Tensor output;
    GradientTape tape;
};

ForwardResult forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch);

/// Forward pass without keeping a tape.
Tensor predict(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch);

/// Reverse sweep over a terminated tape.
Gradients backward(const GradientTape& tape, bool with_input_grad = false);

/// Max over all parameters of |analytic - numeric| / max(1e-12, |analytic| + |numeric|),
/// numeric by central differences of width `step`. Zero when there are no parameters.
double grad_check(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch,
                  const Tensor& target, LossKind loss_kind, double step);

/// Same measure for d(loss)/d(input).
double grad_check_input(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch,
                        const Tensor& target, LossKind loss_kind, double step);

/// The relative error measure used by both checks.
double relative_error(double analytic, double numeric);

}  // namespace nnwd
