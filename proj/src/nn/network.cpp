#include "nnwd/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nnwd/rng.hpp"

namespace nnwd {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void softmax_rows(std::span<double> values, std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = values.subspan(r * cols, cols);
        const double peak = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double& v : row) {
            v = std::exp(v - peak);
            total += v;
        }
        for (double& v : row) v /= total;
    }
}

// Applies layer `index` to a flattened [rows, cols] activation.
Tensor apply_layer(const Layer& layer, std::size_t index, const ParameterSet& params, const Tensor& x) {
    const std::size_t rows = x.rows();
    return std::visit(
        Overloaded{
            [&](const DenseLayer& d) {
                if (x.cols() != d.in) {
                    throw LayerShapeError(index, "dense expects " + std::to_string(d.in) +
                                                     " inputs, got " + std::to_string(x.cols()));
                }
                const auto& p = params.dense.at(index);
                Tensor y({rows, d.out});
                MatrixMap out(y.data().data(), rows, d.out);
                out.noalias() = ConstMatrixMap(x.data().data(), rows, d.in) *
                                ConstMatrixMap(p.weight.data().data(), d.in, d.out);
                out.rowwise() += ConstVectorMap(p.bias.data().data(), d.out);
                return y;
            },
            [&](const ActivationLayer& a) {
                Tensor y = x;
                for (double& v : y.values()) {
                    switch (a.kind) {
                        case ActivationKind::relu: v = v > 0.0 ? v : 0.0; break;
                        case ActivationKind::sigmoid: v = sigmoid(v); break;
                        case ActivationKind::tanh: v = std::tanh(v); break;
                    }
                }
                return y;
            },
            [&](const SoftmaxLayer&) {
                Tensor y = x;
                softmax_rows(y.data(), rows, x.cols());
                return y;
            },
            [&](const ReshapeLayer& r) {
                if (shape_size(r.shape) != x.cols()) {
                    throw LayerShapeError(index, "reshape to " + shape_string(r.shape) + " from " +
                                                     std::to_string(x.cols()) + " elements");
                }
                return x;
            },
        },
        layer);
}

Tensor flatten_batch(const Tensor& batch) {
    if (batch.rank() < 1) throw ShapeError("batch needs a leading batch dimension");
    return batch.reshaped({batch.rows(), batch.cols()});
}

Tensor shaped_output(Tensor flat, const Shape& trailing) {
    Shape shape{flat.rows()};
    shape.insert(shape.end(), trailing.begin(), trailing.end());
    return flat.reshaped(std::move(shape));
}

Shape trailing_shape(const Tensor& batch) {
    if (batch.rank() < 2) return {batch.cols()};
    return Shape(batch.shape().begin() + 1, batch.shape().end());
}

void check_batch(const NetworkSpec& spec, const Tensor& batch) {
    if (auto in = spec.input_size(); in && batch.cols() != *in) {
        throw LayerShapeError(0, "network expects " + std::to_string(*in) + " inputs per sample, got " +
                                     std::to_string(batch.cols()));
    }
}

}  // namespace

LayerShapeError::LayerShapeError(std::size_t layer, const std::string& what)
    : ShapeError("layer " + std::to_string(layer) + ": " + what), layer_(layer) {}

std::string to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::relu: return "relu";
        case ActivationKind::sigmoid: return "sigmoid";
        case ActivationKind::tanh: return "tanh";
    }
    return "?";
}

std::string to_string(LossKind kind) {
    switch (kind) {
        case LossKind::mse: return "mse";
        case LossKind::categorical_cross_entropy: return "categorical-cross-entropy";
        case LossKind::binary_cross_entropy: return "binary-cross-entropy";
    }
    return "?";
}

void NetworkSpec::validate() const {
    std::optional<std::size_t> width;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        std::visit(Overloaded{
                       [&](const DenseLayer& d) {
                           if (d.in == 0 || d.out == 0) throw LayerShapeError(i, "dense sizes must be positive");
                           if (width && *width != d.in) {
                               throw LayerShapeError(i, "dense expects " + std::to_string(d.in) +
                                                            " inputs but previous layer yields " +
                                                            std::to_string(*width));
                           }
                           width = d.out;
                       },
                       [&](const ActivationLayer&) {},
                       [&](const SoftmaxLayer&) {
                           if (i + 1 != layers.size()) throw LayerShapeError(i, "softmax must be the final layer");
                       },
                       [&](const ReshapeLayer& r) {
                           if (r.shape.empty() || shape_size(r.shape) == 0) {
                               throw LayerShapeError(i, "reshape needs positive dimensions");
                           }
                           for (auto d : r.shape) {
                               if (d == 0) throw LayerShapeError(i, "reshape needs positive dimensions");
                           }
                           if (width && *width != shape_size(r.shape)) {
                               throw LayerShapeError(i, "reshape to " + shape_string(r.shape) + " from " +
                                                            std::to_string(*width) + " elements");
                           }
                           width = shape_size(r.shape);
                       },
                   },
                   layers[i]);
    }
}

std::optional<std::size_t> NetworkSpec::input_size() const {
    for (const auto& layer : layers) {
        if (auto d = std::get_if<DenseLayer>(&layer)) return d->in;
        if (auto r = std::get_if<ReshapeLayer>(&layer)) return shape_size(r->shape);
    }
    return std::nullopt;
}

std::optional<std::size_t> NetworkSpec::output_size() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        if (auto d = std::get_if<DenseLayer>(&*it)) return d->out;
        if (auto r = std::get_if<ReshapeLayer>(&*it)) return shape_size(r->shape);
    }
    return std::nullopt;
}

Shape NetworkSpec::output_shape(const Shape& input_shape) const {
    Shape shape = input_shape;
    for (const auto& layer : layers) {
        if (auto d = std::get_if<DenseLayer>(&layer)) shape = {d->out};
        if (auto r = std::get_if<ReshapeLayer>(&layer)) shape = r->shape;
    }
    return shape;
}

std::size_t NetworkSpec::dense_count() const {
    return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const Layer& l) {
        return std::holds_alternative<DenseLayer>(l);
    }));
}

std::string NetworkSpec::to_text() const {
    std::ostringstream out;
    for (const auto& layer : layers) {
        std::visit(Overloaded{
                       [&](const DenseLayer& d) { out << "dense " << d.in << ' ' << d.out; },
                       [&](const ActivationLayer& a) { out << to_string(a.kind); },
                       [&](const SoftmaxLayer&) { out << "softmax"; },
                       [&](const ReshapeLayer& r) {
                           out << "reshape";
                           for (auto d : r.shape) out << ' ' << d;
                       },
                   },
                   layer);
        out << '\n';
    }
    return out.str();
}

NetworkSpec NetworkSpec::from_text(const std::string& text) {
    NetworkSpec spec;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        const std::size_t index = spec.layers.size();
        if (kind == "dense") {
            DenseLayer d;
            if (!(fields >> d.in >> d.out)) throw LayerShapeError(index, "malformed dense line: " + line);
            spec.layers.emplace_back(d);
        } else if (kind == "relu") {
            spec.layers.emplace_back(ActivationLayer{ActivationKind::relu});
        } else if (kind == "sigmoid") {
            spec.layers.emplace_back(ActivationLayer{ActivationKind::sigmoid});
        } else if (kind == "tanh") {
            spec.layers.emplace_back(ActivationLayer{ActivationKind::tanh});
        } else if (kind == "softmax") {
            spec.layers.emplace_back(SoftmaxLayer{});
        } else if (kind == "reshape") {
            ReshapeLayer r;
            std::size_t d;
            while (fields >> d) r.shape.push_back(d);
            spec.layers.emplace_back(std::move(r));
        } else {
            throw LayerShapeError(index, "unknown layer kind '" + kind + "'");
        }
    }
    spec.validate();
    return spec;
}

NetworkSpec NetworkSpec::mlp(const std::vector<std::size_t>& widths, ActivationKind hidden,
                             std::optional<Layer> head) {
    if (widths.size() < 2) throw ShapeError("mlp needs at least input and output widths");
    NetworkSpec spec;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        spec.layers.emplace_back(DenseLayer{widths[i], widths[i + 1]});
        if (i + 2 < widths.size()) spec.layers.emplace_back(ActivationLayer{hidden});
    }
    if (head) spec.layers.push_back(*head);
    spec.validate();
    return spec;
}

std::size_t ParameterSet::value_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : dense) n += p.weight.size() + p.bias.size();
    return n;
}

ParameterSet init_params(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParameterSet params;
    params.seed = seed;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto* d = std::get_if<DenseLayer>(&spec.layers[i]);
        if (!d) continue;
        Rng rng(derive_seed(seed, i));
        const double limit = std::sqrt(6.0 / static_cast<double>(d->in + d->out));
        DenseParams p{Tensor({d->in, d->out}), Tensor({d->out})};
        for (double& w : p.weight.values()) w = rng.uniform(-limit, limit);
        params.dense.emplace(i, std::move(p));
    }
    return params;
}

void check_params(const NetworkSpec& spec, const ParameterSet& params) {
    std::size_t seen = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto* d = std::get_if<DenseLayer>(&spec.layers[i]);
        if (!d) continue;
        auto it = params.dense.find(i);
        if (it == params.dense.end()) throw LayerShapeError(i, "missing parameters for dense layer");
        if (it->second.weight.shape() != Shape{d->in, d->out} || it->second.bias.shape() != Shape{d->out}) {
            throw LayerShapeError(i, "parameter shapes " + shape_string(it->second.weight.shape()) + "/" +
                                         shape_string(it->second.bias.shape()) + " do not match dense(" +
                                         std::to_string(d->in) + "," + std::to_string(d->out) + ")");
        }
        ++seen;
    }
    if (seen != params.dense.size()) throw ShapeError("parameter set has entries for non-dense layers");
}

ForwardResult forward(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch) {
    check_batch(spec, batch);
    ForwardResult result;
    auto& tape = result.tape;
    tape.spec_ = &spec;
    tape.params_ = &params;
    tape.output_shape_ = spec.output_shape(trailing_shape(batch));
    tape.activations_.reserve(spec.layers.size() + 1);
    tape.activations_.push_back(flatten_batch(batch));
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        tape.activations_.push_back(apply_layer(spec.layers[i], i, params, tape.activations_.back()));
    }
    result.output = shaped_output(tape.activations_.back(), tape.output_shape_);
    if (!result.output.all_finite()) throw NumericError("forward produced non-finite activations");
    return result;
}

Tensor predict(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch) {
    check_batch(spec, batch);
    Tensor x = flatten_batch(batch);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) x = apply_layer(spec.layers[i], i, params, x);
    Tensor out = shaped_output(std::move(x), spec.output_shape(trailing_shape(batch)));
    if (!out.all_finite()) throw NumericError("forward produced non-finite activations");
    return out;
}

double GradientTape::attach_loss(LossKind kind, const Tensor& target) {
    const Tensor out = shaped_output(activations_.back(), output_shape_);
    auto result = loss_with_grad(kind, out, target);
    seed_ = result.grad.reshaped({out.rows(), out.cols()});
    loss_ = std::make_pair(kind, target);
    loss_value_ = result.value;
    return result.value;
}

void GradientTape::attach_output_gradient(Tensor grad, double value) {
    if (grad.size() != activations_.back().size()) {
        throw ShapeError("output gradient has " + std::to_string(grad.size()) + " values, output has " +
                         std::to_string(activations_.back().size()));
    }
    seed_ = grad.reshaped(activations_.back().shape());
    loss_.reset();
    loss_value_ = value;
}

double GradientTape::replay() const {
    if (!loss_) throw TapeError("tape has no recorded loss to replay");
    const Tensor out = predict(*spec_, *params_, activations_.front().reshaped(activations_.front().shape()));
    return loss(loss_->first, out.reshaped(shaped_output(activations_.back(), output_shape_).shape()),
                loss_->second);
}

Gradients backward(const GradientTape& tape, bool with_input_grad) {
    if (!tape.seed_) throw TapeError("backward needs a tape terminated in a scalar");
    const auto& spec = *tape.spec_;
    const auto& params = *tape.params_;
    Gradients grads;
    Tensor upstream = *tape.seed_;
    for (std::size_t k = spec.layers.size(); k-- > 0;) {
        const Tensor& x = tape.activations_[k];
        const Tensor& y = tape.activations_[k + 1];
        const std::size_t rows = x.rows();
        const bool need_input = with_input_grad || k > 0;
        std::visit(Overloaded{
                       [&](const DenseLayer& d) {
                           const auto& p = params.dense.at(k);
                           ConstMatrixMap dy(upstream.data().data(), rows, d.out);
                           DenseParams g{Tensor({d.in, d.out}), Tensor({d.out})};
                           MatrixMap(g.weight.data().data(), d.in, d.out).noalias() =
                               ConstMatrixMap(x.data().data(), rows, d.in).transpose() * dy;
                           Eigen::Map<Eigen::RowVectorXd>(g.bias.data().data(), d.out) = dy.colwise().sum();
                           if (need_input) {
                               Tensor dx({rows, d.in});
                               MatrixMap(dx.data().data(), rows, d.in).noalias() =
                                   dy * ConstMatrixMap(p.weight.data().data(), d.in, d.out).transpose();
                               upstream = std::move(dx);
                           }
                           grads.dense.emplace(k, std::move(g));
                       },
                       [&](const ActivationLayer& a) {
                           auto& g = upstream.values();
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               switch (a.kind) {
                                   case ActivationKind::relu: g[i] = x[i] > 0.0 ? g[i] : 0.0; break;
                                   case ActivationKind::sigmoid: g[i] *= y[i] * (1.0 - y[i]); break;
                                   case ActivationKind::tanh: g[i] *= 1.0 - y[i] * y[i]; break;
                               }
                           }
                       },
                       [&](const SoftmaxLayer&) {
                           const std::size_t cols = y.cols();
                           for (std::size_t r = 0; r < rows; ++r) {
                               auto g = upstream.row(r);
                               auto s = y.row(r);
                               double dot = 0.0;
                               for (std::size_t c = 0; c < cols; ++c) dot += g[c] * s[c];
                               for (std::size_t c = 0; c < cols; ++c) g[c] = s[c] * (g[c] - dot);
                           }
                       },
                       [&](const ReshapeLayer&) {},
                   },
                   spec.layers[k]);
    }
    if (with_input_grad) grads.input = upstream.reshaped(tape.activations_.front().shape());
    return grads;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
}

double grad_check(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch,
                  const Tensor& target, LossKind loss_kind, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grad_check step must be positive");
    auto fwd = forward(spec, params, batch);
    fwd.tape.attach_loss(loss_kind, target);
    const Gradients analytic = backward(fwd.tape);

    ParameterSet probe = params;
    auto eval = [&] { return loss(loss_kind, predict(spec, probe, batch), target); };
    double worst = 0.0;
    for (auto& [index, p] : probe.dense) {
        const auto& g = analytic.dense.at(index);
        auto sweep = [&](Tensor& values, const Tensor& grad) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                const double saved = values[i];
                values[i] = saved + step;
                const double plus = eval();
                values[i] = saved - step;
                const double minus = eval();
                values[i] = saved;
                worst = std::max(worst, relative_error(grad[i], (plus - minus) / (2.0 * step)));
            }
        };
        sweep(p.weight, g.weight);
        sweep(p.bias, g.bias);
    }
    return worst;
}

double grad_check_input(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch,
                        const Tensor& target, LossKind loss_kind, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("grad_check step must be positive");
    auto fwd = forward(spec, params, batch);
    fwd.tape.attach_loss(loss_kind, target);
    const Gradients analytic = backward(fwd.tape, true);

    Tensor probe = batch;
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + step;
        const double plus = loss(loss_kind, predict(spec, params, probe), target);
        probe[i] = saved - step;
        const double minus = loss(loss_kind, predict(spec, params, probe), target);
        probe[i] = saved;
        worst = std::max(worst, relative_error((*analytic.input)[i], (plus - minus) / (2.0 * step)));
    }
    return worst;
}

}  // namespace nnwd
