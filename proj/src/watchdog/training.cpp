#include "nnwd/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nnwd {

void TrainConfig::validate() const {
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw std::invalid_argument("validation fraction must lie in [0, 1)");
    }
}

void write_history_csv(std::ostream& out, const History& history) {
    out << "epoch,train_loss,val_loss,train_acc,val_acc\n";
    const auto old = out.precision(17);
    auto cell = [&](double v) {
        if (!std::isnan(v)) out << v;
    };
    for (const auto& r : history) {
        out << r.epoch << ',';
        cell(r.train_loss);
        out << ',';
        cell(r.val_loss);
        out << ',';
        cell(r.train_acc);
        out << ',';
        cell(r.val_acc);
        out << '\n';
    }
    out.precision(old);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

Split split_indices(std::size_t n, double validation_fraction, std::uint64_t seed) {
    auto idx = shuffled_indices(n, seed);
    const auto val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * validation_fraction));
    Split s;
    s.train.assign(idx.begin(), idx.end() - static_cast<std::ptrdiff_t>(val));
    s.validation.assign(idx.end() - static_cast<std::ptrdiff_t>(val), idx.end());
    return s;
}

History train_network(const NetworkSpec& spec, ParameterSet& params, const TrainConfig& config, LossKind loss_kind,
                      std::span<const std::size_t> train, const BatchBuilder& build, const EpochEvaluator& evaluate) {
    config.validate();
    if (config.epochs > 0 && train.empty()) throw std::invalid_argument("no training samples");
    OptimizerState state(config.optimizer);
    History history;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::uint64_t epoch_seed = derive_seed(config.seed, epoch);
        const auto order = shuffled_indices(train.size(), epoch_seed);
        double weighted = 0.0;
        std::vector<std::size_t> batch;
        for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
            batch.clear();
            for (std::size_t k = start; k < std::min(order.size(), start + config.batch_size); ++k) {
                batch.push_back(train[order[k]]);
            }
            Rng rng(derive_seed(epoch_seed, b + 1));
            const Minibatch mb = build(batch, rng);
            double value = 0.0;
            try {
                value = fit_batch(spec, params, state, mb.inputs, mb.targets, loss_kind);
            } catch (const NumericError& e) {
                throw DivergenceError(epoch, e.what());
            }
            if (!std::isfinite(value)) throw DivergenceError(epoch, "non-finite loss " + std::to_string(value));
            weighted += value * static_cast<double>(batch.size());
        }
        EpochRecord record;
        record.epoch = epoch;
        record.train_loss = weighted / static_cast<double>(train.size());
        if (evaluate) evaluate(params, record);
        if (!std::isnan(record.val_loss) && !std::isfinite(record.val_loss)) {
            throw DivergenceError(epoch, "non-finite validation loss");
        }
        history.push_back(record);
    }
    params.epochs = static_cast<std::uint32_t>(params.epochs + config.epochs);
    return history;
}

Tensor predict_chunked(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch, std::size_t chunk) {
    if (batch.rank() != 2) throw ShapeError("predict_chunked expects a [n, d] batch");
    const std::size_t n = batch.rows();
    const std::size_t d = batch.cols();
    if (n <= chunk) return predict(spec, params, batch);
    Buffer out;
    std::size_t out_cols = 0;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t rows = std::min(chunk, n - start);
        Buffer part(batch.values().begin() + static_cast<std::ptrdiff_t>(start * d),
                    batch.values().begin() + static_cast<std::ptrdiff_t>((start + rows) * d));
        const Tensor y = predict(spec, params, Tensor({rows, d}, std::move(part)));
        out_cols = y.size() / rows;
        out.insert(out.end(), y.values().begin(), y.values().end());
    }
    return Tensor({n, out_cols}, std::move(out));
}

}  // namespace nnwd
