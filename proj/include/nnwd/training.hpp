#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <span>
#include <vector>

#include "nnwd/network.hpp"
#include "nnwd/optimizer.hpp"
#include "nnwd/rng.hpp"

namespace nnwd {

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    OptimizerConfig optimizer;
    std::uint64_t seed = 1;
    double validation_fraction = 0.1;  // tail of the seeded shuffle held out

    /// Throws std::invalid_argument for a zero batch size, a non-positive
    /// learning rate or a validation fraction outside [0, 1).
    void validate() const;
};

/// Loss became non-finite (or a gradient did) during the given 1-based epoch.
class DivergenceError : public NumericError {
public:
    DivergenceError(std::size_t epoch, const std::string& what)
        : NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

/// Accuracy columns are NaN where a trainer does not measure them.
struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double train_acc = std::numeric_limits<double>::quiet_NaN();
    double val_acc = std::numeric_limits<double>::quiet_NaN();
};

using History = std::vector<EpochRecord>;

/// `epoch,train_loss,val_loss,train_acc,val_acc`; NaN cells are left empty.
void write_history_csv(std::ostream& out, const History& history);

/// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// Deterministic train/validation split of [0, n): the last
/// round(n * fraction) entries of a seeded shuffle are validation.
struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};
Split split_indices(std::size_t n, double validation_fraction, std::uint64_t seed);

struct Minibatch {
    Tensor inputs;
    Tensor targets;
};

/// Builds the minibatch for the given sample indices; `rng` is private to
/// (seed, epoch, batch) so augmentation is reproducible.
using BatchBuilder = std::function<Minibatch(std::span<const std::size_t> indices, Rng& rng)>;

/// Fills val_loss / accuracies of the record after each epoch.
using EpochEvaluator = std::function<void(const ParameterSet& params, EpochRecord& record)>;

/// Minibatch loop over `train` for config.epochs epochs. Records the
/// size-weighted mean pre-update batch loss per epoch. Throws DivergenceError.
History train_network(const NetworkSpec& spec, ParameterSet& params, const TrainConfig& config, LossKind loss_kind,
                      std::span<const std::size_t> train, const BatchBuilder& build,
                      const EpochEvaluator& evaluate = nullptr);

/// Forward pass in chunks of `chunk` rows to bound activation memory.
Tensor predict_chunked(const NetworkSpec& spec, const ParameterSet& params, const Tensor& batch,
                       std::size_t chunk = 256);

}  // namespace nnwd
