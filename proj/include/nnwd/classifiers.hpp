#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nnwd/augment.hpp"
#include "nnwd/dataset.hpp"
#include "nnwd/model_io.hpp"
#include "nnwd/training.hpp"

namespace nnwd {

struct BinaryClassifierConfig {
    NetworkSpec spec;
    TrainConfig train;
    double threshold = 0.5;  // tier 2 passes iff p_in >= threshold

    /// input-128-32-1, relu hidden, sigmoid output.
    static BinaryClassifierConfig defaults(std::size_t input = 1024);
    void validate() const;
};

struct CoreClassifierConfig {
    NetworkSpec spec;
    TrainConfig train;
    AugmentationSpec augmentation;

    /// input-256-64-classes, relu hidden, softmax output.
    static CoreClassifierConfig defaults(std::size_t input = 1024, std::size_t classes = 10);
    void validate() const;
    std::size_t classes() const;
};

struct ClassifierResult {
    Model model;
    History history;
};

/// Seeded (IN index, generated index) pairs; the larger side is downsampled
/// so every index appears at most once. Minibatches are built from whole
/// pairs, so each holds exactly half of each label.
std::vector<std::pair<std::size_t, std::size_t>> balanced_pairs(std::size_t n_in, std::size_t n_generated,
                                                                 std::uint64_t seed);

/// Binary cross-entropy on IN (target 1) vs generated (target 0). The larger
/// side is downsampled with a seeded draw; every minibatch holds equal numbers
/// of each label.
ClassifierResult train_binary(const Dataset& in_set, const Dataset& generated_set, const BinaryClassifierConfig& config);

/// Sigmoid output p(IN).
double binary_score(const Model& binary, const Image& image);
std::vector<double> binary_scores(const Model& binary, const Dataset& dataset);

/// Categorical cross-entropy on augmented IN images with class labels.
ClassifierResult train_core(const Dataset& train_set, const CoreClassifierConfig& config);

/// Softmax probability vector of length K.
std::vector<double> classify(const Model& core, const Image& image);
/// [n, K] probabilities.
Tensor classify_all(const Model& core, const Dataset& dataset);
std::size_t argmax(std::span<const double> probabilities);

/// Fraction of IN samples whose argmax equals the class label.
double core_accuracy(const Model& core, const Dataset& dataset);

}  // namespace nnwd
