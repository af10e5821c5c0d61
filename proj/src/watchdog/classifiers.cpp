#include "nnwd/classifiers.hpp"

#include <algorithm>
#include <stdexcept>

namespace nnwd {

namespace {

void check_input_size(const Model& model, const Image& image) {
    const auto in = model.spec.input_size();
    if (in && *in != image.size()) {
        throw ShapeError("image has " + std::to_string(image.size()) + " values but the network expects " +
                         std::to_string(*in));
    }
}

Tensor images_of(const Dataset& d, std::span<const std::size_t> idx) { return d.batch(idx); }

double binary_accuracy(const Tensor& p, const std::vector<double>& target, double threshold) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < target.size(); ++i) correct += (p[i] >= threshold) == (target[i] == 1.0);
    return static_cast<double>(correct) / static_cast<double>(target.size());
}

double multiclass_accuracy(const Tensor& p, const std::vector<double>& labels) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        correct += static_cast<double>(argmax(p.row(i))) == labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

BinaryClassifierConfig BinaryClassifierConfig::defaults(std::size_t input) {
    BinaryClassifierConfig c;
    c.spec = NetworkSpec::mlp({input, 128, 32, 1}, ActivationKind::relu, ActivationLayer{ActivationKind::sigmoid});
    c.train.epochs = 20;
    c.train.batch_size = 64;
    c.train.seed = 3;
    return c;
}

void BinaryClassifierConfig::validate() const {
    spec.validate();
    train.validate();
    if (spec.output_size() != std::optional<std::size_t>(1)) throw std::invalid_argument("binary classifier must have one output");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("tier-2 threshold must lie in [0, 1]");
    if (train.batch_size < 2) throw std::invalid_argument("balanced batches need a batch size of at least 2");
}

CoreClassifierConfig CoreClassifierConfig::defaults(std::size_t input, std::size_t classes) {
    CoreClassifierConfig c;
    c.spec = NetworkSpec::mlp({input, 256, 64, classes}, ActivationKind::relu, SoftmaxLayer{});
    c.train.epochs = 15;
    c.train.batch_size = 64;
    c.train.seed = 4;
    c.augmentation = AugmentationSpec::standard();
    return c;
}

std::size_t CoreClassifierConfig::classes() const { return spec.output_size().value_or(0); }

void CoreClassifierConfig::validate() const {
    spec.validate();
    train.validate();
    augmentation.validate();
    if (spec.layers.empty() || !std::holds_alternative<SoftmaxLayer>(spec.layers.back())) {
        throw std::invalid_argument("core classifier must end in softmax");
    }
    if (classes() < 2) throw std::invalid_argument("core classifier needs at least two classes");
}

std::vector<std::pair<std::size_t, std::size_t>> balanced_pairs(std::size_t n_in, std::size_t n_generated,
                                                                 std::uint64_t seed) {
    const std::size_t n = std::min(n_in, n_generated);
    const auto in_idx = shuffled_indices(n_in, derive_seed(seed, 101));
    const auto gen_idx = shuffled_indices(n_generated, derive_seed(seed, 102));
    std::vector<std::pair<std::size_t, std::size_t>> out(n);
    for (std::size_t p = 0; p < n; ++p) out[p] = {in_idx[p], gen_idx[p]};
    return out;
}

ClassifierResult train_binary(const Dataset& in_set, const Dataset& generated_set, const BinaryClassifierConfig& config) {
    config.validate();
    if (in_set.empty() || generated_set.empty()) throw std::invalid_argument("binary training needs IN and generated samples");
    for (const auto& s : in_set.samples) {
        if (s.distribution != DistributionLabel::in) throw std::invalid_argument("binary IN set contains OUT samples");
    }
    for (const auto& s : generated_set.samples) {
        if (s.distribution != DistributionLabel::out) throw std::invalid_argument("generated set contains IN samples");
    }
    if (generated_set.manifest.provenance != Provenance::generated_boundary) {
        throw std::invalid_argument("binary tier trains on generated-boundary data, got provenance " +
                                    to_string(generated_set.manifest.provenance));
    }

    const auto pairs = balanced_pairs(in_set.size(), generated_set.size(), config.train.seed);
    const Split split = split_indices(pairs.size(), config.train.validation_fraction, derive_seed(config.train.seed, 0));

    auto stack = [&](std::span<const std::size_t> pair_ids, std::vector<double>& target) {
        std::vector<const Image*> imgs;
        target.clear();
        for (auto p : pair_ids) {
            imgs.push_back(&in_set.samples[pairs[p].first].image);
            target.push_back(1.0);
            imgs.push_back(&generated_set.samples[pairs[p].second].image);
            target.push_back(0.0);
        }
        return images_to_batch(imgs);
    };
    std::vector<double> train_target, val_target;
    const Tensor train_x = stack(split.train, train_target);
    const auto& val_ids = split.validation.empty() ? split.train : split.validation;
    const Tensor val_x = stack(val_ids, val_target);
    const Tensor val_t({val_target.size(), 1}, val_target);

    ClassifierResult result;
    result.model.spec = config.spec;
    result.model.params = init_params(config.spec, config.train.seed);

    TrainConfig pair_config = config.train;
    pair_config.batch_size = std::max<std::size_t>(1, config.train.batch_size / 2);
    const BatchBuilder build = [&](std::span<const std::size_t> pair_ids, Rng&) {
        std::vector<double> t;
        Tensor x = stack(pair_ids, t);
        return Minibatch{std::move(x), Tensor({t.size(), 1}, t)};
    };
    const EpochEvaluator evaluate = [&](const ParameterSet& params, EpochRecord& r) {
        const Tensor pv = predict_chunked(config.spec, params, val_x);
        r.val_loss = loss(LossKind::binary_cross_entropy, pv, val_t);
        r.val_acc = binary_accuracy(pv, val_target, config.threshold);
        r.train_acc = binary_accuracy(predict_chunked(config.spec, params, train_x), train_target, config.threshold);
    };
    result.history =
        train_network(config.spec, result.model.params, pair_config, LossKind::binary_cross_entropy, split.train, build, evaluate);
    return result;
}

double binary_score(const Model& binary, const Image& image) {
    check_input_size(binary, image);
    return predict(binary.spec, binary.params, image_to_batch(image))[0];
}

std::vector<double> binary_scores(const Model& binary, const Dataset& dataset) {
    if (dataset.empty()) return {};
    check_input_size(binary, dataset.samples.front().image);
    return predict_chunked(binary.spec, binary.params, dataset.batch()).to_vector();
}

ClassifierResult train_core(const Dataset& train_set, const CoreClassifierConfig& config) {
    config.validate();
    if (train_set.empty()) throw std::invalid_argument("core training set is empty");
    const std::size_t k = config.classes();
    for (const auto& s : train_set.samples) {
        if (s.distribution != DistributionLabel::in || !s.class_label) {
            throw std::invalid_argument("core classifier trains on labeled IN data only");
        }
        if (*s.class_label < 0 || static_cast<std::size_t>(*s.class_label) >= k) {
            throw std::invalid_argument("class label " + std::to_string(*s.class_label) + " outside [0, " +
                                        std::to_string(k) + ")");
        }
    }
    const Split split = split_indices(train_set.size(), config.train.validation_fraction, derive_seed(config.train.seed, 0));
    auto labels_of = [&](std::span<const std::size_t> idx) {
        std::vector<double> out;
        for (auto i : idx) out.push_back(static_cast<double>(*train_set.samples[i].class_label));
        return out;
    };
    const auto& val_idx = split.validation.empty() ? split.train : split.validation;
    const Tensor val_x = images_of(train_set, val_idx);
    const auto val_labels = labels_of(val_idx);
    const Tensor val_t({val_labels.size()}, val_labels);
    const Tensor train_x = images_of(train_set, split.train);
    const auto train_labels = labels_of(split.train);

    ClassifierResult result;
    result.model.spec = config.spec;
    result.model.params = init_params(config.spec, config.train.seed);
    const BatchBuilder build = [&](std::span<const std::size_t> idx, Rng& rng) {
        std::vector<Image> augmented;
        augmented.reserve(idx.size());
        for (auto i : idx) augmented.push_back(augment(train_set.samples[i].image, config.augmentation, rng));
        std::vector<const Image*> ptrs;
        for (const auto& img : augmented) ptrs.push_back(&img);
        const auto labels = labels_of(idx);
        return Minibatch{images_to_batch(ptrs), Tensor({labels.size()}, labels)};
    };
    const EpochEvaluator evaluate = [&](const ParameterSet& params, EpochRecord& r) {
        const Tensor pv = predict_chunked(config.spec, params, val_x);
        r.val_loss = loss(LossKind::categorical_cross_entropy, pv, val_t);
        r.val_acc = multiclass_accuracy(pv, val_labels);
        r.train_acc = multiclass_accuracy(predict_chunked(config.spec, params, train_x), train_labels);
    };
    result.history = train_network(config.spec, result.model.params, config.train, LossKind::categorical_cross_entropy,
                                   split.train, build, evaluate);
    return result;
}

std::vector<double> classify(const Model& core, const Image& image) {
    check_input_size(core, image);
    return predict(core.spec, core.params, image_to_batch(image)).to_vector();
}

Tensor classify_all(const Model& core, const Dataset& dataset) {
    if (dataset.empty()) throw std::invalid_argument("classify_all on an empty dataset");
    check_input_size(core, dataset.samples.front().image);
    return predict_chunked(core.spec, core.params, dataset.batch());
}

std::size_t argmax(std::span<const double> probabilities) {
    if (probabilities.empty()) throw std::invalid_argument("argmax of an empty vector");
    return static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
}

double core_accuracy(const Model& core, const Dataset& dataset) {
    const Tensor p = classify_all(core, dataset);
    std::size_t correct = 0, total = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const auto& label = dataset.samples[i].class_label;
        if (!label) continue;
        ++total;
        correct += static_cast<int>(argmax(p.row(i))) == *label;
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

}  // namespace nnwd
