#include <doctest.h>

#include <cmath>
#include <numbers>

#include "nnwd/network.hpp"
#include "nnwd/rng.hpp"
#include "support/random_net.hpp"
#include "support/reference.hpp"

using namespace nnwd;
using namespace testnet;

namespace {

ParameterSet dense_params(std::size_t layer, Tensor w, Tensor b) {
    ParameterSet p;
    p.dense.emplace(layer, DenseParams{std::move(w), std::move(b)});
    return p;
}

}  // namespace

TEST_CASE("forward: identity and hand-computed dense layers") {
    SUBCASE("reshape-only spec is the identity") {
        NetworkSpec spec{{ReshapeLayer{{2, 3}}}};
        Rng rng(3);
        Tensor batch = random_tensor({4, 6}, rng);
        auto out = forward(spec, {}, batch).output;
        CHECK(out.shape() == Shape{4, 2, 3});
        CHECK(out.to_vector() == batch.to_vector());
    }
    SUBCASE("identity weights") {
        NetworkSpec spec{{DenseLayer{2, 2}}};
        auto params = dense_params(0, Tensor::from_rows({{1, 0}, {0, 1}}), Tensor({2}, 0.0));
        auto out = forward(spec, params, Tensor::from_rows({{3, 4}})).output;
        CHECK(out.to_vector() == std::vector<double>{3, 4});
    }
    SUBCASE("dense(2,1)") {
        NetworkSpec spec{{DenseLayer{2, 1}}};
        auto params = dense_params(0, Tensor::from_rows({{2}, {3}}), Tensor({1}, 1.0));
        CHECK(forward(spec, params, Tensor::from_rows({{1, 1}})).output[0] == 6.0);
    }
}

TEST_CASE("forward: shape errors name the layer") {
    NetworkSpec spec = NetworkSpec::mlp({4, 3, 2}, ActivationKind::relu, std::nullopt);
    auto params = init_params(spec, 1);
    try {
        forward(spec, params, Tensor({2, 5}));
        FAIL("expected a shape error");
    } catch (const LayerShapeError& e) {
        CHECK(e.layer() == 0);
    }
    NetworkSpec bad{{DenseLayer{4, 3}, ActivationLayer{}, DenseLayer{2, 2}}};
    try {
        bad.validate();
        FAIL("expected a shape error");
    } catch (const LayerShapeError& e) {
        CHECK(e.layer() == 2);
    }
    NetworkSpec early_softmax{{DenseLayer{2, 2}, SoftmaxLayer{}, DenseLayer{2, 2}}};
    CHECK_THROWS_AS(early_softmax.validate(), LayerShapeError);
}

TEST_CASE("spec text round trip") {
    NetworkSpec spec{{ReshapeLayer{{4}}, DenseLayer{4, 3}, ActivationLayer{ActivationKind::tanh}, DenseLayer{3, 2},
                      SoftmaxLayer{}}};
    CHECK(NetworkSpec::from_text(spec.to_text()) == spec);
    CHECK_THROWS_AS(NetworkSpec::from_text("dense 4 3\nwobble\n"), LayerShapeError);
}

TEST_CASE("loss values") {
    Rng rng(5);
    Tensor x = random_tensor({3, 4}, rng);
    CHECK(loss(LossKind::mse, x, x) == 0.0);

    Tensor uniform({1, 4}, 0.25);
    Tensor hot({1, 4});
    hot[2] = 1.0;
    CHECK(loss(LossKind::categorical_cross_entropy, uniform, hot) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(loss(LossKind::categorical_cross_entropy, uniform, Tensor({1}, 2.0)) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(loss(LossKind::binary_cross_entropy, Tensor({1, 1}, 0.5), Tensor({1, 1}, 1.0)) ==
          doctest::Approx(std::numbers::ln2).epsilon(1e-12));

    // Clamp keeps log(0) finite.
    Tensor zero({1, 2}, 0.0);
    zero[1] = 1.0;
    Tensor first({1, 2});
    first[0] = 1.0;
    CHECK(loss(LossKind::categorical_cross_entropy, zero, first) ==
          doctest::Approx(-std::log(kLogClamp)).epsilon(1e-12));
}

TEST_CASE("loss errors") {
    CHECK_THROWS_AS(loss(LossKind::mse, Tensor({2, 2}), Tensor({2, 3})), ShapeError);
    Tensor bad({1, 2});
    bad[0] = std::nan("");
    CHECK_THROWS_AS(loss(LossKind::mse, bad, Tensor({1, 2})), NumericError);
    CHECK_THROWS_AS(loss(LossKind::categorical_cross_entropy, Tensor({1, 3}, 0.3), Tensor({1, 3}, 0.5)), ShapeError);
    CHECK_THROWS_AS(loss(LossKind::categorical_cross_entropy, Tensor({1, 3}, 0.3), Tensor({1}, 3.0)), ShapeError);
}

TEST_CASE("backward: chain rule by hand") {
    // loss = mean((w*x)^2), w = 2, x = 3  ->  dL/dw = 2*(w*x)*x = 36, dL/dx = 2*(w*x)*w = 24
    NetworkSpec spec{{DenseLayer{1, 1}}};
    auto params = dense_params(0, Tensor({1, 1}, 2.0), Tensor({1}, 0.0));
    auto fwd = forward(spec, params, Tensor({1, 1}, 3.0));
    CHECK(fwd.tape.attach_loss(LossKind::mse, Tensor({1, 1}, 0.0)) == 36.0);
    auto grads = backward(fwd.tape, true);
    CHECK(grads.dense.at(0).weight[0] == 36.0);
    CHECK(grads.dense.at(0).bias[0] == 12.0);
    CHECK((*grads.input)[0] == 24.0);
}

TEST_CASE("backward: parameter-free path yields zero gradients") {
    NetworkSpec spec{{ReshapeLayer{{3}}, ActivationLayer{ActivationKind::tanh}}};
    auto fwd = forward(spec, {}, Tensor({2, 3}, 0.5));
    fwd.tape.attach_loss(LossKind::mse, Tensor({2, 3}, 0.0));
    auto grads = backward(fwd.tape);
    CHECK(grads.dense.empty());
    CHECK(grad_check(spec, {}, Tensor({2, 3}, 0.5), Tensor({2, 3}, 0.0), LossKind::mse, 1e-6) == 0.0);
}

TEST_CASE("backward needs a terminated tape") {
    NetworkSpec spec{{DenseLayer{2, 1}}};
    auto params = init_params(spec, 1);
    auto fwd = forward(spec, params, Tensor({1, 2}, 1.0));
    CHECK_THROWS_AS(backward(fwd.tape), TapeError);
}

TEST_CASE("tape replay reproduces the loss exactly") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto inst = random_instance(seed);
        auto fwd = forward(inst.spec, inst.params, inst.batch);
        const double value = fwd.tape.attach_loss(inst.loss, inst.target);
        CHECK(fwd.tape.replay() == value);
    }
}

TEST_CASE("grad_check: linear model and two-layer relu net") {
    Rng rng(11);
    NetworkSpec linear{{DenseLayer{3, 2}}};
    auto lp = init_params(linear, 2);
    CHECK(grad_check(linear, lp, random_tensor({5, 3}, rng), random_tensor({5, 2}, rng), LossKind::mse, 1e-6) < 1e-9);

    NetworkSpec relu_net = NetworkSpec::mlp({4, 6, 3}, ActivationKind::relu, std::nullopt);
    auto rp = init_params(relu_net, 3);
    CHECK(grad_check(relu_net, rp, random_tensor({4, 4}, rng), random_tensor({4, 3}, rng), LossKind::mse, 1e-6) <
          1e-6);
}

TEST_CASE("property: analytic gradients match central differences on random instances") {
    // Oracle: extended-precision reference forward pass, step 1e-6.
    double worst = 0.0;
    for (std::uint64_t seed = 100; seed < 220; ++seed) {
        auto inst = random_instance(seed);
        const auto audit = ref::audit_gradients(inst.spec, inst.params, inst.batch, inst.target, inst.loss);
        INFO("seed " << seed << " spec\n" << inst.spec.to_text());
        CHECK(audit.params < 1e-6);
        CHECK(audit.input < 1e-6);
        worst = std::max({worst, audit.params, audit.input});
    }
    MESSAGE("worst relative error " << worst);
}

TEST_CASE("property: softmax rows are probability vectors") {
    Rng rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 2 + rng.below(9);
        NetworkSpec spec = NetworkSpec::mlp({5, k}, ActivationKind::relu, SoftmaxLayer{});
        auto params = init_params(spec, static_cast<std::uint64_t>(trial));
        for (auto& [_, p] : params.dense) {
            for (double& w : p.weight.values()) w *= 20.0;
        }
        Tensor out = predict(spec, params, random_tensor({3, 5}, rng, 3.0));
        for (std::size_t r = 0; r < out.rows(); ++r) {
            double total = 0.0;
            for (double v : out.row(r)) {
                CHECK(v >= 0.0);
                total += v;
            }
            CHECK(std::abs(total - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("property: forward is pure") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto inst = random_instance(seed);
        CHECK(predict(inst.spec, inst.params, inst.batch) == predict(inst.spec, inst.params, inst.batch));
        CHECK(forward(inst.spec, inst.params, inst.batch).output == predict(inst.spec, inst.params, inst.batch));
    }
}

TEST_CASE("init_params is seeded Glorot uniform") {
    NetworkSpec spec = NetworkSpec::mlp({30, 20, 10}, ActivationKind::relu, std::nullopt);
    auto a = init_params(spec, 9);
    CHECK(a == init_params(spec, 9));
    CHECK_FALSE(a == init_params(spec, 10));
    const double limit = std::sqrt(6.0 / 50.0);
    for (double w : a.dense.at(0).weight.values()) CHECK(std::abs(w) <= limit);
    for (double b : a.dense.at(0).bias.values()) CHECK(b == 0.0);
    CHECK_NOTHROW(check_params(spec, a));
    a.dense.at(2).bias = Tensor({3});
    CHECK_THROWS_AS(check_params(spec, a), LayerShapeError);
}
