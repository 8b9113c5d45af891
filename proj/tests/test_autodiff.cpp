#include <array>
#include <utility>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "s2pd/nd/adam.hpp"
#include "s2pd/nd/layers.hpp"
#include "s2pd/nd/tape.hpp"

using namespace s2pd::nd;

TEST_CASE("backward of sum(x) is all ones") {
  Tape t;
  Var x = t.leaf(Tensor({2, 3}, {1, -2, 3, 0.5, 0, 7}), true);
  t.backward(t.sum(x));
  for (double g : t.grad(x).data) REQUIRE(g == 1.0);
}

TEST_CASE("backward of sum(x*x)/2 is x") {
  Tape t;
  Tensor xv({5}, {1.0, -2.0, 0.25, 3.0, -0.5});
  Var x = t.leaf(xv, true);
  Var loss = t.scale(t.sum(t.mul(x, x)), 0.5);
  t.backward(loss);
  REQUIRE(oracle::max_abs_diff(t.grad(x), xv) < 1e-12);
}

TEST_CASE("backward rejects non-scalar loss") {
  Tape t;
  Var x = t.leaf(Tensor::zeros({2, 2}), true);
  REQUIRE_THROWS_AS(t.backward(x), ShapeError);
}

TEST_CASE("frozen leaves receive no gradient") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {1, 2, 3}), true);
  Var w = t.leaf(Tensor({3}, {4, 5, 6}), false);
  t.backward(t.sum(t.mul(x, w)));
  REQUIRE(!t.grad(x).empty());
  REQUIRE(t.grad(w).empty());
}

TEST_CASE("sigmoid gradient at zero is 0.25 and matches finite differences") {
  Tape t;
  Var x = t.leaf(Tensor({1}, {0.0}), true);
  t.backward(t.sum(t.sigmoid(x)));
  REQUIRE(t.grad(x).data[0] == Catch::Approx(0.25).margin(1e-12));

  std::vector<double> buf{0.0};
  auto f = [&]() {
    Tape t2;
    return t2.value(t2.sum(t2.sigmoid(t2.leaf(Tensor({1}, buf))))).data[0];
  };
  REQUIRE(oracle::fd_check(buf, t.grad(x).data, f) < 1e-4);
}

namespace {

// Gradient check of a whole mini-network: x -> layer -> relu -> mse vs target.
// Checks d/dweights, d/dbias and d/dinput against central differences.
double layer_fd_worst(LayerKind kind, uint64_t seed) {
  Rng rng(seed);
  LayerParams lp = [&] {
    switch (kind) {
      case LayerKind::conv2d:
        return LayerParams::make_conv2d(2, 3, 3, 1 + int(rng.below(2)), 1);
      case LayerKind::deconv2d:
        return LayerParams::make_deconv2d(2, 3, 3, 1 + int(rng.below(2)), 1);
      default:
        return LayerParams::make_dense(6, 4);
    }
  }();
  lp.init_glorot(rng);

  Tensor x = kind == LayerKind::dense ? oracle::random_tensor({3, 6}, rng)
                                      : oracle::random_tensor({1, 2, 4, 4}, rng);
  Tensor target;

  auto forward = [&](const Tensor& xin) {
    Tape t;
    Var xi = t.leaf(xin, true);
    Var y = t.relu(lp.apply(t, xi));
    if (target.empty()) target = oracle::random_tensor(t.value(y).shape, rng);
    Var diff = t.sub(y, t.leaf(target));
    Var loss = t.scale(t.sum(t.mul(diff, diff)), 1.0 / double(t.value(y).size()));
    return std::pair<double, std::array<Tensor, 3>>(
        t.value(loss).data[0], [&] {
          t.backward(loss);
          lp.harvest_grads(t);
          return std::array<Tensor, 3>{lp.weights.grad, lp.bias.grad, t.grad(xi)};
        }());
  };

  auto [loss0, grads] = forward(x);
  (void)loss0;
  lp.clear_grads();

  auto eval = [&]() {
    Tape t;
    Var y = t.relu(lp.apply(t, t.leaf(x)));
    Var diff = t.sub(y, t.leaf(target));
    return t.value(t.scale(t.sum(t.mul(diff, diff)), 1.0 / double(t.value(y).size()))).data[0];
  };

  double worst = oracle::fd_check(lp.weights.value.data, grads[0].data, eval);
  worst = std::max(worst, oracle::fd_check(lp.bias.value.data, grads[1].data, eval));
  auto eval_x = [&]() {
    Tape t;
    Var y = t.relu(lp.apply(t, t.leaf(x)));
    Var diff = t.sub(y, t.leaf(target));
    return t.value(t.scale(t.sum(t.mul(diff, diff)), 1.0 / double(t.value(y).size()))).data[0];
  };
  worst = std::max(worst, oracle::fd_check(x.data, grads[2].data, eval_x));
  return worst;
}

}  // namespace

TEST_CASE("every layer kind passes finite-difference gradient checks") {
  // 12 seeds per kind here; the acceptance suite runs >=100 seeds total.
  for (uint64_t seed = 1; seed <= 12; ++seed) {
    CAPTURE(seed);
    REQUIRE(layer_fd_worst(LayerKind::conv2d, seed) < 1e-4);
    REQUIRE(layer_fd_worst(LayerKind::deconv2d, seed + 100) < 1e-4);
    REQUIRE(layer_fd_worst(LayerKind::dense, seed + 200) < 1e-4);
  }
}

TEST_CASE("exp op gradient matches finite differences") {
  Rng rng(5);
  Tensor x = oracle::random_tensor({6}, rng, -1.5, 1.5);
  Tape t;
  Var xi = t.leaf(x, true);
  t.backward(t.sum(t.exp(xi)));
  auto eval = [&]() {
    Tape t2;
    return t2.value(t2.sum(t2.exp(t2.leaf(x)))).data[0];
  };
  REQUIRE(oracle::fd_check(x.data, t.grad(xi).data, eval) < 1e-4);
}

TEST_CASE("reshape passes gradients through unchanged") {
  Tape t;
  Var x = t.leaf(Tensor({2, 2}, {1, 2, 3, 4}), true);
  Var y = t.reshape(x, {4});
  t.backward(t.sum(t.mul(y, y)));
  REQUIRE(t.grad(x).shape == Shape{2, 2});
  REQUIRE(t.grad(x).data == std::vector<double>{2, 4, 6, 8});
}
