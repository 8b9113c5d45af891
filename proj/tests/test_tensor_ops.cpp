#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "s2pd/nd/tape.hpp"

using namespace s2pd::nd;

TEST_CASE("conv2d identity kernel passes input through") {
  Tape t;
  Var x = t.leaf(Tensor::full({1, 1, 3, 3}, 1.0));
  Var w = t.leaf(Tensor({1, 1, 1, 1}, {1.0}));
  Var b = t.leaf(Tensor::zeros({1}));
  Var y = t.conv2d(x, w, b, 1, 0);
  REQUIRE(t.value(y).shape == Shape{1, 1, 3, 3});
  for (double v : t.value(y).data) REQUIRE(v == 1.0);
}

TEST_CASE("conv2d output spatial dims follow the shape formula") {
  Tape t;
  Var x = t.leaf(Tensor::zeros({1, 1, 4, 4}));
  Var w = t.leaf(Tensor::zeros({1, 1, 2, 2}));
  Var b = t.leaf(Tensor::zeros({1}));
  Var y = t.conv2d(x, w, b, 2, 0);
  REQUIRE(t.value(y).shape == Shape{1, 1, 2, 2});
}

TEST_CASE("conv2d matches the direct-loop oracle") {
  Rng rng(7);
  Tensor x = oracle::random_tensor({2, 3, 8, 8}, rng);
  Tensor w = oracle::random_tensor({4, 3, 3, 3}, rng);
  Tensor b = oracle::random_tensor({4}, rng);
  Tensor expect = oracle::conv2d(x, w, b, 1, 1);

  Tape t;
  Var y = t.conv2d(t.leaf(x), t.leaf(w), t.leaf(b), 1, 1);
  REQUIRE(t.value(y).shape == expect.shape);
  REQUIRE(oracle::max_abs_diff(t.value(y), expect) < 1e-9);
}

TEST_CASE("conv2d rejects channel mismatch with both shapes in the message") {
  Tape t;
  Var x = t.leaf(Tensor::zeros({1, 3, 4, 4}));
  Var w = t.leaf(Tensor::zeros({2, 4, 3, 3}));
  Var b = t.leaf(Tensor::zeros({2}));
  REQUIRE_THROWS_WITH(t.conv2d(x, w, b, 1, 0),
                      Catch::Matchers::ContainsSubstring("[1x3x4x4]") &&
                          Catch::Matchers::ContainsSubstring("[2x4x3x3]"));
}

TEST_CASE("deconv2d shape formula") {
  Tape t;
  Var x = t.leaf(Tensor::zeros({1, 1, 2, 2}));
  Var w = t.leaf(Tensor::zeros({1, 1, 2, 2}));
  Var b = t.leaf(Tensor::zeros({1}));
  Var y = t.deconv2d(x, w, b, 2, 0);
  REQUIRE(t.value(y).shape == Shape{1, 1, 4, 4});
}

TEST_CASE("deconv2d scalar case multiplies") {
  Tape t;
  Var x = t.leaf(Tensor({1, 1, 1, 1}, {3.0}));
  Var w = t.leaf(Tensor({1, 1, 1, 1}, {-2.5}));
  Var b = t.leaf(Tensor::zeros({1}));
  Var y = t.deconv2d(x, w, b, 1, 0);
  REQUIRE(t.value(y).data[0] == Catch::Approx(-7.5).margin(1e-12));
}

TEST_CASE("deconv2d matches the scatter oracle") {
  Rng rng(11);
  Tensor x = oracle::random_tensor({2, 4, 5, 5}, rng);
  Tensor w = oracle::random_tensor({4, 3, 4, 4}, rng);
  Tensor b = oracle::random_tensor({3}, rng);
  Tensor expect = oracle::deconv2d(x, w, b, 2, 1);

  Tape t;
  Var y = t.deconv2d(t.leaf(x), t.leaf(w), t.leaf(b), 2, 1);
  REQUIRE(t.value(y).shape == expect.shape);
  REQUIRE(oracle::max_abs_diff(t.value(y), expect) < 1e-9);
}

TEST_CASE("deconv2d is the adjoint of conv2d") {
  // <deconv(x, w), u> == <x, conv(u, w)> for the same kernel, with zero bias.
  Rng rng(13);
  Tensor x = oracle::random_tensor({1, 3, 4, 4}, rng);
  Tensor w = oracle::random_tensor({3, 2, 3, 3}, rng);  // [Cin, Cout, k, k]
  Tensor b2 = Tensor::zeros({2});
  Tensor b3 = Tensor::zeros({3});

  Tape t;
  Var y = t.deconv2d(t.leaf(x), t.leaf(w), t.leaf(b2), 2, 1);
  Tensor u = oracle::random_tensor(t.value(y).shape, rng);

  // conv with kernel w reinterpreted as [K=3 out, C=2 in, k, k] reversed:
  // the adjoint conv maps u back to x's shape using w[ci][co] as w'[co? ]...
  // Use the oracle conv with weights w' where w'[ci, co, ki, kj] = w[ci, co, ki, kj]
  // read as conv weights [K=Cin, C=Cout, k, k].
  Tensor wconv = Tensor::zeros({3, 2, 3, 3});
  wconv.data = w.data;  // identical buffer; layout [Cin,Cout,k,k] == conv [K,C,k,k]
  Tensor back = oracle::conv2d(u, wconv, b3, 2, 1);
  REQUIRE(back.shape == x.shape);

  double lhs = 0.0, rhs = 0.0;
  for (size_t i = 0; i < u.data.size(); ++i) lhs += t.value(y).data[i] * u.data[i];
  for (size_t i = 0; i < x.data.size(); ++i) rhs += x.data[i] * back.data[i];
  REQUIRE(lhs == Catch::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("dense identity") {
  Tape t;
  Tensor w = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0;
  Var x = t.leaf(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var y = t.dense(x, t.leaf(w), t.leaf(Tensor::zeros({3})));
  REQUIRE(t.value(y).data == std::vector<double>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("dense hand arithmetic") {
  Tape t;
  Var x = t.leaf(Tensor({1, 2}, {1, 2}));
  Var w = t.leaf(Tensor({2, 1}, {3, 4}));
  Var b = t.leaf(Tensor({1}, {0}));
  Var y = t.dense(x, w, b);
  REQUIRE(t.value(y).data[0] == Catch::Approx(11.0).margin(1e-12));
}

TEST_CASE("dense matches the double-loop oracle") {
  Rng rng(17);
  Tensor x = oracle::random_tensor({4, 7}, rng);
  Tensor w = oracle::random_tensor({7, 5}, rng);
  Tensor b = oracle::random_tensor({5}, rng);
  Tensor expect = oracle::dense(x, w, b);

  Tape t;
  Var y = t.dense(t.leaf(x), t.leaf(w), t.leaf(b));
  REQUIRE(oracle::max_abs_diff(t.value(y), expect) < 1e-9);
}

TEST_CASE("dense rejects fan-in mismatch") {
  Tape t;
  Var x = t.leaf(Tensor::zeros({2, 3}));
  Var w = t.leaf(Tensor::zeros({4, 2}));
  Var b = t.leaf(Tensor::zeros({2}));
  REQUIRE_THROWS_AS(t.dense(x, w, b), ShapeError);
}

TEST_CASE("activations: relu and sigmoid values") {
  Tape t;
  Var x = t.leaf(Tensor({3}, {-1.0, 2.0, 0.0}));
  REQUIRE(t.value(t.relu(x)).data == std::vector<double>{0.0, 2.0, 0.0});
  Var s = t.sigmoid(t.leaf(Tensor({1}, {0.0})));
  REQUIRE(t.value(s).data[0] == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("sigmoid output stays in (0,1) for extreme inputs") {
  Tape t;
  Var s = t.sigmoid(t.leaf(Tensor({4}, {-745.0, -50.0, 50.0, 745.0})));
  for (double v : t.value(s).data) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
    REQUIRE(std::isfinite(v));
  }
}

TEST_CASE("forward ops match oracles across random shapes") {
  // Randomized sweep over small shapes; the acceptance suite runs the wider
  // version of this with >=100 shapes.
  Rng rng(23);
  for (int iter = 0; iter < 25; ++iter) {
    const int N = 1 + int(rng.below(2)), C = 1 + int(rng.below(3));
    const int K = 1 + int(rng.below(3)), k = 1 + int(rng.below(3));
    const int H = k + int(rng.below(5)), W = k + int(rng.below(5));
    const int s = 1 + int(rng.below(2)), p = int(rng.below(2));
    Tensor x = oracle::random_tensor({N, C, H, W}, rng);
    Tensor w = oracle::random_tensor({K, C, k, k}, rng);
    Tensor b = oracle::random_tensor({K}, rng);
    Tape t;
    Var y = t.conv2d(t.leaf(x), t.leaf(w), t.leaf(b), s, p);
    REQUIRE(oracle::max_abs_diff(t.value(y), oracle::conv2d(x, w, b, s, p)) < 1e-9);

    if ((k - 1) * 1 + 1 > 2 * p) {  // valid deconv geometry
      Tensor wd = oracle::random_tensor({C, K, k, k}, rng);
      Tape t2;
      Var yd = t2.deconv2d(t2.leaf(x), t2.leaf(wd), t2.leaf(b), s, p);
      REQUIRE(oracle::max_abs_diff(t2.value(yd), oracle::deconv2d(x, wd, b, s, p)) < 1e-9);
    }
  }
}
