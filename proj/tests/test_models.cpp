#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "s2pd/models/batch.hpp"
#include "s2pd/models/regressor.hpp"
#include "s2pd/models/vae.hpp"
#include "s2pd/scene/render.hpp"

using namespace s2pd;
using namespace s2pd::models;
using nd::Tape;
using nd::Tensor;
using nd::Var;

namespace {

Tensor render_batch(int res, double x_mm, double y_mm, int copies = 1) {
  scene::SceneSpec spec;
  spec.target = scene::Placed{*scene::find_object("green-cube"), x_mm, y_mm};
  scene::ImageRGBD img = scene::render(spec, res, res);
  std::vector<const scene::ImageRGBD*> ptrs(static_cast<size_t>(copies), &img);
  return batch_from_images(ptrs);
}

}  // namespace

TEST_CASE("encode produces [N, latent] mu and logvar with identical rows for identical images") {
  nd::Rng rng(1);
  VaeNet net({16, 8}, rng);
  Tensor batch = render_batch(16, 200, 125, 3);
  Tape t;
  auto [mu, logvar] = net.encode(t, t.leaf(batch));
  REQUIRE(t.value(mu).shape == nd::Shape{3, 8});
  REQUIRE(t.value(logvar).shape == nd::Shape{3, 8});
  for (int j = 0; j < 8; ++j) {
    REQUIRE(t.value(mu).at(0, j) == t.value(mu).at(1, j));
    REQUIRE(t.value(logvar).at(1, j) == t.value(logvar).at(2, j));
  }
}

TEST_CASE("encode rejects mismatched input shapes") {
  nd::Rng rng(1);
  VaeNet net({16, 8}, rng);
  Tape t;
  Var bad = t.leaf(Tensor::zeros({1, 3, 16, 16}));
  REQUIRE_THROWS_AS(net.encode(t, bad), nd::ShapeError);
  Var bad_res = t.leaf(Tensor::zeros({1, 4, 32, 32}));
  REQUIRE_THROWS_AS(net.encode(t, bad_res), nd::ShapeError);
}

TEST_CASE("reparameterize: eps=0 gives mu; logvar=0 gives mu+eps") {
  Tape t;
  Var mu = t.leaf(Tensor({1, 3}, {0.5, -1.0, 2.0}));
  Var logvar = t.leaf(Tensor({1, 3}, {0.3, -0.2, 1.0}));
  Var eps0 = t.leaf(Tensor::zeros({1, 3}));
  REQUIRE(t.value(reparameterize(t, mu, logvar, eps0)).data ==
          std::vector<double>{0.5, -1.0, 2.0});

  Var lv0 = t.leaf(Tensor::zeros({1, 3}));
  Var eps = t.leaf(Tensor({1, 3}, {0.1, 0.2, -0.3}));
  auto z = t.value(reparameterize(t, mu, lv0, eps));
  REQUIRE(z.data[0] == Catch::Approx(0.6));
  REQUIRE(z.data[1] == Catch::Approx(-0.8));
  REQUIRE(z.data[2] == Catch::Approx(1.7));
}

TEST_CASE("gradients flow through the sampling step") {
  nd::Rng rng(2);
  Tensor mu = oracle::random_tensor({2, 4}, rng);
  Tensor logvar = oracle::random_tensor({2, 4}, rng, -0.5, 0.5);
  Tensor eps = oracle::random_tensor({2, 4}, rng);

  Tape t;
  Var vmu = t.leaf(mu, true);
  Var vlv = t.leaf(logvar, true);
  Var z = reparameterize(t, vmu, vlv, t.leaf(eps));
  t.backward(t.scale(t.sum(t.mul(z, z)), 0.5));

  auto eval = [&]() {
    Tape t2;
    Var z2 = reparameterize(t2, t2.leaf(mu), t2.leaf(logvar), t2.leaf(eps));
    return t2.value(t2.scale(t2.sum(t2.mul(z2, z2)), 0.5)).data[0];
  };
  REQUIRE(oracle::fd_check(logvar.data, t.grad(vlv).data, eval) < 1e-4);
  REQUIRE(oracle::fd_check(mu.data, t.grad(vmu).data, eval) < 1e-4);
}

TEST_CASE("KL term closed-form values") {
  auto kl_of = [](std::vector<double> mu, std::vector<double> logvar) {
    Tape t;
    const int n = static_cast<int>(mu.size());
    Var vmu = t.leaf(Tensor({1, n}, std::move(mu)));
    Var vlv = t.leaf(Tensor({1, n}, std::move(logvar)));
    return t.value(kl_divergence_mean(t, vmu, vlv)).data[0];
  };
  REQUIRE(kl_of({0.0}, {0.0}) == Catch::Approx(0.0).margin(1e-15));
  REQUIRE(kl_of({1.0}, {0.0}) == Catch::Approx(0.5).margin(1e-12));
  REQUIRE(kl_of({0.0}, {std::log(4.0)}) == Catch::Approx(0.80685281944).margin(1e-9));
}

TEST_CASE("KL term is nonnegative, zero only at the prior") {
  nd::Rng rng(9);
  for (int iter = 0; iter < 200; ++iter) {
    Tensor mu = oracle::random_tensor({2, 5}, rng, -3, 3);
    Tensor lv = oracle::random_tensor({2, 5}, rng, -3, 3);
    Tape t;
    const double kl = t.value(kl_divergence_mean(t, t.leaf(mu), t.leaf(lv))).data[0];
    REQUIRE(kl >= 0.0);
    bool at_prior = true;
    for (double v : mu.data) at_prior = at_prior && v == 0.0;
    for (double v : lv.data) at_prior = at_prior && v == 0.0;
    if (!at_prior) REQUIRE(kl > 0.0);
  }
}

TEST_CASE("decode output lies in [0,1] for any latent") {
  nd::Rng rng(3);
  VaeNet net({16, 8}, rng);
  Tensor z = oracle::random_tensor({2, 8}, rng, -20.0, 20.0);
  Tape t;
  const Tensor& out = t.value(net.decode(t, t.leaf(z)));
  REQUIRE(out.shape == nd::Shape{2, 4, 16, 16});
  for (double v : out.data) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0);
  }
}

TEST_CASE("decode rejects latent width mismatch") {
  nd::Rng rng(3);
  VaeNet net({16, 8}, rng);
  Tape t;
  REQUIRE_THROWS_AS(net.decode(t, t.leaf(Tensor::zeros({1, 9}))), nd::ShapeError);
}

TEST_CASE("copied networks share decoder behavior bit for bit") {
  nd::Rng rng(4);
  VaeNet vae1({16, 8}, rng);
  VaeNet vae2 = vae1;  // VAE2 starts as a weight copy of VAE1
  vae2.freeze_decoder();
  REQUIRE(vae1.decoder_bytes() == vae2.decoder_bytes());

  Tensor z = oracle::random_tensor({3, 8}, rng);
  Tape t1, t2;
  const Tensor& a = t1.value(vae1.decode(t1, t1.leaf(z)));
  const Tensor& b = t2.value(vae2.decode(t2, t2.leaf(z)));
  REQUIRE(a.data == b.data);
}

TEST_CASE("elbo training on a constant dataset collapses mu spread below sigma") {
  nd::Rng rng(5);
  VaeNet net({16, 8}, rng);
  Tensor batch = render_batch(16, 100, 100, 4);
  auto layers = net.all_layers();
  nd::AdamState adam = nd::AdamState::for_layers(layers, 1e-3);

  nd::Rng eps_rng(6);
  for (int step = 0; step < 30; ++step) {
    Tape t;
    Var x = t.leaf(batch);
    auto [mu, logvar] = net.encode(t, x);
    Tensor eps = Tensor::zeros({4, 8});
    for (auto& v : eps.data) v = eps_rng.normal();
    Var z = reparameterize(t, mu, logvar, t.leaf(eps));
    Var recon = net.decode(t, z);
    Var loss = elbo_loss(t, recon, x, mu, logvar, 1e-3);
    t.backward(loss);
    for (auto* lp : layers) lp->harvest_grads(t);
    adam_step(layers, adam);
  }

  // All rows encode the same image: mu spread across the batch must sit far
  // below the encoder's own uncertainty scale exp(logvar/2).
  Tape t;
  auto [mu, logvar] = net.encode(t, t.leaf(batch));
  double spread = 0.0, sigma = 0.0;
  for (int j = 0; j < 8; ++j) {
    double mean = 0.0;
    for (int i = 0; i < 4; ++i) mean += t.value(mu).at(i, j) / 4.0;
    for (int i = 0; i < 4; ++i) spread = std::max(spread, std::abs(t.value(mu).at(i, j) - mean));
    for (int i = 0; i < 4; ++i) sigma += std::exp(0.5 * t.value(logvar).at(i, j)) / 32.0;
  }
  REQUIRE(spread < sigma);
}

TEST_CASE("regressor output is [N,2] and deterministic") {
  nd::Rng rng(7);
  CnnRegressor cnn(16, rng);
  Tensor batch = render_batch(16, 250, 60, 2);
  Tensor out = cnn.predict_positions(batch);
  REQUIRE(out.shape == nd::Shape{2, 2});
  REQUIRE(out.at(0, 0) == out.at(1, 0));
  REQUIRE(out.at(0, 1) == out.at(1, 1));
  Tensor out2 = cnn.predict_positions(batch);
  REQUIRE(out.data == out2.data);
}

TEST_CASE("regressor rejects wrong input shape") {
  nd::Rng rng(7);
  CnnRegressor cnn(16, rng);
  Tape t;
  REQUIRE_THROWS_AS(cnn.predict(t, t.leaf(Tensor::zeros({1, 4, 32, 32}))), nd::ShapeError);
}

TEST_CASE("vae checkpoints round trip and reject foreign architectures") {
  nd::Rng rng(8);
  VaeNet net({16, 8}, rng);
  io::Checkpoint ck = net.to_checkpoint(io::StageTag::vae1, 42);
  VaeNet back = VaeNet::from_checkpoint(ck, {16, 8});
  REQUIRE(back.decoder_bytes() == net.decoder_bytes());

  REQUIRE_THROWS_WITH(VaeNet::from_checkpoint(ck, VaeConfig{16, 12}),
                      Catch::Matchers::ContainsSubstring("fingerprint"));
  CnnRegressor cnn(16, rng);
  REQUIRE_THROWS_AS(cnn.load_checkpoint(ck), io::IoError);
}
