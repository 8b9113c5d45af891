#pragma once

#include <string>
#include <utility>
#include <vector>

#include "s2pd/io/checkpoint.hpp"
#include "s2pd/nd/adam.hpp"
#include "s2pd/nd/layers.hpp"
#include "s2pd/nd/tape.hpp"

namespace s2pd::models {

using nd::LayerParams;
using nd::Tape;
using nd::Tensor;
using nd::Var;

struct VaeConfig {
  int resolution = 32;  // input is 4 x res x res
  int latent_dim = 32;

  void validate() const {
    if (resolution % 8 != 0 || resolution < 8)
      throw std::invalid_argument("resolution must be a positive multiple of 8");
    if (latent_dim < 1) throw std::invalid_argument("latent_dim must be positive");
  }
};

/// One latent draw: z = mu + exp(logvar/2) * eps for the recorded eps.
struct LatentSample {
  Tensor mu, logvar, eps, z;
};

/// z = mu + exp(0.5*logvar) (*) eps. Differentiable w.r.t. mu and logvar;
/// eps is an externally drawn standard-normal constant.
inline Var reparameterize(Tape& t, Var mu, Var logvar, Var eps) {
  nd::require_same_shape(t.value(mu), t.value(logvar), "reparameterize");
  nd::require_same_shape(t.value(mu), t.value(eps), "reparameterize");
  Var sigma = t.exp(t.scale(logvar, 0.5));
  return t.add(mu, t.mul(sigma, eps));
}

/// Mean over the batch of KL(q(z|x) || N(0,I)) with the latent dims summed:
/// -0.5 * sum(1 + logvar - mu^2 - exp(logvar)) / N.
inline Var kl_divergence_mean(Tape& t, Var mu, Var logvar) {
  const int batch = t.value(mu).shape[0];
  Var inner = t.sub(t.sub(t.add_scalar(logvar, 1.0), t.mul(mu, mu)), t.exp(logvar));
  return t.scale(t.sum(inner), -0.5 / static_cast<double>(batch));
}

/// Pixel-mean reconstruction MSE plus beta times the batch-mean KL.
inline Var elbo_loss(Tape& t, Var reconstruction, Var target, Var mu, Var logvar, double beta) {
  nd::require_same_shape(t.value(reconstruction), t.value(target), "elbo_loss");
  Var diff = t.sub(reconstruction, target);
  Var mse = t.scale(t.sum(t.mul(diff, diff)),
                    1.0 / static_cast<double>(t.value(reconstruction).size()));
  return t.add(mse, t.scale(kl_divergence_mean(t, mu, logvar), beta));
}

/// Encoder/decoder pair. The two VAEs of the pipeline are two instances of
/// this class; VAE2 is a copy of VAE1 with the decoder frozen, so the decoder
/// bytes stay shared by construction.
class VaeNet {
 public:
  VaeConfig cfg;
  // encoder
  LayerParams enc_conv1, enc_conv2, enc_conv3, enc_trunk, enc_mu, enc_logvar;
  // decoder
  LayerParams dec_dense, dec_deconv1, dec_deconv2, dec_deconv3;

  explicit VaeNet(VaeConfig c) : cfg(c) {
    cfg.validate();
    const int s = cfg.resolution / 8;
    const int flat = 64 * s * s;
    enc_conv1 = LayerParams::make_conv2d(4, 16, 3, 2, 1);
    enc_conv2 = LayerParams::make_conv2d(16, 32, 3, 2, 1);
    enc_conv3 = LayerParams::make_conv2d(32, 64, 3, 2, 1);
    enc_trunk = LayerParams::make_dense(flat, 128);
    enc_mu = LayerParams::make_dense(128, cfg.latent_dim);
    enc_logvar = LayerParams::make_dense(128, cfg.latent_dim);
    dec_dense = LayerParams::make_dense(cfg.latent_dim, flat);
    dec_deconv1 = LayerParams::make_deconv2d(64, 32, 4, 2, 1);
    dec_deconv2 = LayerParams::make_deconv2d(32, 16, 4, 2, 1);
    dec_deconv3 = LayerParams::make_deconv2d(16, 4, 4, 2, 1);
  }

  VaeNet(VaeConfig c, nd::Rng& rng) : VaeNet(c) {
    for (auto* lp : all_layers()) lp->init_glorot(rng);
  }

  std::vector<LayerParams*> encoder_layers() {
    return {&enc_conv1, &enc_conv2, &enc_conv3, &enc_trunk, &enc_mu, &enc_logvar};
  }
  std::vector<LayerParams*> decoder_layers() {
    return {&dec_dense, &dec_deconv1, &dec_deconv2, &dec_deconv3};
  }
  std::vector<LayerParams*> all_layers() {
    auto v = encoder_layers();
    for (auto* lp : decoder_layers()) v.push_back(lp);
    return v;
  }
  std::vector<const LayerParams*> all_layers() const {
    auto* self = const_cast<VaeNet*>(this);
    std::vector<const LayerParams*> v;
    for (auto* lp : self->all_layers()) v.push_back(lp);
    return v;
  }

  void freeze_decoder() {
    for (auto* lp : decoder_layers()) lp->freeze();
  }

  /// (mu, logvar), each [N, latent_dim].
  std::pair<Var, Var> encode(Tape& t, Var images) {
    const auto& shape = t.value(images).shape;
    if (shape.size() != 4 || shape[1] != 4 || shape[2] != cfg.resolution ||
        shape[3] != cfg.resolution)
      throw nd::ShapeError("encode: expected [N,4," + std::to_string(cfg.resolution) + "," +
                           std::to_string(cfg.resolution) + "], got " + nd::shape_str(shape));
    Var h = t.relu(enc_conv1.apply(t, images));
    h = t.relu(enc_conv2.apply(t, h));
    h = t.relu(enc_conv3.apply(t, h));
    const int n = t.value(h).shape[0];
    h = t.reshape(h, {n, static_cast<int>(t.value(h).size() / n)});
    h = t.relu(enc_trunk.apply(t, h));
    return {enc_mu.apply(t, h), enc_logvar.apply(t, h)};
  }

  /// Image batch in [0,1] (sigmoid output layer).
  Var decode(Tape& t, Var z) {
    // copy, not reference: appending ops reallocates the tape's node storage
    const nd::Shape shape = t.value(z).shape;
    if (shape.size() != 2 || shape[1] != cfg.latent_dim)
      throw nd::ShapeError("decode: expected [N," + std::to_string(cfg.latent_dim) + "], got " +
                           nd::shape_str(shape));
    const int s = cfg.resolution / 8;
    Var h = t.relu(dec_dense.apply(t, z));
    h = t.reshape(h, {shape[0], 64, s, s});
    h = t.relu(dec_deconv1.apply(t, h));
    h = t.relu(dec_deconv2.apply(t, h));
    return t.sigmoid(dec_deconv3.apply(t, h));
  }

  /// No-grad convenience: deterministic latent means for an image batch.
  Tensor encode_mu(const Tensor& images) {
    Tape t;
    auto [mu, logvar] = encode(t, t.leaf(images));
    (void)logvar;
    return t.value(mu);
  }

  /// No-grad convenience: decode(encode_mu(x)), the deterministic
  /// pseudo-synthetic reconstruction used downstream of both VAEs.
  Tensor reconstruct(const Tensor& images) {
    Tape t;
    auto [mu, logvar] = encode(t, t.leaf(images));
    (void)logvar;
    return t.value(decode(t, mu));
  }

  uint64_t arch_fingerprint() const {
    std::vector<uint8_t> desc;
    io::put_le<uint8_t>(desc, static_cast<uint8_t>(io::NetworkKind::vae));
    io::put_le<int32_t>(desc, cfg.resolution);
    io::put_le<int32_t>(desc, cfg.latent_dim);
    for (const auto* lp : all_layers()) {
      io::put_le<uint8_t>(desc, static_cast<uint8_t>(lp->kind));
      if (lp->kind == nd::LayerKind::dense) {
        io::put_le<int32_t>(desc, lp->dense.in_dim);
        io::put_le<int32_t>(desc, lp->dense.out_dim);
      } else {
        io::put_le<int32_t>(desc, lp->conv.in_ch);
        io::put_le<int32_t>(desc, lp->conv.out_ch);
        io::put_le<int32_t>(desc, lp->conv.k);
        io::put_le<int32_t>(desc, lp->conv.stride);
        io::put_le<int32_t>(desc, lp->conv.pad);
      }
    }
    return io::fnv1a(desc);
  }

  io::Checkpoint to_checkpoint(io::StageTag stage, uint64_t seed) const {
    io::Checkpoint ck;
    ck.kind = io::NetworkKind::vae;
    ck.stage = stage;
    ck.arch_fingerprint = arch_fingerprint();
    ck.seed = seed;
    for (const auto* lp : all_layers()) {
      ck.params.push_back(lp->weights.value);
      ck.params.push_back(lp->bias.value);
    }
    return ck;
  }

  void load_checkpoint(const io::Checkpoint& ck) {
    if (ck.kind != io::NetworkKind::vae)
      throw io::IoError("checkpoint is not a VAE checkpoint");
    if (ck.arch_fingerprint != arch_fingerprint())
      throw io::IoError("checkpoint architecture fingerprint mismatch: file has " +
                        std::to_string(ck.arch_fingerprint) + ", network expects " +
                        std::to_string(arch_fingerprint()));
    auto layers = all_layers();
    if (ck.params.size() != layers.size() * 2)
      throw io::IoError("checkpoint parameter blob count mismatch");
    size_t i = 0;
    for (auto* lp : layers) {
      if (ck.params[i].shape != lp->weights.value.shape ||
          ck.params[i + 1].shape != lp->bias.value.shape)
        throw io::IoError("checkpoint blob shape mismatch at blob " + std::to_string(i));
      lp->weights.value = ck.params[i];
      lp->bias.value = ck.params[i + 1];
      i += 2;
    }
  }

  static VaeNet from_checkpoint(const io::Checkpoint& ck, VaeConfig cfg) {
    VaeNet net(cfg);
    net.load_checkpoint(ck);
    return net;
  }

  /// Exact byte serialization of the decoder parameters; VAE1 and VAE2 must
  /// agree on this bit for bit.
  std::vector<uint8_t> decoder_bytes() const {
    std::vector<uint8_t> out;
    auto* self = const_cast<VaeNet*>(this);
    for (const auto* lp : self->decoder_layers()) {
      for (double v : lp->weights.value.data) io::put_f64(out, v);
      for (double v : lp->bias.value.data) io::put_f64(out, v);
    }
    return out;
  }
};

}  // namespace s2pd::models
