#pragma once

#include <string>
#include <vector>

#include "s2pd/io/checkpoint.hpp"
#include "s2pd/nd/layers.hpp"
#include "s2pd/nd/tape.hpp"

namespace s2pd::models {

/// Position regressor: conv x3 -> dense -> dense -> 2 outputs, predicting
/// (x, y) normalized to [0,1] over the placement region. Denormalization to
/// millimeters is the caller's job. Input shape matches the VAE decoder
/// output, since the regressor always consumes pseudo-synthetic images (or
/// raw images in the baseline).
class CnnRegressor {
 public:
  int resolution = 32;
  nd::LayerParams conv1, conv2, conv3, fc1, fc2;

  explicit CnnRegressor(int res) : resolution(res) {
    if (res % 8 != 0 || res < 8)
      throw std::invalid_argument("resolution must be a positive multiple of 8");
    const int s = res / 8;
    conv1 = nd::LayerParams::make_conv2d(4, 16, 3, 2, 1);
    conv2 = nd::LayerParams::make_conv2d(16, 32, 3, 2, 1);
    conv3 = nd::LayerParams::make_conv2d(32, 64, 3, 2, 1);
    fc1 = nd::LayerParams::make_dense(64 * s * s, 128);
    fc2 = nd::LayerParams::make_dense(128, 2);
  }

  CnnRegressor(int res, nd::Rng& rng) : CnnRegressor(res) {
    for (auto* lp : layers()) lp->init_glorot(rng);
  }

  std::vector<nd::LayerParams*> layers() { return {&conv1, &conv2, &conv3, &fc1, &fc2}; }

  nd::Var predict(nd::Tape& t, nd::Var images) {
    const auto& shape = t.value(images).shape;
    if (shape.size() != 4 || shape[1] != 4 || shape[2] != resolution || shape[3] != resolution)
      throw nd::ShapeError("predict: expected [N,4," + std::to_string(resolution) + "," +
                           std::to_string(resolution) + "], got " + nd::shape_str(shape));
    nd::Var h = t.relu(conv1.apply(t, images));
    h = t.relu(conv2.apply(t, h));
    h = t.relu(conv3.apply(t, h));
    const int n = t.value(h).shape[0];
    h = t.reshape(h, {n, static_cast<int>(t.value(h).size() / n)});
    h = t.relu(fc1.apply(t, h));
    return fc2.apply(t, h);
  }

  /// No-grad batch prediction, rows are (x_norm, y_norm).
  nd::Tensor predict_positions(const nd::Tensor& images) {
    nd::Tape t;
    return t.value(predict(t, t.leaf(images)));
  }

  uint64_t arch_fingerprint() const {
    std::vector<uint8_t> desc;
    io::put_le<uint8_t>(desc, static_cast<uint8_t>(io::NetworkKind::cnn));
    io::put_le<int32_t>(desc, resolution);
    auto* self = const_cast<CnnRegressor*>(this);
    for (const auto* lp : self->layers()) {
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
    ck.kind = io::NetworkKind::cnn;
    ck.stage = stage;
    ck.arch_fingerprint = arch_fingerprint();
    ck.seed = seed;
    auto* self = const_cast<CnnRegressor*>(this);
    for (const auto* lp : self->layers()) {
      ck.params.push_back(lp->weights.value);
      ck.params.push_back(lp->bias.value);
    }
    return ck;
  }

  void load_checkpoint(const io::Checkpoint& ck) {
    if (ck.kind != io::NetworkKind::cnn)
      throw io::IoError("checkpoint is not a CNN checkpoint");
    if (ck.arch_fingerprint != arch_fingerprint())
      throw io::IoError("checkpoint architecture fingerprint mismatch: file has " +
                        std::to_string(ck.arch_fingerprint) + ", network expects " +
                        std::to_string(arch_fingerprint()));
    auto ls = layers();
    if (ck.params.size() != ls.size() * 2)
      throw io::IoError("checkpoint parameter blob count mismatch");
    size_t i = 0;
    for (auto* lp : ls) {
      lp->weights.value = ck.params[i];
      lp->bias.value = ck.params[i + 1];
      i += 2;
    }
  }

  static CnnRegressor from_checkpoint(const io::Checkpoint& ck, int resolution) {
    CnnRegressor net(resolution);
    net.load_checkpoint(ck);
    return net;
  }
};

}  // namespace s2pd::models
