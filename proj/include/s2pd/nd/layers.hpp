#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "s2pd/nd/rng.hpp"
#include "s2pd/nd/tape.hpp"
#include "s2pd/nd/tensor.hpp"

namespace s2pd::nd {

struct Parameter {
  Tensor value;
  Tensor grad;  // empty when no gradient has been accumulated
};

enum class LayerKind { conv2d, deconv2d, dense };

struct ConvHyper {
  int in_ch = 0, out_ch = 0, k = 3, stride = 1, pad = 0;
};
struct DenseHyper {
  int in_dim = 0, out_dim = 0;
};

/// One parameterized layer: weights + bias + kind-specific hyperparameters.
/// A frozen layer rejects gradient accumulation outright and is skipped by
/// the optimizer, so its bytes cannot drift.
class LayerParams {
 public:
  LayerKind kind = LayerKind::dense;
  ConvHyper conv;
  DenseHyper dense;
  Parameter weights;
  Parameter bias;

  static LayerParams make_conv2d(int in_ch, int out_ch, int k, int stride, int pad) {
    LayerParams lp;
    lp.kind = LayerKind::conv2d;
    lp.conv = {in_ch, out_ch, k, stride, pad};
    lp.weights.value = Tensor::zeros({out_ch, in_ch, k, k});
    lp.bias.value = Tensor::zeros({out_ch});
    return lp;
  }
  static LayerParams make_deconv2d(int in_ch, int out_ch, int k, int stride, int pad) {
    LayerParams lp;
    lp.kind = LayerKind::deconv2d;
    lp.conv = {in_ch, out_ch, k, stride, pad};
    lp.weights.value = Tensor::zeros({in_ch, out_ch, k, k});
    lp.bias.value = Tensor::zeros({out_ch});
    return lp;
  }
  static LayerParams make_dense(int in_dim, int out_dim) {
    LayerParams lp;
    lp.kind = LayerKind::dense;
    lp.dense = {in_dim, out_dim};
    lp.weights.value = Tensor::zeros({in_dim, out_dim});
    lp.bias.value = Tensor::zeros({out_dim});
    return lp;
  }

  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }
  void unfreeze() { frozen_ = false; }

  int64_t param_count() const { return weights.value.size() + bias.value.size(); }

  /// Glorot uniform: +-sqrt(6/(fan_in+fan_out)); biases start at zero.
  void init_glorot(Rng& rng) {
    double fan_in = 0, fan_out = 0;
    switch (kind) {
      case LayerKind::conv2d:
        fan_in = double(conv.in_ch) * conv.k * conv.k;
        fan_out = double(conv.out_ch) * conv.k * conv.k;
        break;
      case LayerKind::deconv2d:
        fan_in = double(conv.in_ch) * conv.k * conv.k;
        fan_out = double(conv.out_ch) * conv.k * conv.k;
        break;
      case LayerKind::dense:
        fan_in = dense.in_dim;
        fan_out = dense.out_dim;
        break;
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : weights.value.data) v = rng.uniform(-bound, bound);
    for (auto& v : bias.value.data) v = 0.0;
  }

  /// Registers weights and bias on a tape and applies the layer to x.
  /// Frozen layers are registered with requires_grad=false, so backward never
  /// produces gradients for them.
  Var apply(Tape& t, Var x) {
    last_w_ = t.leaf(weights.value, !frozen_);
    last_b_ = t.leaf(bias.value, !frozen_);
    switch (kind) {
      case LayerKind::conv2d:
        return t.conv2d(x, last_w_, last_b_, conv.stride, conv.pad);
      case LayerKind::deconv2d:
        return t.deconv2d(x, last_w_, last_b_, conv.stride, conv.pad);
      case LayerKind::dense:
        return t.dense(x, last_w_, last_b_);
    }
    throw std::logic_error("unreachable layer kind");
  }

  /// Pulls gradients of the most recent apply() off the tape into the
  /// parameter grad accumulators. Throws on frozen layers: freezing is a
  /// contract, not a hint.
  void harvest_grads(const Tape& t) { accumulate_grads(t.grad(last_w_), t.grad(last_b_)); }

  void accumulate_grads(const Tensor& dw, const Tensor& db) {
    if (frozen_)
      throw std::logic_error("gradient accumulation on a frozen layer");
    accum(weights, dw);
    accum(bias, db);
  }

  void clear_grads() {
    weights.grad = Tensor{};
    bias.grad = Tensor{};
  }

  bool has_grads() const { return !weights.grad.empty() && !bias.grad.empty(); }

 private:
  bool frozen_ = false;
  Var last_w_, last_b_;

  static void accum(Parameter& p, const Tensor& g) {
    if (g.empty()) return;  // layer not reached by this loss
    if (g.shape != p.value.shape)
      throw ShapeError("gradient shape " + shape_str(g.shape) + " does not match parameter " +
                       shape_str(p.value.shape));
    if (p.grad.empty()) p.grad = Tensor::zeros(p.value.shape);
    for (size_t i = 0; i < g.data.size(); ++i) p.grad.data[i] += g.data[i];
  }
};

}  // namespace s2pd::nd
