#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "s2pd/nd/layers.hpp"

namespace s2pd::nd {

/// Adam state over one fixed list of trainable layers. Frozen layers are not
/// tracked at all; m/v cover exactly the trainable parameter count, laid out
/// in layer order (weights then bias per layer).
struct AdamState {
  int64_t step = 0;
  std::vector<double> m, v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_layers(const std::vector<LayerParams*>& layers, double lr = 1e-3) {
    AdamState st;
    st.lr = lr;
    int64_t n = 0;
    for (const auto* lp : layers)
      if (!lp->frozen()) n += lp->param_count();
    st.m.assign(static_cast<size_t>(n), 0.0);
    st.v.assign(static_cast<size_t>(n), 0.0);
    return st;
  }
};

/// Standard Adam update with bias correction. Consumes and clears the
/// accumulated gradients; frozen layers are untouched. Throws if a trainable
/// layer has no gradient (backward was not run, or the layer is unreachable).
inline void adam_step(const std::vector<LayerParams*>& layers, AdamState& st) {
  int64_t total = 0;
  for (const auto* lp : layers)
    if (!lp->frozen()) total += lp->param_count();
  if (static_cast<size_t>(total) != st.m.size())
    throw std::logic_error("adam state does not match trainable parameter count");
  for (const auto* lp : layers)
    if (!lp->frozen() && !lp->has_grads())
      throw std::logic_error("adam_step: missing gradients for a trainable layer");

  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));

  size_t off = 0;
  auto update = [&](Parameter& p) {
    double* val = p.value.data.data();
    const double* g = p.grad.data.data();
    const size_t n = p.value.data.size();
    for (size_t i = 0; i < n; ++i) {
      double& mi = st.m[off + i];
      double& vi = st.v[off + i];
      mi = st.beta1 * mi + (1.0 - st.beta1) * g[i];
      vi = st.beta2 * vi + (1.0 - st.beta2) * g[i] * g[i];
      const double mhat = mi / bc1;
      const double vhat = vi / bc2;
      val[i] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
    }
    off += n;
  };

  for (auto* lp : layers) {
    if (lp->frozen()) continue;
    update(lp->weights);
    update(lp->bias);
    lp->clear_grads();
  }
}

}  // namespace s2pd::nd
