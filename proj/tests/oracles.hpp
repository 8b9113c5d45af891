#pragma once

// Test-only reference implementations. Everything here is written as plain
// nested loops, independent of the im2col/GEMM path in the library, so the
// two can check each other.

#include <cmath>
#include <functional>

#include "s2pd/nd/rng.hpp"
#include "s2pd/nd/tensor.hpp"

namespace oracle {

using s2pd::nd::Rng;
using s2pd::nd::Tensor;

inline Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int s, int p) {
  const int N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3];
  const int K = w.shape[0], k = w.shape[2];
  const int OH = (H + 2 * p - k) / s + 1;
  const int OW = (W + 2 * p - k) / s + 1;
  Tensor y = Tensor::zeros({N, K, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int kk = 0; kk < K; ++kk)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          double acc = b.data[static_cast<size_t>(kk)];
          for (int c = 0; c < C; ++c)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int ih = oh * s - p + ki;
                const int iw = ow * s - p + kj;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += x.at(n, c, ih, iw) * w.at(kk, c, ki, kj);
              }
          y.at(n, kk, oh, ow) = acc;
        }
  return y;
}

inline Tensor deconv2d(const Tensor& x, const Tensor& w, const Tensor& b, int s, int p) {
  const int N = x.shape[0], Cin = x.shape[1], IH = x.shape[2], IW = x.shape[3];
  const int Cout = w.shape[1], k = w.shape[2];
  const int OH = (IH - 1) * s - 2 * p + k;
  const int OW = (IW - 1) * s - 2 * p + k;
  Tensor y = Tensor::zeros({N, Cout, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int ci = 0; ci < Cin; ++ci)
      for (int ih = 0; ih < IH; ++ih)
        for (int iw = 0; iw < IW; ++iw) {
          const double xv = x.at(n, ci, ih, iw);
          for (int co = 0; co < Cout; ++co)
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) {
                const int oh = ih * s - p + ki;
                const int ow = iw * s - p + kj;
                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                y.at(n, co, oh, ow) += xv * w.at(ci, co, ki, kj);
              }
        }
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) y.at(n, co, oh, ow) += b.data[static_cast<size_t>(co)];
  return y;
}

inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int N = x.shape[0], F = x.shape[1], G = w.shape[1];
  Tensor y = Tensor::zeros({N, G});
  for (int n = 0; n < N; ++n)
    for (int g = 0; g < G; ++g) {
      double acc = b.data[static_cast<size_t>(g)];
      for (int f = 0; f < F; ++f) acc += x.at(n, f) * w.at(f, g);
      y.at(n, g) = acc;
    }
  return y;
}

inline Tensor random_tensor(s2pd::nd::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

/// Central finite differences of f around the current contents of `buf`,
/// compared elementwise to analytic gradients. Returns the max relative
/// error, where the denominator saturates at 1e-3 to keep noise on
/// near-zero gradients from dominating.
inline double fd_check(std::vector<double>& buf, const std::vector<double>& analytic,
                       const std::function<double()>& f, double h = 1e-5) {
  double worst = 0.0;
  for (size_t i = 0; i < buf.size(); ++i) {
    const double saved = buf[i];
    buf[i] = saved + h;
    const double fp = f();
    buf[i] = saved - h;
    const double fm = f();
    buf[i] = saved;
    const double fd = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
    worst = std::max(worst, std::abs(fd - analytic[i]) / denom);
  }
  return worst;
}

}  // namespace oracle
