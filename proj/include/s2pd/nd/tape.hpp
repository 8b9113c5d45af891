#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "s2pd/nd/gemm.hpp"
#include "s2pd/nd/tensor.hpp"

namespace s2pd::nd {

/// Handle into a Tape node.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

/// Reverse-mode autodiff tape. Nodes are appended in evaluation order, so the
/// tape itself is a topological order and backward() is a single reverse
/// sweep. A tape is built per training step and discarded; parameters live
/// outside and are registered as leaves each step.
///
/// Grad tensors are allocated lazily: a node that is never reached from the
/// loss keeps an empty grad, and frozen leaves (requires_grad=false) never
/// receive one.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched by backward
    bool requires_grad = false;
    std::function<void(Tape&)> backfn;  // null for leaves
  };

  Var leaf(Tensor value, bool requires_grad = false) {
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.idx)].value; }
  const Tensor& grad(Var v) const { return nodes_[static_cast<size_t>(v.idx)].grad; }
  bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v.idx)].requires_grad; }
  size_t size() const { return nodes_.size(); }

  // ---- elementwise ----

  Var relu(Var x) {
    const Tensor& xv = value(x);
    Tensor out = xv;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return unary(x, std::move(out), [xi = x.idx](Tape& t, const Tensor& dy, Tensor& dx) {
      const Tensor& xin = t.nodes_[static_cast<size_t>(xi)].value;
      for (size_t i = 0; i < dx.data.size(); ++i)
        if (xin.data[i] > 0.0) dx.data[i] += dy.data[i];
    });
  }

  Var sigmoid(Var x) {
    const Tensor& xv = value(x);
    Tensor out = xv;
    for (auto& v : out.data) {
      if (v >= 0.0) {
        v = 1.0 / (1.0 + std::exp(-v));
      } else {
        const double e = std::exp(v);
        v = e / (1.0 + e);
      }
    }
    Var y = unary_placeholder(x, std::move(out));
    set_backfn(y, [xi = x.idx, yi = y.idx](Tape& t) {
      const Tensor& dy = t.nodes_[static_cast<size_t>(yi)].grad;
      const Tensor& yv = t.nodes_[static_cast<size_t>(yi)].value;
      if (!t.nodes_[static_cast<size_t>(xi)].requires_grad) return;
      Tensor& dx = t.grad_buf(xi);
      for (size_t i = 0; i < dx.data.size(); ++i) {
        const double s = yv.data[i];
        dx.data[i] += dy.data[i] * s * (1.0 - s);
      }
    });
    return y;
  }

  Var exp(Var x) {
    Tensor out = value(x);
    for (auto& v : out.data) v = std::exp(v);
    Var y = unary_placeholder(x, std::move(out));
    set_backfn(y, [xi = x.idx, yi = y.idx](Tape& t) {
      const Tensor& dy = t.nodes_[static_cast<size_t>(yi)].grad;
      const Tensor& yv = t.nodes_[static_cast<size_t>(yi)].value;
      if (!t.nodes_[static_cast<size_t>(xi)].requires_grad) return;
      Tensor& dx = t.grad_buf(xi);
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i] * yv.data[i];
    });
    return y;
  }

  Var add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Tensor out = value(a);
    const Tensor& bv = value(b);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += bv.data[i];
    return binary(a, b, std::move(out),
                  [](Tape&, const Tensor& dy, Tensor& da) {
                    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += dy.data[i];
                  },
                  [](Tape&, const Tensor& dy, Tensor& db) {
                    for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += dy.data[i];
                  });
  }

  Var sub(Var a, Var b) {
    require_same_shape(value(a), value(b), "sub");
    Tensor out = value(a);
    const Tensor& bv = value(b);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= bv.data[i];
    return binary(a, b, std::move(out),
                  [](Tape&, const Tensor& dy, Tensor& da) {
                    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += dy.data[i];
                  },
                  [](Tape&, const Tensor& dy, Tensor& db) {
                    for (size_t i = 0; i < db.data.size(); ++i) db.data[i] -= dy.data[i];
                  });
  }

  Var mul(Var a, Var b) {
    require_same_shape(value(a), value(b), "mul");
    Tensor out = value(a);
    const Tensor& bv = value(b);
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= bv.data[i];
    return binary(a, b, std::move(out),
                  [bi = b.idx](Tape& t, const Tensor& dy, Tensor& da) {
                    const Tensor& bvv = t.nodes_[static_cast<size_t>(bi)].value;
                    for (size_t i = 0; i < da.data.size(); ++i) da.data[i] += dy.data[i] * bvv.data[i];
                  },
                  [ai = a.idx](Tape& t, const Tensor& dy, Tensor& db) {
                    const Tensor& avv = t.nodes_[static_cast<size_t>(ai)].value;
                    for (size_t i = 0; i < db.data.size(); ++i) db.data[i] += dy.data[i] * avv.data[i];
                  });
  }

  Var scale(Var x, double c) {
    Tensor out = value(x);
    for (auto& v : out.data) v *= c;
    return unary(x, std::move(out), [c](Tape&, const Tensor& dy, Tensor& dx) {
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += c * dy.data[i];
    });
  }

  Var add_scalar(Var x, double c) {
    Tensor out = value(x);
    for (auto& v : out.data) v += c;
    return unary(x, std::move(out), [](Tape&, const Tensor& dy, Tensor& dx) {
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
    });
  }

  // ---- reductions / shapes ----

  Var sum(Var x) {
    const Tensor& xv = value(x);
    double s = 0.0;
    for (double v : xv.data) s += v;
    return unary(x, Tensor::scalar(s), [](Tape&, const Tensor& dy, Tensor& dx) {
      const double g = dy.data[0];
      for (auto& v : dx.data) v += g;
    });
  }

  Var reshape(Var x, Shape s) {
    const Tensor& xv = value(x);
    if (shape_numel(s) != xv.size())
      throw ShapeError("reshape: cannot view " + shape_str(xv.shape) + " as " + shape_str(s));
    Tensor out(std::move(s), xv.data);
    return unary(x, std::move(out), [](Tape&, const Tensor& dy, Tensor& dx) {
      for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
    });
  }

  // ---- layers ----

  /// y[N,G] = x[N,F] * w[F,G] + b[G]
  Var dense(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (xv.shape.size() != 2 || wv.shape.size() != 2)
      throw ShapeError("dense: expected 2-d input and weight, got " + shape_str(xv.shape) +
                       " and " + shape_str(wv.shape));
    if (xv.shape[1] != wv.shape[0])
      throw ShapeError("dense: input width " + shape_str(xv.shape) +
                       " does not match weight fan-in " + shape_str(wv.shape));
    const int N = xv.shape[0], F = xv.shape[1], G = wv.shape[1];
    if (bv.size() != G)
      throw ShapeError("dense: bias " + shape_str(bv.shape) + " does not match fan-out " +
                       shape_str(wv.shape));
    Tensor out = Tensor::zeros({N, G});
    detail::gemm_nn(N, F, G, xv.data.data(), wv.data.data(), out.data.data());
    for (int n = 0; n < N; ++n)
      for (int g = 0; g < G; ++g) out.data[static_cast<size_t>(n) * G + g] += bv.data[static_cast<size_t>(g)];

    Var y = make_node(std::move(out), {x, w, b});
    set_backfn(y, [xi = x.idx, wi = w.idx, bi = b.idx, yi = y.idx, N, F, G](Tape& t) {
      const Tensor& dy = t.nodes_[static_cast<size_t>(yi)].grad;
      if (t.nodes_[static_cast<size_t>(xi)].requires_grad) {
        // dx = dy * w^T
        std::vector<double> wt(static_cast<size_t>(F) * G);
        detail::transpose(F, G, t.nodes_[static_cast<size_t>(wi)].value.data.data(), wt.data());
        Tensor& dx = t.grad_buf(xi);
        detail::gemm_nn(N, G, F, dy.data.data(), wt.data(), dx.data.data());
      }
      if (t.nodes_[static_cast<size_t>(wi)].requires_grad) {
        // dw = x^T * dy
        std::vector<double> xt(static_cast<size_t>(N) * F);
        detail::transpose(N, F, t.nodes_[static_cast<size_t>(xi)].value.data.data(), xt.data());
        Tensor& dw = t.grad_buf(wi);
        detail::gemm_nn(F, N, G, xt.data(), dy.data.data(), dw.data.data());
      }
      if (t.nodes_[static_cast<size_t>(bi)].requires_grad) {
        Tensor& db = t.grad_buf(bi);
        for (int n = 0; n < N; ++n)
          for (int g = 0; g < G; ++g) db.data[static_cast<size_t>(g)] += dy.data[static_cast<size_t>(n) * G + g];
      }
    });
    return y;
  }

  /// y[N,K,OH,OW] = conv2d(x[N,C,H,W], w[K,C,k,k]) + b, zero padding.
  Var conv2d(Var x, Var w, Var b, int stride, int pad) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    check_conv_args(xv, wv, bv, stride, pad, /*transposed=*/false);
    const int N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3];
    const int K = wv.shape[0], k = wv.shape[2];
    const int OH = (H + 2 * pad - k) / stride + 1;
    const int OW = (W + 2 * pad - k) / stride + 1;
    return conv2d_impl(x, w, b, stride, pad, N, C, H, W, K, k, OH, OW);
  }

  /// y[N,Cout,OH,OW] = deconv2d(x[N,Cin,IH,IW], w[Cin,Cout,k,k]) + b.
  /// Transposed-convolution semantics: adjoint of conv2d with the same
  /// kernel, OH = (IH-1)*stride - 2*pad + k.
  Var deconv2d(Var x, Var w, Var b, int stride, int pad) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    check_conv_args(xv, wv, bv, stride, pad, /*transposed=*/true);
    const int N = xv.shape[0], Cin = xv.shape[1], IH = xv.shape[2], IW = xv.shape[3];
    const int Cout = wv.shape[1], k = wv.shape[2];
    const int OH = (IH - 1) * stride - 2 * pad + k;
    const int OW = (IW - 1) * stride - 2 * pad + k;
    if (OH < 1 || OW < 1)
      throw ShapeError("deconv2d: output would be empty for input " + shape_str(xv.shape) +
                       " kernel " + shape_str(wv.shape));
    const int Sin = IH * IW;
    const int CKK = Cout * k * k;

    // cols[Cout*k*k, N*Sin] = w^T[CKK,Cin] * xmat[Cin, N*Sin], then scatter.
    std::vector<double> xmat(static_cast<size_t>(Cin) * N * Sin);
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < Cin; ++c)
        std::memcpy(xmat.data() + (static_cast<size_t>(c) * N + n) * Sin,
                    xv.data.data() + (static_cast<size_t>(n) * Cin + c) * Sin,
                    sizeof(double) * static_cast<size_t>(Sin));
    std::vector<double> wt(static_cast<size_t>(CKK) * Cin);
    detail::transpose(Cin, CKK, wv.data.data(), wt.data());
    std::vector<double> cols(static_cast<size_t>(CKK) * N * Sin, 0.0);
    detail::gemm_nn(CKK, Cin, N * Sin, wt.data(), xmat.data(), cols.data());

    Tensor out = Tensor::zeros({N, Cout, OH, OW});
    std::vector<double> cols_n(static_cast<size_t>(CKK) * Sin);
    for (int n = 0; n < N; ++n) {
      for (int r = 0; r < CKK; ++r)
        std::memcpy(cols_n.data() + static_cast<size_t>(r) * Sin,
                    cols.data() + (static_cast<size_t>(r) * N + n) * Sin,
                    sizeof(double) * static_cast<size_t>(Sin));
      detail::col2im_add(cols_n.data(), Cout, OH, OW, k, stride, pad, IH, IW,
                         out.data.data() + static_cast<size_t>(n) * Cout * OH * OW);
    }
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < Cout; ++c) {
        double* dst = out.data.data() + (static_cast<size_t>(n) * Cout + c) * OH * OW;
        const double bvv = bv.data[static_cast<size_t>(c)];
        for (int i = 0; i < OH * OW; ++i) dst[i] += bvv;
      }

    auto xmat_cache = std::make_shared<std::vector<double>>(std::move(xmat));
    Var y = make_node(std::move(out), {x, w, b});
    set_backfn(y, [xi = x.idx, wi = w.idx, bi = b.idx, yi = y.idx, xmat_cache, N, Cin, IH, IW,
                   Cout, k, stride, pad, OH, OW](Tape& t) {
      const Tensor& dy = t.nodes_[static_cast<size_t>(yi)].grad;
      const int Sin = IH * IW;
      const int CKK = Cout * k * k;
      const bool need_dx = t.nodes_[static_cast<size_t>(xi)].requires_grad;
      const bool need_dw = t.nodes_[static_cast<size_t>(wi)].requires_grad;
      const bool need_db = t.nodes_[static_cast<size_t>(bi)].requires_grad;

      if (need_dx || need_dw) {
        // dycols[CKK, N*Sin]: unfold dy with the forward geometry.
        std::vector<double> dycols(static_cast<size_t>(CKK) * N * Sin);
        std::vector<double> buf(static_cast<size_t>(CKK) * Sin);
        for (int n = 0; n < N; ++n) {
          detail::im2col(dy.data.data() + static_cast<size_t>(n) * Cout * OH * OW, Cout, OH, OW, k,
                         stride, pad, IH, IW, buf.data());
          for (int r = 0; r < CKK; ++r)
            std::memcpy(dycols.data() + (static_cast<size_t>(r) * N + n) * Sin,
                        buf.data() + static_cast<size_t>(r) * Sin,
                        sizeof(double) * static_cast<size_t>(Sin));
        }
        if (need_dx) {
          const Tensor& wv2 = t.nodes_[static_cast<size_t>(wi)].value;
          std::vector<double> dxmat(static_cast<size_t>(Cin) * N * Sin, 0.0);
          detail::gemm_nn(Cin, CKK, N * Sin, wv2.data.data(), dycols.data(), dxmat.data());
          Tensor& dx = t.grad_buf(xi);
          for (int n = 0; n < N; ++n)
            for (int c = 0; c < Cin; ++c) {
              const double* src = dxmat.data() + (static_cast<size_t>(c) * N + n) * Sin;
              double* dst = dx.data.data() + (static_cast<size_t>(n) * Cin + c) * Sin;
              for (int i = 0; i < Sin; ++i) dst[i] += src[i];
            }
        }
        if (need_dw) {
          std::vector<double> dycols_t(static_cast<size_t>(N) * Sin * CKK);
          detail::transpose(CKK, N * Sin, dycols.data(), dycols_t.data());
          Tensor& dw = t.grad_buf(wi);
          detail::gemm_nn(Cin, N * Sin, CKK, xmat_cache->data(), dycols_t.data(), dw.data.data());
        }
      }
      if (need_db) {
        Tensor& db = t.grad_buf(bi);
        for (int n = 0; n < N; ++n)
          for (int c = 0; c < Cout; ++c) {
            const double* src = dy.data.data() + (static_cast<size_t>(n) * Cout + c) * OH * OW;
            double s = 0.0;
            for (int i = 0; i < OH * OW; ++i) s += src[i];
            db.data[static_cast<size_t>(c)] += s;
          }
      }
    });
    return y;
  }

  // ---- backward ----

  /// Populates grads of every node the scalar loss depends on. Frozen leaves
  /// (requires_grad=false) are skipped entirely.
  void backward(Var loss) {
    Node& ln = nodes_[static_cast<size_t>(loss.idx)];
    if (ln.value.size() != 1)
      throw ShapeError("backward: loss must be scalar, got shape " + shape_str(ln.value.shape));
    if (!ln.requires_grad) return;  // loss does not depend on any trainable leaf
    grad_buf(loss.idx).data[0] += 1.0;
    for (int i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.requires_grad || n.grad.empty() || !n.backfn) continue;
      n.backfn(*this);
    }
  }

  /// Grad tensor of node i, allocated as zeros on first touch.
  Tensor& grad_buf(int i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
  }

 private:
  std::vector<Node> nodes_;

  Var make_node(Tensor value, std::initializer_list<Var> parents) {
    bool rg = false;
    for (Var p : parents) rg = rg || nodes_[static_cast<size_t>(p.idx)].requires_grad;
    nodes_.push_back(Node{std::move(value), Tensor{}, rg, nullptr});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void set_backfn(Var v, std::function<void(Tape&)> fn) {
    nodes_[static_cast<size_t>(v.idx)].backfn = std::move(fn);
  }

  // Common wrapper for unary ops whose backward needs (dy, dx) only.
  template <typename Fn>
  Var unary(Var x, Tensor out, Fn fn) {
    Var y = make_node(std::move(out), {x});
    set_backfn(y, [xi = x.idx, yi = y.idx, fn](Tape& t) {
      if (!t.nodes_[static_cast<size_t>(xi)].requires_grad) return;
      const Tensor& dy = t.nodes_[static_cast<size_t>(yi)].grad;
      fn(t, dy, t.grad_buf(xi));
    });
    return y;
  }

  Var unary_placeholder(Var x, Tensor out) { return make_node(std::move(out), {x}); }

  template <typename FnA, typename FnB>
  Var binary(Var a, Var b, Tensor out, FnA fa, FnB fb) {
    Var y = make_node(std::move(out), {a, b});
    set_backfn(y, [ai = a.idx, bi = b.idx, yi = y.idx, fa, fb](Tape& t) {
      const Tensor& dy = t.nodes_[static_cast<size_t>(yi)].grad;
      if (t.nodes_[static_cast<size_t>(ai)].requires_grad) fa(t, dy, t.grad_buf(ai));
      if (t.nodes_[static_cast<size_t>(bi)].requires_grad) fb(t, dy, t.grad_buf(bi));
    });
    return y;
  }

  static void check_conv_args(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                              int pad, bool transposed) {
    const char* op = transposed ? "deconv2d" : "conv2d";
    if (x.shape.size() != 4 || w.shape.size() != 4)
      throw ShapeError(std::string(op) + ": expected 4-d input and kernel, got " +
                       shape_str(x.shape) + " and " + shape_str(w.shape));
    if (stride < 1 || pad < 0)
      throw ShapeError(std::string(op) + ": invalid stride/pad");
    const int chan_dim = transposed ? 0 : 1;
    if (x.shape[1] != w.shape[chan_dim])
      throw ShapeError(std::string(op) + ": input channels of " + shape_str(x.shape) +
                       " do not match kernel " + shape_str(w.shape));
    if (w.shape[2] != w.shape[3])
      throw ShapeError(std::string(op) + ": only square kernels supported, got " +
                       shape_str(w.shape));
    const int bdim = transposed ? w.shape[1] : w.shape[0];
    if (b.size() != bdim)
      throw ShapeError(std::string(op) + ": bias " + shape_str(b.shape) +
                       " does not match kernel " + shape_str(w.shape));
    if (!transposed) {
      const int k = w.shape[2];
      if (x.shape[2] + 2 * pad < k || x.shape[3] + 2 * pad < k)
        throw ShapeError("conv2d: kernel " + shape_str(w.shape) + " does not fit input " +
                         shape_str(x.shape) + " with pad " + std::to_string(pad));
    }
  }

  Var conv2d_impl(Var x, Var w, Var b, int stride, int pad, int N, int C, int H, int W, int K,
                  int k, int OH, int OW);
};

inline Var Tape::conv2d_impl(Var x, Var w, Var b, int stride, int pad, int N, int C, int H, int W,
                             int K, int k, int OH, int OW) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  const int S = OH * OW;
  const int CKK = C * k * k;

  // Batched im2col: sample n owns the column block [n*S, (n+1)*S).
  auto cols = std::make_shared<std::vector<double>>(static_cast<size_t>(CKK) * N * S);
  {
    std::vector<double> buf(static_cast<size_t>(CKK) * S);
    for (int n = 0; n < N; ++n) {
      detail::im2col(xv.data.data() + static_cast<size_t>(n) * C * H * W, C, H, W, k, stride, pad,
                     OH, OW, buf.data());
      for (int r = 0; r < CKK; ++r)
        std::memcpy(cols->data() + (static_cast<size_t>(r) * N + n) * S,
                    buf.data() + static_cast<size_t>(r) * S, sizeof(double) * static_cast<size_t>(S));
    }
  }

  // ymat[K, N*S] = wmat[K, CKK] * cols
  std::vector<double> ymat(static_cast<size_t>(K) * N * S, 0.0);
  detail::gemm_nn(K, CKK, N * S, wv.data.data(), cols->data(), ymat.data());

  Tensor out = Tensor::zeros({N, K, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int kk = 0; kk < K; ++kk) {
      const double* src = ymat.data() + (static_cast<size_t>(kk) * N + n) * S;
      double* dst = out.data.data() + (static_cast<size_t>(n) * K + kk) * S;
      const double bvv = bv.data[static_cast<size_t>(kk)];
      for (int i = 0; i < S; ++i) dst[i] = src[i] + bvv;
    }

  Var y = make_node(std::move(out), {x, w, b});
  set_backfn(y, [xi = x.idx, wi = w.idx, bi = b.idx, yi = y.idx, cols, N, C, H, W, K, k, stride,
                 pad, OH, OW](Tape& t) {
    const Tensor& dy = t.nodes_[static_cast<size_t>(yi)].grad;
    const int S = OH * OW;
    const int CKK = C * k * k;
    const bool need_dx = t.nodes_[static_cast<size_t>(xi)].requires_grad;
    const bool need_dw = t.nodes_[static_cast<size_t>(wi)].requires_grad;
    const bool need_db = t.nodes_[static_cast<size_t>(bi)].requires_grad;

    std::vector<double> dymat;
    if (need_dx || need_dw) {
      dymat.resize(static_cast<size_t>(K) * N * S);
      for (int n = 0; n < N; ++n)
        for (int kk = 0; kk < K; ++kk)
          std::memcpy(dymat.data() + (static_cast<size_t>(kk) * N + n) * S,
                      dy.data.data() + (static_cast<size_t>(n) * K + kk) * S,
                      sizeof(double) * static_cast<size_t>(S));
    }
    if (need_dw) {
      // dw[K, CKK] += dymat * cols^T
      std::vector<double> colst(static_cast<size_t>(N) * S * CKK);
      detail::transpose(CKK, N * S, cols->data(), colst.data());
      Tensor& dw = t.grad_buf(wi);
      detail::gemm_nn(K, N * S, CKK, dymat.data(), colst.data(), dw.data.data());
    }
    if (need_dx) {
      const Tensor& wv2 = t.nodes_[static_cast<size_t>(wi)].value;
      std::vector<double> wt(static_cast<size_t>(CKK) * K);
      detail::transpose(K, CKK, wv2.data.data(), wt.data());
      std::vector<double> dcols(static_cast<size_t>(CKK) * N * S, 0.0);
      detail::gemm_nn(CKK, K, N * S, wt.data(), dymat.data(), dcols.data());
      Tensor& dx = t.grad_buf(xi);
      std::vector<double> buf(static_cast<size_t>(CKK) * S);
      for (int n = 0; n < N; ++n) {
        for (int r = 0; r < CKK; ++r)
          std::memcpy(buf.data() + static_cast<size_t>(r) * S,
                      dcols.data() + (static_cast<size_t>(r) * N + n) * S,
                      sizeof(double) * static_cast<size_t>(S));
        detail::col2im_add(buf.data(), C, H, W, k, stride, pad, OH, OW,
                           dx.data.data() + static_cast<size_t>(n) * C * H * W);
      }
    }
    if (need_db) {
      Tensor& db = t.grad_buf(bi);
      for (int n = 0; n < N; ++n)
        for (int kk = 0; kk < K; ++kk) {
          const double* src = dy.data.data() + (static_cast<size_t>(n) * K + kk) * S;
          double s = 0.0;
          for (int i = 0; i < S; ++i) s += src[i];
          db.data[static_cast<size_t>(kk)] += s;
        }
    }
  });
  return y;
}

}  // namespace s2pd::nd
