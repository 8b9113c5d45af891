#pragma once

#include <cstdint>
#include <cstring>
#include <vector>

namespace s2pd::nd::detail {

/// C[M,N] += A[M,K] * B[K,N], all row-major. The ikj/axpy loop order keeps the
/// inner loop free of reductions so it auto-vectorizes without -ffast-math,
/// which matters: results must be bit-reproducible run to run.
inline void gemm_nn(int M, int K, int N, const double* A, const double* B, double* C) {
  for (int i = 0; i < M; ++i) {
    const double* a = A + static_cast<size_t>(i) * K;
    double* c = C + static_cast<size_t>(i) * N;
    for (int k = 0; k < K; ++k) {
      const double av = a[k];
      if (av == 0.0) continue;
      const double* b = B + static_cast<size_t>(k) * N;
      for (int j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

/// dst[C,R] = src[R,C]^T
inline void transpose(int R, int C, const double* src, double* dst) {
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) dst[static_cast<size_t>(c) * R + r] = src[static_cast<size_t>(r) * C + c];
}

/// Unfold one [C,H,W] plane into cols[C*k*k, OH*OW] for stride s, zero pad p.
inline void im2col(const double* x, int C, int H, int W, int k, int s, int p, int OH, int OW,
                   double* cols) {
  const int S = OH * OW;
  for (int c = 0; c < C; ++c) {
    const double* xc = x + static_cast<size_t>(c) * H * W;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* row = cols + static_cast<size_t>((c * k + ki) * k + kj) * S;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * s - p + ki;
          double* out = row + static_cast<size_t>(oh) * OW;
          if (ih < 0 || ih >= H) {
            std::memset(out, 0, sizeof(double) * static_cast<size_t>(OW));
            continue;
          }
          const double* xr = xc + static_cast<size_t>(ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * s - p + kj;
            out[ow] = (iw >= 0 && iw < W) ? xr[iw] : 0.0;
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-add cols[C*k*k, OH*OW] back into x[C,H,W].
inline void col2im_add(const double* cols, int C, int H, int W, int k, int s, int p, int OH,
                       int OW, double* x) {
  const int S = OH * OW;
  for (int c = 0; c < C; ++c) {
    double* xc = x + static_cast<size_t>(c) * H * W;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* row = cols + static_cast<size_t>((c * k + ki) * k + kj) * S;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * s - p + ki;
          if (ih < 0 || ih >= H) continue;
          const double* in = row + static_cast<size_t>(oh) * OW;
          double* xr = xc + static_cast<size_t>(ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * s - p + kj;
            if (iw >= 0 && iw < W) xr[iw] += in[ow];
          }
        }
      }
    }
  }
}

}  // namespace s2pd::nd::detail
