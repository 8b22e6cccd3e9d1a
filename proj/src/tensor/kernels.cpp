#include "vf/tensor/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstddef>
#include <vector>

namespace vf::kernels {

namespace {

// Work below this many multiply-adds stays on the calling thread.
constexpr long kParallelThreshold = 1L << 16;

template <typename T>
inline void axpy_row(int n, T a, const T* __restrict x, T* __restrict y) {
  for (int j = 0; j < n; ++j) y[j] += a * x[j];
}

template <typename T>
void im2col(const Conv2dGeometry& g, const T* in, T* cols) {
  const int oh = g.out_h(), ow = g.out_w();
  const int c = g.in_c;
  T* dst = cols;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ky = 0; ky < g.k_h; ++ky) {
        const int iy = oy * g.stride - g.pad_h + ky;
        for (int kx = 0; kx < g.k_w; ++kx) {
          const int ix = ox * g.stride - g.pad_w + kx;
          if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
            std::fill(dst, dst + c, T{0});
          } else {
            const T* src = in + (static_cast<std::size_t>(iy) * g.in_w + ix) * c;
            std::copy(src, src + c, dst);
          }
          dst += c;
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const Conv2dGeometry& g, const T* cols, T* in) {
  const int oh = g.out_h(), ow = g.out_w();
  const int c = g.in_c;
  const T* src = cols;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ky = 0; ky < g.k_h; ++ky) {
        const int iy = oy * g.stride - g.pad_h + ky;
        for (int kx = 0; kx < g.k_w; ++kx) {
          const int ix = ox * g.stride - g.pad_w + kx;
          if (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w) {
            T* dst = in + (static_cast<std::size_t>(iy) * g.in_w + ix) * c;
            for (int ci = 0; ci < c; ++ci) dst[ci] += src[ci];
          }
          src += c;
        }
      }
    }
  }
}

template <typename T>
void gemm_nn_rows(int row_begin, int row_end, int n, int k, const T* a, const T* b, T* c) {
  int i = row_begin;
  for (; i + 4 <= row_end; i += 4) {
    T* __restrict c0 = c + static_cast<std::size_t>(i) * n;
    T* __restrict c1 = c0 + n;
    T* __restrict c2 = c1 + n;
    T* __restrict c3 = c2 + n;
    const T* a0 = a + static_cast<std::size_t>(i) * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    for (int p = 0; p < k; ++p) {
      const T* __restrict bp = b + static_cast<std::size_t>(p) * n;
      const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
      for (int j = 0; j < n; ++j) {
        const T bj = bp[j];
        c0[j] += v0 * bj;
        c1[j] += v1 * bj;
        c2[j] += v2 * bj;
        c3[j] += v3 * bj;
      }
    }
  }
  for (; i < row_end; ++i) {
    T* ci = c + static_cast<std::size_t>(i) * n;
    const T* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) axpy_row(n, ai[p], b + static_cast<std::size_t>(p) * n, ci);
  }
}

}  // namespace

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c) {
  const long work = static_cast<long>(m) * n * k;
  if (work < kParallelThreshold || omp_get_max_threads() == 1) {
    gemm_nn_rows(0, m, n, k, a, b, c);
    return;
  }
  const int blocks = (m + 3) / 4;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    gemm_nn_rows(blk * 4, std::min(m, blk * 4 + 4), n, k, a, b, c);
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c) {
  constexpr int kRowBlock = 16;
  const int blocks = (m + kRowBlock - 1) / kRowBlock;
  const long work = static_cast<long>(m) * n * k;
#pragma omp parallel for schedule(static) if (work >= kParallelThreshold)
  for (int blk = 0; blk < blocks; ++blk) {
    const int i0 = blk * kRowBlock;
    const int i1 = std::min(m, i0 + kRowBlock);
    for (int p = 0; p < k; ++p) {
      const T* ap = a + static_cast<std::size_t>(p) * m;
      const T* bp = b + static_cast<std::size_t>(p) * n;
      for (int i = i0; i < i1; ++i) {
        axpy_row(n, ap[i], bp, c + static_cast<std::size_t>(i) * n);
      }
    }
  }
}

template <typename T>
void transpose(int rows, int cols, const T* in, T* out) {
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(c) * rows + r] = in[static_cast<std::size_t>(r) * cols + c];
    }
  }
}

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* bias,
                    T* output) {
  const int positions = g.out_h() * g.out_w();
  const int patch = g.patch();
  const std::size_t in_stride = static_cast<std::size_t>(g.in_h) * g.in_w * g.in_c;
  const std::size_t out_stride = static_cast<std::size_t>(positions) * g.out_c;
  const long work = static_cast<long>(g.batch) * positions * patch * g.out_c;
#pragma omp parallel if (work >= kParallelThreshold && g.batch > 1)
  {
    std::vector<T> cols(static_cast<std::size_t>(positions) * patch);
#pragma omp for schedule(static)
    for (int s = 0; s < g.batch; ++s) {
      im2col(g, input + s * in_stride, cols.data());
      T* out = output + s * out_stride;
      for (int p = 0; p < positions; ++p) {
        std::copy(bias, bias + g.out_c, out + static_cast<std::size_t>(p) * g.out_c);
      }
      gemm_nn_rows(0, positions, g.out_c, patch, cols.data(), kernel, out);
    }
  }
}

template <typename T>
void conv2d_backward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* grad_out,
                     T* grad_input, T* grad_kernel, T* grad_bias) {
  const int positions = g.out_h() * g.out_w();
  const int patch = g.patch();
  const std::size_t in_stride = static_cast<std::size_t>(g.in_h) * g.in_w * g.in_c;
  const std::size_t out_stride = static_cast<std::size_t>(positions) * g.out_c;

  if (grad_bias) {
    for (int s = 0; s < g.batch; ++s) {
      const T* go = grad_out + s * out_stride;
      for (int p = 0; p < positions; ++p) {
        axpy_row(g.out_c, T{1}, go + static_cast<std::size_t>(p) * g.out_c, grad_bias);
      }
    }
  }

  if (grad_kernel) {
    std::vector<T> cols(static_cast<std::size_t>(positions) * patch);
    for (int s = 0; s < g.batch; ++s) {
      im2col(g, input + s * in_stride, cols.data());
      gemm_tn(patch, g.out_c, positions, cols.data(), grad_out + s * out_stride, grad_kernel);
    }
  }

  if (grad_input) {
    std::vector<T> kernel_t(static_cast<std::size_t>(patch) * g.out_c);
    transpose(patch, g.out_c, kernel, kernel_t.data());
    const long work = static_cast<long>(g.batch) * positions * patch * g.out_c;
#pragma omp parallel if (work >= kParallelThreshold && g.batch > 1)
    {
      std::vector<T> dcols(static_cast<std::size_t>(positions) * patch);
#pragma omp for schedule(static)
      for (int s = 0; s < g.batch; ++s) {
        std::fill(dcols.begin(), dcols.end(), T{0});
        gemm_nn_rows(0, positions, patch, g.out_c, grad_out + s * out_stride, kernel_t.data(),
                     dcols.data());
        col2im_add(g, dcols.data(), grad_input + s * in_stride);
      }
    }
  }
}

template <typename T>
void linear_forward(int batch, int in, int out, const T* x, const T* w, const T* b, T* y) {
  for (int s = 0; s < batch; ++s) std::copy(b, b + out, y + static_cast<std::size_t>(s) * out);
  gemm_nn(batch, out, in, x, w, y);
}

template <typename T>
void linear_backward(int batch, int in, int out, const T* x, const T* w, const T* grad_y,
                     T* grad_x, T* grad_w, T* grad_b) {
  if (grad_b) {
    for (int s = 0; s < batch; ++s) axpy_row(out, T{1}, grad_y + static_cast<std::size_t>(s) * out, grad_b);
  }
  if (grad_w) gemm_tn(in, out, batch, x, grad_y, grad_w);
  if (grad_x) {
    std::vector<T> w_t(static_cast<std::size_t>(in) * out);
    transpose(in, out, w, w_t.data());
    gemm_nn(batch, in, out, grad_y, w_t.data(), grad_x);
  }
}

namespace reference {

template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc{0};
      for (int p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] += acc;
    }
  }
}

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* bias,
                    T* output) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int s = 0; s < g.batch; ++s) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int co = 0; co < g.out_c; ++co) {
          T acc = bias[co];
          for (int ky = 0; ky < g.k_h; ++ky) {
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int iy = oy * g.stride - g.pad_h + ky;
              const int ix = ox * g.stride - g.pad_w + kx;
              if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
              for (int ci = 0; ci < g.in_c; ++ci) {
                acc += input[((static_cast<std::size_t>(s) * g.in_h + iy) * g.in_w + ix) * g.in_c + ci] *
                       kernel[((static_cast<std::size_t>(ky) * g.k_w + kx) * g.in_c + ci) * g.out_c + co];
              }
            }
          }
          output[((static_cast<std::size_t>(s) * oh + oy) * ow + ox) * g.out_c + co] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* grad_out,
                     T* grad_input, T* grad_kernel, T* grad_bias) {
  const int oh = g.out_h(), ow = g.out_w();
  for (int s = 0; s < g.batch; ++s) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int co = 0; co < g.out_c; ++co) {
          const T go = grad_out[((static_cast<std::size_t>(s) * oh + oy) * ow + ox) * g.out_c + co];
          if (grad_bias) grad_bias[co] += go;
          for (int ky = 0; ky < g.k_h; ++ky) {
            for (int kx = 0; kx < g.k_w; ++kx) {
              const int iy = oy * g.stride - g.pad_h + ky;
              const int ix = ox * g.stride - g.pad_w + kx;
              if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) continue;
              for (int ci = 0; ci < g.in_c; ++ci) {
                const std::size_t ii = ((static_cast<std::size_t>(s) * g.in_h + iy) * g.in_w + ix) * g.in_c + ci;
                const std::size_t ki = ((static_cast<std::size_t>(ky) * g.k_w + kx) * g.in_c + ci) * g.out_c + co;
                if (grad_input) grad_input[ii] += go * kernel[ki];
                if (grad_kernel) grad_kernel[ki] += go * input[ii];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace reference

#define VF_INSTANTIATE_KERNELS(T)                                                              \
  template void gemm_nn<T>(int, int, int, const T*, const T*, T*);                           \
  template void gemm_tn<T>(int, int, int, const T*, const T*, T*);                           \
  template void transpose<T>(int, int, const T*, T*);                                        \
  template void conv2d_forward<T>(const Conv2dGeometry&, const T*, const T*, const T*, T*);  \
  template void conv2d_backward<T>(const Conv2dGeometry&, const T*, const T*, const T*, T*,  \
                                   T*, T*);                                                  \
  template void linear_forward<T>(int, int, int, const T*, const T*, const T*, T*);          \
  template void linear_backward<T>(int, int, int, const T*, const T*, const T*, T*, T*, T*); \
  template void reference::gemm<T>(int, int, int, const T*, const T*, T*);                   \
  template void reference::conv2d_forward<T>(const Conv2dGeometry&, const T*, const T*,      \
                                             const T*, T*);                                  \
  template void reference::conv2d_backward<T>(const Conv2dGeometry&, const T*, const T*,     \
                                              const T*, T*, T*, T*);

VF_INSTANTIATE_KERNELS(float)
VF_INSTANTIATE_KERNELS(double)

}  // namespace vf::kernels
