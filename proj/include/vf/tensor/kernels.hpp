#pragma once

// Compute kernels behind the autograd ops.
//
// The parallel kernels split work so that every output element is accumulated
// by exactly one thread in a fixed order; results are therefore bitwise
// independent of the thread count and of the batch size. The `reference`
// namespace holds plain serial loops used as test oracles and benchmark
// baselines.

#include <span>

namespace vf::kernels {

// Row-major, no aliasing between C and A/B.
// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c);

// C[m x n] += A^T * B  where A is [k x m], B is [k x n]
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c);

// out[cols x rows] = in[rows x cols]^T
template <typename T>
void transpose(int rows, int cols, const T* in, T* out);

struct Conv2dGeometry {
  int batch = 1;
  int in_h = 1, in_w = 1, in_c = 1;
  int k_h = 1, k_w = 1, out_c = 1;
  int stride = 1;
  int pad_h = 0, pad_w = 0;

  int out_h() const { return (in_h + 2 * pad_h - k_h) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad_w - k_w) / stride + 1; }
  int patch() const { return k_h * k_w * in_c; }
};

// Layouts: input NHWC, kernel [k_h, k_w, in_c, out_c], output NHWC.
template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* bias,
                    T* output);

// Gradients are accumulated (+=). Any of the grad pointers may be null.
template <typename T>
void conv2d_backward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* grad_out,
                     T* grad_input, T* grad_kernel, T* grad_bias);

// y[n x out] = x[n x in] * W[in x out] + b
template <typename T>
void linear_forward(int batch, int in, int out, const T* x, const T* w, const T* b, T* y);

template <typename T>
void linear_backward(int batch, int in, int out, const T* x, const T* w, const T* grad_y,
                     T* grad_x, T* grad_w, T* grad_b);

namespace reference {

template <typename T>
void gemm(int m, int n, int k, const T* a, const T* b, T* c);

// Direct sliding-window convolution.
template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* bias,
                    T* output);

template <typename T>
void conv2d_backward(const Conv2dGeometry& g, const T* input, const T* kernel, const T* grad_out,
                     T* grad_input, T* grad_kernel, T* grad_bias);

}  // namespace reference

}  // namespace vf::kernels
