#include "vf/tensor/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vf/tensor/kernels.hpp"

namespace vf {

namespace {

template <typename T>
T sigmoid_of(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void require_finite(const Tensor<T>& t, const char* op) {
  if (!t.all_finite()) fail(ErrorKind::Numeric, std::string(op) + " produced a non-finite value");
}

}  // namespace

template <typename T>
Var GradTape<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var GradTape<T>::input(Tensor<T> value, bool requires_grad) {
  Node n;
  n.owned = std::move(value);
  n.needs_grad = requires_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::parameter(const Tensor<T>& value, Tensor<T>* grad_sink) {
  Node n;
  n.ref = &value;
  n.sink = grad_sink;
  n.needs_grad = grad_sink != nullptr;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::conv2d(Var input, Var kernel, Var bias, int stride, int pad_h, int pad_w) {
  const Tensor<T>& x = val(input.id);
  const Tensor<T>& k = val(kernel.id);
  const Tensor<T>& b = val(bias.id);
  if (x.rank() != 4 || k.rank() != 4) {
    fail(ErrorKind::Dimension, "conv2d expects NHWC input and 4-D kernel, got " +
                                   shape_string(x.shape()) + " and " + shape_string(k.shape()));
  }
  if (x.dim(3) != k.dim(2)) {
    fail(ErrorKind::Dimension, "conv2d channel mismatch: input " + shape_string(x.shape()) +
                                   " vs kernel " + shape_string(k.shape()));
  }
  if (b.size() != static_cast<std::size_t>(k.dim(3))) {
    fail(ErrorKind::Dimension, "conv2d bias " + shape_string(b.shape()) + " does not match kernel " +
                                   shape_string(k.shape()));
  }
  if (stride <= 0 || pad_h < 0 || pad_w < 0) fail(ErrorKind::Dimension, "conv2d: invalid stride/padding");
  kernels::Conv2dGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0), k.dim(1), k.dim(3),
                            stride, pad_h, pad_w};
  if (g.k_h > g.in_h + 2 * pad_h || g.k_w > g.in_w + 2 * pad_w) {
    fail(ErrorKind::Dimension, "conv2d kernel " + shape_string(k.shape()) +
                                   " larger than padded input " + shape_string(x.shape()));
  }
  Node n;
  n.op = Op::Conv2d;
  n.in = {input.id, kernel.id, bias.id};
  n.stride = stride;
  n.pad_h = pad_h;
  n.pad_w = pad_w;
  n.owned = Tensor<T>({g.batch, g.out_h(), g.out_w(), g.out_c});
  kernels::conv2d_forward(g, x.data().data(), k.data().data(), b.data().data(), n.owned.data().data());
  require_finite(n.owned, "conv2d");
  n.needs_grad = nodes_[input.id].needs_grad || nodes_[kernel.id].needs_grad || nodes_[bias.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::linear(Var input, Var weight, Var bias) {
  const Tensor<T>& x = val(input.id);
  const Tensor<T>& w = val(weight.id);
  const Tensor<T>& b = val(bias.id);
  if (w.rank() != 2 || x.rank() < 1 || x.rank() > 2) {
    fail(ErrorKind::Dimension, "linear expects [N,D] input and 2-D weight, got " +
                                   shape_string(x.shape()) + " and " + shape_string(w.shape()));
  }
  const int batch = x.rank() == 2 ? x.dim(0) : 1;
  const int in = x.dim(-1);
  if (in != w.dim(0) || b.size() != static_cast<std::size_t>(w.dim(1))) {
    fail(ErrorKind::Dimension, "linear dimension mismatch: input " + shape_string(x.shape()) +
                                   " weight " + shape_string(w.shape()) + " bias " +
                                   shape_string(b.shape()));
  }
  const int out = w.dim(1);
  Node n;
  n.op = Op::Linear;
  n.in = {input.id, weight.id, bias.id};
  n.owned = x.rank() == 2 ? Tensor<T>({batch, out}) : Tensor<T>({out});
  kernels::linear_forward(batch, in, out, x.data().data(), w.data().data(), b.data().data(),
                          n.owned.data().data());
  require_finite(n.owned, "linear");
  n.needs_grad = nodes_[input.id].needs_grad || nodes_[weight.id].needs_grad || nodes_[bias.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::activation(Var x, Activation kind, T leaky_slope) {
  const Tensor<T>& in = val(x.id);
  Node n;
  n.op = Op::Act;
  n.act = kind;
  n.scalar = leaky_slope;
  n.in = {x.id, -1, -1};
  n.owned = Tensor<T>(in.shape());
  auto src = in.data();
  auto dst = n.owned.data();
  switch (kind) {
    case Activation::LeakyRelu:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > T(0) ? src[i] : leaky_slope * src[i];
      break;
    case Activation::Swish:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * sigmoid_of(src[i]);
      break;
    case Activation::Sigmoid:
      for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid_of(src[i]);
      break;
    case Activation::Softmax: {
      const std::size_t width = static_cast<std::size_t>(in.dim(-1));
      for (std::size_t row = 0; row < src.size(); row += width) {
        const T mx = *std::max_element(src.begin() + row, src.begin() + row + width);
        T total{0};
        for (std::size_t j = 0; j < width; ++j) {
          dst[row + j] = std::exp(src[row + j] - mx);
          total += dst[row + j];
        }
        for (std::size_t j = 0; j < width; ++j) dst[row + j] /= total;
      }
      break;
    }
  }
  require_finite(n.owned, "activation");
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::mul(Var a, Var b) {
  const Tensor<T>& x = val(a.id);
  const Tensor<T>& y = val(b.id);
  if (x.shape() != y.shape()) {
    fail(ErrorKind::Dimension, "mul shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  Node n;
  n.op = Op::Mul;
  n.in = {a.id, b.id, -1};
  n.owned = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.owned[i] = x[i] * y[i];
  require_finite(n.owned, "mul");
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::add(Var a, Var b) {
  const Tensor<T>& x = val(a.id);
  const Tensor<T>& y = val(b.id);
  if (x.shape() != y.shape()) {
    fail(ErrorKind::Dimension, "add shape mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  Node n;
  n.op = Op::Add;
  n.in = {a.id, b.id, -1};
  n.owned = Tensor<T>(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) n.owned[i] = x[i] + y[i];
  require_finite(n.owned, "add");
  n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::scale(Var x, T factor) {
  const Tensor<T>& in = val(x.id);
  Node n;
  n.op = Op::Scale;
  n.in = {x.id, -1, -1};
  n.scalar = factor;
  n.owned = Tensor<T>(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) n.owned[i] = in[i] * factor;
  require_finite(n.owned, "scale");
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::reshape(Var x, Shape shape) {
  Node n;
  n.op = Op::Reshape;
  n.in = {x.id, -1, -1};
  n.owned = val(x.id).reshaped(std::move(shape));
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
Var GradTape<T>::flatten(Var x) {
  const Tensor<T>& in = val(x.id);
  const int batch = in.dim(0);
  return reshape(x, {batch, static_cast<int>(in.size() / static_cast<std::size_t>(batch))});
}

template <typename T>
Var GradTape<T>::normalize(Var x, std::span<const T> mean, std::span<const T> std, T eps) {
  const Tensor<T>& in = val(x.id);
  const std::size_t channels = static_cast<std::size_t>(in.dim(-1));
  if (mean.size() != channels || std.size() != channels) {
    fail(ErrorKind::Dimension, "normalize: statistics have " + std::to_string(mean.size()) +
                                   " channels, input " + shape_string(in.shape()));
  }
  Node n;
  n.op = Op::Normalize;
  n.in = {x.id, -1, -1};
  n.aux.resize(2 * channels);
  for (std::size_t c = 0; c < channels; ++c) {
    n.aux[c] = mean[c];
    n.aux[channels + c] = std[c] + eps;
  }
  n.owned = Tensor<T>(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t c = i % channels;
    n.owned[i] = (in[i] - n.aux[c]) / n.aux[channels + c];
  }
  require_finite(n.owned, "normalize");
  n.needs_grad = nodes_[x.id].needs_grad;
  return push(std::move(n));
}

template <typename T>
const Tensor<T>& GradTape<T>::value(Var v) const {
  return val(v.id);
}

template <typename T>
const Tensor<T>& GradTape<T>::grad(Var v) const {
  return nodes_.at(static_cast<std::size_t>(v.id)).grad;
}

template <typename T>
Tensor<T>& GradTape<T>::grad_slot(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor<T>(val(id).shape());
  return n.grad;
}

template <typename T>
void GradTape<T>::backward(Var output, const Tensor<T>& seed) {
  const Seed one{output, &seed};
  backward(std::span<const Seed>(&one, 1));
}

template <typename T>
void GradTape<T>::backward(std::span<const Seed> seeds) {
  for (auto& n : nodes_) n.grad = Tensor<T>();
  int last = -1;
  for (const Seed& s : seeds) {
    const Tensor<T>& out = val(s.output.id);
    if (s.grad->size() != out.size()) {
      fail(ErrorKind::Dimension, "backward seed " + shape_string(s.grad->shape()) + " does not match output " +
                                     shape_string(out.shape()));
    }
    Tensor<T>& g = grad_slot(s.output.id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*s.grad)[i];
    last = std::max(last, s.output.id);
  }
  for (int id = last; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty() || !n.needs_grad) continue;
    if (n.op == Op::Leaf) {
      if (n.sink) {
        if (n.sink->empty()) *n.sink = Tensor<T>(val(id).shape());
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*n.sink)[i] += n.grad[i];
      }
      continue;
    }
    backward_node(n);
  }
}

template <typename T>
void GradTape<T>::backward_node(Node& n) {
  auto wants = [&](int id) { return id >= 0 && nodes_[static_cast<std::size_t>(id)].needs_grad; };
  const Tensor<T>& gy = n.grad;
  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::Conv2d: {
      const Tensor<T>& x = val(n.in[0]);
      const Tensor<T>& k = val(n.in[1]);
      kernels::Conv2dGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), k.dim(0), k.dim(1), k.dim(3),
                                n.stride, n.pad_h, n.pad_w};
      T* gx = wants(n.in[0]) ? grad_slot(n.in[0]).data().data() : nullptr;
      T* gk = wants(n.in[1]) ? grad_slot(n.in[1]).data().data() : nullptr;
      T* gb = wants(n.in[2]) ? grad_slot(n.in[2]).data().data() : nullptr;
      kernels::conv2d_backward(g, x.data().data(), k.data().data(), gy.data().data(), gx, gk, gb);
      break;
    }
    case Op::Linear: {
      const Tensor<T>& x = val(n.in[0]);
      const Tensor<T>& w = val(n.in[1]);
      const int batch = x.rank() == 2 ? x.dim(0) : 1;
      T* gx = wants(n.in[0]) ? grad_slot(n.in[0]).data().data() : nullptr;
      T* gw = wants(n.in[1]) ? grad_slot(n.in[1]).data().data() : nullptr;
      T* gb = wants(n.in[2]) ? grad_slot(n.in[2]).data().data() : nullptr;
      kernels::linear_backward(batch, w.dim(0), w.dim(1), x.data().data(), w.data().data(),
                               gy.data().data(), gx, gw, gb);
      break;
    }
    case Op::Act: {
      if (!wants(n.in[0])) break;
      const Tensor<T>& x = val(n.in[0]);
      const Tensor<T>& y = n.owned;
      Tensor<T>& gx = grad_slot(n.in[0]);
      switch (n.act) {
        case Activation::LeakyRelu:
          for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i] * (x[i] > T(0) ? T(1) : n.scalar);
          break;
        case Activation::Swish:
          for (std::size_t i = 0; i < x.size(); ++i) {
            const T s = sigmoid_of(x[i]);
            gx[i] += gy[i] * (s + x[i] * s * (T(1) - s));
          }
          break;
        case Activation::Sigmoid:
          for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i] * y[i] * (T(1) - y[i]);
          break;
        case Activation::Softmax: {
          const std::size_t width = static_cast<std::size_t>(x.dim(-1));
          for (std::size_t row = 0; row < x.size(); row += width) {
            T dot{0};
            for (std::size_t j = 0; j < width; ++j) dot += gy[row + j] * y[row + j];
            for (std::size_t j = 0; j < width; ++j) gx[row + j] += y[row + j] * (gy[row + j] - dot);
          }
          break;
        }
      }
      break;
    }
    case Op::Mul: {
      const Tensor<T>& a = val(n.in[0]);
      const Tensor<T>& b = val(n.in[1]);
      if (wants(n.in[0])) {
        Tensor<T>& ga = grad_slot(n.in[0]);
        for (std::size_t i = 0; i < a.size(); ++i) ga[i] += gy[i] * b[i];
      }
      if (wants(n.in[1])) {
        Tensor<T>& gb = grad_slot(n.in[1]);
        for (std::size_t i = 0; i < b.size(); ++i) gb[i] += gy[i] * a[i];
      }
      break;
    }
    case Op::Add: {
      for (int k = 0; k < 2; ++k) {
        if (!wants(n.in[k])) continue;
        Tensor<T>& g = grad_slot(n.in[k]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      }
      break;
    }
    case Op::Scale: {
      if (!wants(n.in[0])) break;
      Tensor<T>& g = grad_slot(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] * n.scalar;
      break;
    }
    case Op::Reshape: {
      if (!wants(n.in[0])) break;
      Tensor<T>& g = grad_slot(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i];
      break;
    }
    case Op::Normalize: {
      if (!wants(n.in[0])) break;
      Tensor<T>& g = grad_slot(n.in[0]);
      const std::size_t channels = n.aux.size() / 2;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[i] / n.aux[channels + i % channels];
      break;
    }
  }
}

template class GradTape<float>;
template class GradTape<double>;

}  // namespace vf
