#pragma once

#include <array>
#include <span>
#include <vector>

#include "vf/tensor/tensor.hpp"

namespace vf {

// Handle to a value recorded on a GradTape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class Activation { LeakyRelu, Swish, Sigmoid, Softmax };

// Records forward operations and replays them in reverse to accumulate
// gradients. Leaf parameters are referenced, not copied: the caller keeps the
// parameter tensor alive and unchanged until backward() has run.
template <typename T>
class GradTape {
 public:
  // Leaf owned by the tape. requires_grad controls whether grad(v) is filled.
  Var input(Tensor<T> value, bool requires_grad = false);

  // Leaf bound to an external tensor; backward() adds into *grad_sink.
  Var parameter(const Tensor<T>& value, Tensor<T>* grad_sink);

  // input [N,H,W,C_in], kernel [kH,kW,C_in,C_out], bias [C_out] -> [N,H',W',C_out]
  Var conv2d(Var input, Var kernel, Var bias, int stride, int pad_h, int pad_w);

  // input [N,D_in] or [D_in], weight [D_in,D_out], bias [D_out]
  Var linear(Var input, Var weight, Var bias);

  Var activation(Var x, Activation kind, T leaky_slope = T(0.2));
  Var leaky_relu(Var x, T slope) { return activation(x, Activation::LeakyRelu, slope); }
  Var swish(Var x) { return activation(x, Activation::Swish); }
  Var sigmoid(Var x) { return activation(x, Activation::Sigmoid); }
  // Over the last axis.
  Var softmax(Var x) { return activation(x, Activation::Softmax); }

  Var mul(Var a, Var b);
  Var add(Var a, Var b);
  Var scale(Var x, T factor);
  Var reshape(Var x, Shape shape);
  // [N, ...] -> [N, prod(...)]
  Var flatten(Var x);

  // (x - mean[c]) / (std[c] + eps) with c the last axis; statistics are constants.
  Var normalize(Var x, std::span<const T> mean, std::span<const T> std, T eps);

  const Tensor<T>& value(Var v) const;
  // Gradient of the last backward() seed with respect to v. Empty if v does not
  // influence the seeded output or was recorded without requires_grad.
  const Tensor<T>& grad(Var v) const;

  // Seeds d(output) = seed and propagates to every leaf that requires grad.
  void backward(Var output, const Tensor<T>& seed);

  struct Seed {
    Var output;
    const Tensor<T>* grad;
  };
  // Several outputs at once; the shared upstream graph is traversed once.
  void backward(std::span<const Seed> seeds);

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op { Leaf, Conv2d, Linear, Act, Mul, Add, Scale, Reshape, Normalize };

  struct Node {
    Op op = Op::Leaf;
    std::array<int, 3> in{-1, -1, -1};
    Tensor<T> owned;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    Tensor<T>* sink = nullptr;
    bool needs_grad = false;
    Activation act = Activation::LeakyRelu;
    T scalar{0};
    int stride = 1, pad_h = 0, pad_w = 0;
    std::vector<T> aux;  // per-channel mean then (std + eps)
  };

  const Tensor<T>& val(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.ref ? *n.ref : n.owned;
  }
  Var push(Node node);
  Tensor<T>& grad_slot(int id);
  void backward_node(Node& node);

  std::vector<Node> nodes_;
};

extern template class GradTape<float>;
extern template class GradTape<double>;

}  // namespace vf
