#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vf/nn/normalizer.hpp"
#include "vf/tensor/tape.hpp"

namespace vf {

enum class EncoderKind { SimpleCnn, DeepResNet };

// Architecture description. The identifier string encodes every field and is
// what checkpoints compare on load, e.g. "simple_cnn+norm+glu@86x155".
struct ModelSpec {
  EncoderKind encoder = EncoderKind::SimpleCnn;
  bool use_norm = true;
  bool use_glu = true;
  int height = 86;
  int width = 155;

  std::string arch_id() const;
  static ModelSpec from_arch_id(const std::string& id);

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Where features are read out for alignment analysis.
enum class FeatureSite { PostEncoder, PostGlu };

FeatureSite parse_feature_site(const std::string& name);
const char* to_string(FeatureSite site);

// One row of the human-readable architecture table.
struct LayerRow {
  std::string name;
  std::string type;
  Shape output_shape;
  std::string details;
  std::int64_t params = 0;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

struct ForwardResult {
  Var encoded;   // SimpleCNN: z (256); deep: flattened conv features
  Var gated;     // GLU / softmax-gate output, invalid when the model has no gate
  Var features;  // input to the heads (256)
  Var mean;      // [N,3]
  Var value;     // [N,1]
  std::vector<std::pair<std::string, Shape>> stage_shapes;
};

// SimpleCNN (+GLU) or deep residual (+softmax gate) encoder with Gaussian
// policy and value heads. Parameter tensors are owned here; forward() records
// on a caller-provided tape.
template <typename T>
class Model {
 public:
  static constexpr int kFeatureDim = 256;
  static constexpr int kActionDim = 3;
  static constexpr T kLeakySlope = T(0.2);
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  ObservationNormalizer& normalizer() { return normalizer_; }
  const ObservationNormalizer& normalizer() const { return normalizer_; }

  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  Parameter<T>& parameter(std::string_view name);
  const Parameter<T>& parameter(std::string_view name) const;
  bool has_parameter(std::string_view name) const;

  // observations: [N,H,W,1] raw pixels. When the spec uses normalisation the
  // normaliser's current statistics are applied as constants, unless the
  // caller passes pre_normalized observations (rollout storage does). With
  // track_grads, backward() accumulates into each Parameter::grad.
  ForwardResult forward(GradTape<T>& tape, Tensor<T> observations, bool track_grads,
                        bool pre_normalized = false) const;

  // Clamped per-dimension log standard deviation of the policy.
  std::vector<T> log_std() const;

  void zero_grad();
  std::int64_t parameter_count() const;
  std::vector<LayerRow> layer_table() const;

  template <typename U>
  Model<U> cast() const;

 private:
  template <typename>
  friend class Model;

  struct ConvRef { int kernel, bias, stride, pad; };
  struct LinearRef { int weight, bias; };
  struct Block { ConvRef a, b; };

  Model() = default;
  int add_param(std::string name, Shape shape);
  ConvRef add_conv(const std::string& name, int kh, int kw, int in_c, int out_c, int stride, int pad);
  LinearRef add_linear(const std::string& name, int in, int out);
  void build(std::uint64_t seed);

  Var bind(GradTape<T>& tape, int index, bool track) const;
  Var conv(GradTape<T>& tape, Var x, const ConvRef& c, bool track) const;
  Var dense(GradTape<T>& tape, Var x, const LinearRef& l, bool track) const;

  ModelSpec spec_;
  ObservationNormalizer normalizer_;
  mutable std::vector<Parameter<T>> params_;
  std::map<std::string, int, std::less<>> index_;

  // SimpleCNN
  ConvRef conv1_{}, conv2_{};
  LinearRef fc1_{};
  LinearRef glu_feature_{}, glu_gate_{}, glu_output_{};
  // Deep residual
  ConvRef initial_{};
  std::vector<std::vector<Block>> stages_;
  std::vector<ConvRef> downsample_;
  LinearRef gate_{}, projection_{};
  // Heads
  LinearRef policy_{}, value_{};
  int log_std_ = -1;
};

// Output spatial size of a valid-padded convolution.
constexpr int conv_out(int in, int kernel, int stride, int pad = 0) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Spatial dimensions (h, w) of every deep-encoder stage for the given input,
// or an error naming the first stage that does not fit.
std::vector<std::pair<int, int>> deep_stage_dims(int height, int width);

// Phase-2 construction: copies every parameter and the normaliser of a
// GLU-less SimpleCNN model and adds a freshly initialised GLU block.
template <typename T>
Model<T> graft_glu(const Model<T>& phase1, std::uint64_t seed);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace vf
