#include "vf/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vf/core/rng.hpp"

namespace vf {

namespace {

constexpr int kStageChannels[4] = {64, 128, 256, 512};
// Residual blocks per stage; each block is two 3x3 convolutions, 12 in total.
constexpr int kStageBlocks[4] = {2, 1, 2, 1};

std::string conv_details(int kh, int kw, int stride) {
  return std::to_string(kh) + "x" + std::to_string(kw) + ", stride " + std::to_string(stride);
}

}  // namespace

std::string ModelSpec::arch_id() const {
  std::string id = encoder == EncoderKind::SimpleCnn ? "simple_cnn" : "deep_resnet";
  if (use_norm) id += "+norm";
  if (use_glu) id += "+glu";
  return id + "@" + std::to_string(height) + "x" + std::to_string(width);
}

ModelSpec ModelSpec::from_arch_id(const std::string& id) {
  ModelSpec spec;
  const auto at = id.find('@');
  const auto x = id.find('x', at == std::string::npos ? 0 : at);
  if (at == std::string::npos || x == std::string::npos) {
    fail(ErrorKind::Architecture, "malformed architecture identifier '" + id + "'");
  }
  std::string head = id.substr(0, at);
  std::vector<std::string> parts;
  std::stringstream ss(head);
  for (std::string part; std::getline(ss, part, '+');) parts.push_back(part);
  if (parts.empty()) fail(ErrorKind::Architecture, "empty architecture identifier");
  if (parts[0] == "simple_cnn") {
    spec.encoder = EncoderKind::SimpleCnn;
  } else if (parts[0] == "deep_resnet") {
    spec.encoder = EncoderKind::DeepResNet;
  } else {
    fail(ErrorKind::Architecture, "unknown encoder '" + parts[0] + "'");
  }
  spec.use_norm = std::find(parts.begin(), parts.end(), "norm") != parts.end();
  spec.use_glu = std::find(parts.begin(), parts.end(), "glu") != parts.end();
  try {
    spec.height = std::stoi(id.substr(at + 1, x - at - 1));
    spec.width = std::stoi(id.substr(x + 1));
  } catch (const std::exception&) {
    fail(ErrorKind::Architecture, "malformed resolution in architecture identifier '" + id + "'");
  }
  if (spec.arch_id() != id) fail(ErrorKind::Architecture, "non-canonical architecture identifier '" + id + "'");
  return spec;
}

FeatureSite parse_feature_site(const std::string& name) {
  if (name == "post-encoder") return FeatureSite::PostEncoder;
  if (name == "post-GLU") return FeatureSite::PostGlu;
  fail(ErrorKind::Config, "unknown feature site '" + name + "'; valid sites: {post-encoder, post-GLU}");
}

const char* to_string(FeatureSite site) {
  return site == FeatureSite::PostEncoder ? "post-encoder" : "post-GLU";
}

std::vector<std::pair<int, int>> deep_stage_dims(int height, int width) {
  std::vector<std::pair<int, int>> dims;
  if (height < 4 || width < 4) {
    fail(ErrorKind::Dimension, "input " + std::to_string(height) + "x" + std::to_string(width) +
                                   " too small for the initial 4x4 convolution (stage 1)");
  }
  int h = conv_out(height, 4, 4), w = conv_out(width, 4, 4);
  dims.emplace_back(h, w);
  for (int stage = 2; stage <= 4; ++stage) {
    if (h < 2 || w < 2) {
      fail(ErrorKind::Dimension, "input " + std::to_string(height) + "x" + std::to_string(width) +
                                     " too small for the downsample into stage " + std::to_string(stage) +
                                     " (feature map " + std::to_string(h) + "x" + std::to_string(w) + ")");
    }
    h = conv_out(h, 2, 2);
    w = conv_out(w, 2, 2);
    dims.emplace_back(h, w);
  }
  return dims;
}

template <typename T>
Model<T>::Model(ModelSpec spec, std::uint64_t seed) : spec_(spec) {
  if (spec_.height <= 0 || spec_.width <= 0) fail(ErrorKind::Config, "model resolution must be positive");
  build(seed);
}

template <typename T>
int Model<T>::add_param(std::string name, Shape shape) {
  const int index = static_cast<int>(params_.size());
  index_.emplace(name, index);
  params_.push_back(Parameter<T>{std::move(name), Tensor<T>(shape), Tensor<T>(shape)});
  return index;
}

template <typename T>
typename Model<T>::ConvRef Model<T>::add_conv(const std::string& name, int kh, int kw, int in_c, int out_c,
                                              int stride, int pad) {
  ConvRef c;
  c.kernel = add_param(name + ".kernel", {kh, kw, in_c, out_c});
  c.bias = add_param(name + ".bias", {out_c});
  c.stride = stride;
  c.pad = pad;
  return c;
}

template <typename T>
typename Model<T>::LinearRef Model<T>::add_linear(const std::string& name, int in, int out) {
  LinearRef l;
  l.weight = add_param(name + ".weight", {in, out});
  l.bias = add_param(name + ".bias", {out});
  return l;
}

template <typename T>
void Model<T>::build(std::uint64_t seed) {
  int feature_in = 0;
  if (spec_.encoder == EncoderKind::SimpleCnn) {
    const int h1 = conv_out(spec_.height, 8, 4), w1 = conv_out(spec_.width, 8, 4);
    if (spec_.height < 8 || spec_.width < 8 || h1 < 4 || w1 < 4) {
      fail(ErrorKind::Dimension, "resolution " + std::to_string(spec_.height) + "x" +
                                     std::to_string(spec_.width) + " too small for the SimpleCNN encoder");
    }
    const int h2 = conv_out(h1, 4, 2), w2 = conv_out(w1, 4, 2);
    conv1_ = add_conv("conv1", 8, 8, 1, 16, 4, 0);
    conv2_ = add_conv("conv2", 4, 4, 16, 32, 2, 0);
    fc1_ = add_linear("fc1", h2 * w2 * 32, kFeatureDim);
    if (spec_.use_glu) {
      glu_feature_ = add_linear("glu_feature", kFeatureDim, kFeatureDim);
      glu_gate_ = add_linear("glu_gate", kFeatureDim, kFeatureDim);
      glu_output_ = add_linear("glu_output", kFeatureDim, kFeatureDim);
    }
  } else {
    const auto dims = deep_stage_dims(spec_.height, spec_.width);
    initial_ = add_conv("initial_conv", 4, 4, 1, kStageChannels[0], 4, 0);
    stages_.resize(4);
    for (int s = 0; s < 4; ++s) {
      if (s > 0) {
        downsample_.push_back(add_conv("downsample" + std::to_string(s), 2, 2, kStageChannels[s - 1],
                                       kStageChannels[s], 2, 0));
      }
      for (int b = 0; b < kStageBlocks[s]; ++b) {
        const std::string name = "stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1);
        const int c = kStageChannels[s];
        stages_[s].push_back(Block{add_conv(name + ".conv_a", 3, 3, c, c, 1, 1),
                                   add_conv(name + ".conv_b", 3, 3, c, c, 1, 1)});
      }
    }
    feature_in = dims.back().first * dims.back().second * kStageChannels[3];
    if (spec_.use_glu) gate_ = add_linear("gate", feature_in, kFeatureDim);
    projection_ = add_linear("projection", feature_in, kFeatureDim);
  }
  policy_ = add_linear("policy_head", kFeatureDim, kActionDim);
  value_ = add_linear("value_head", kFeatureDim, 1);
  log_std_ = add_param("log_std", {kActionDim});

  // Uniform in [-sqrt(1/fan_in), sqrt(1/fan_in)] for weights and biases alike;
  // fan_in is the weight's element count divided by its output width.
  Rng rng(derive_seed(seed, kSeedInit));
  std::map<std::string, double> bound_for_layer;
  for (auto& p : params_) {
    if (p.name == "log_std") continue;
    const std::string layer = p.name.substr(0, p.name.rfind('.'));
    if (p.value.rank() > 1) {
      const double fan_in = static_cast<double>(p.value.size()) / p.value.dim(-1);
      bound_for_layer[layer] = std::sqrt(1.0 / fan_in);
    }
  }
  for (auto& p : params_) {
    if (p.name == "log_std") continue;
    const double bound = bound_for_layer.at(p.name.substr(0, p.name.rfind('.')));
    for (auto& v : p.value.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
Parameter<T>& Model<T>::parameter(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::Architecture, "model has no parameter '" + std::string(name) + "'");
  return params_[static_cast<std::size_t>(it->second)];
}

template <typename T>
const Parameter<T>& Model<T>::parameter(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::Architecture, "model has no parameter '" + std::string(name) + "'");
  return params_[static_cast<std::size_t>(it->second)];
}

template <typename T>
bool Model<T>::has_parameter(std::string_view name) const {
  return index_.find(name) != index_.end();
}

template <typename T>
Var Model<T>::bind(GradTape<T>& tape, int index, bool track) const {
  auto& p = params_[static_cast<std::size_t>(index)];
  return tape.parameter(p.value, track ? &p.grad : nullptr);
}

template <typename T>
Var Model<T>::conv(GradTape<T>& tape, Var x, const ConvRef& c, bool track) const {
  return tape.conv2d(x, bind(tape, c.kernel, track), bind(tape, c.bias, track), c.stride, c.pad, c.pad);
}

template <typename T>
Var Model<T>::dense(GradTape<T>& tape, Var x, const LinearRef& l, bool track) const {
  return tape.linear(x, bind(tape, l.weight, track), bind(tape, l.bias, track));
}

template <typename T>
ForwardResult Model<T>::forward(GradTape<T>& tape, Tensor<T> observations, bool track,
                                bool pre_normalized) const {
  const Shape& s = observations.shape();
  if (s.size() != 4 || s[1] != spec_.height || s[2] != spec_.width || s[3] != 1) {
    fail(ErrorKind::Dimension, "model " + spec_.arch_id() + " expects [N," + std::to_string(spec_.height) +
                                   "," + std::to_string(spec_.width) + ",1] observations, got " +
                                   shape_string(s));
  }
  ForwardResult r;
  Var x = tape.input(std::move(observations));
  if (spec_.use_norm && !pre_normalized) {
    const auto m = normalizer_.mean();
    const auto sd = normalizer_.stddev();
    std::vector<T> mt(m.begin(), m.end()), st(sd.begin(), sd.end());
    x = tape.normalize(x, mt, st, static_cast<T>(ObservationNormalizer::kEpsilon));
  }

  if (spec_.encoder == EncoderKind::SimpleCnn) {
    Var h1 = tape.leaky_relu(conv(tape, x, conv1_, track), kLeakySlope);
    r.stage_shapes.emplace_back("conv1", tape.value(h1).shape());
    Var h2 = tape.leaky_relu(conv(tape, h1, conv2_, track), kLeakySlope);
    r.stage_shapes.emplace_back("conv2", tape.value(h2).shape());
    Var flat = tape.flatten(h2);
    r.stage_shapes.emplace_back("flatten", tape.value(flat).shape());
    r.encoded = dense(tape, flat, fc1_, track);
    r.features = r.encoded;
    if (spec_.use_glu) {
      Var f = tape.swish(dense(tape, r.encoded, glu_feature_, track));
      Var g = tape.sigmoid(dense(tape, r.encoded, glu_gate_, track));
      r.gated = dense(tape, tape.mul(f, g), glu_output_, track);
      r.features = r.gated;
    }
  } else {
    deep_stage_dims(spec_.height, spec_.width);
    Var h = conv(tape, x, initial_, track);
    for (std::size_t st = 0; st < stages_.size(); ++st) {
      if (st > 0) h = conv(tape, h, downsample_[st - 1], track);
      for (const Block& b : stages_[st]) {
        Var a = tape.leaky_relu(conv(tape, h, b.a, track), kLeakySlope);
        Var res = tape.leaky_relu(conv(tape, a, b.b, track), kLeakySlope);
        h = tape.add(h, res);
      }
      r.stage_shapes.emplace_back("stage" + std::to_string(st + 1), tape.value(h).shape());
    }
    r.encoded = tape.flatten(h);
    r.stage_shapes.emplace_back("flatten", tape.value(r.encoded).shape());
    Var proj = dense(tape, r.encoded, projection_, track);
    if (spec_.use_glu) {
      // Softmax gate over the projected features; scaled by the width so a
      // uniform gate leaves the projection unchanged.
      Var g = tape.softmax(dense(tape, r.encoded, gate_, track));
      r.gated = tape.mul(tape.scale(g, static_cast<T>(kFeatureDim)), proj);
      r.features = r.gated;
    } else {
      r.features = proj;
    }
  }
  r.mean = dense(tape, r.features, policy_, track);
  r.value = dense(tape, r.features, value_, track);
  return r;
}

template <typename T>
std::vector<T> Model<T>::log_std() const {
  const auto& p = params_[static_cast<std::size_t>(log_std_)].value;
  std::vector<T> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] = std::clamp(p[i], static_cast<T>(kLogStdMin), static_cast<T>(kLogStdMax));
  }
  return out;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T{0});
}

template <typename T>
std::int64_t Model<T>::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& p : params_) total += static_cast<std::int64_t>(p.value.size());
  return total;
}

template <typename T>
std::vector<LayerRow> Model<T>::layer_table() const {
  auto count = [&](const std::string& prefix) {
    std::int64_t n = 0;
    for (const auto& p : params_) {
      if (p.name.rfind(prefix + ".", 0) == 0) n += static_cast<std::int64_t>(p.value.size());
    }
    return n;
  };
  std::vector<LayerRow> rows;
  const int H = spec_.height, W = spec_.width;
  rows.push_back({"Input", "-", {H, W, 1}, "Grayscale", 0});
  if (spec_.use_norm) rows.push_back({"Normalization", "Running stats", {H, W, 1}, "-", 0});
  const int F = kFeatureDim;
  if (spec_.encoder == EncoderKind::SimpleCnn) {
    const int h1 = conv_out(H, 8, 4), w1 = conv_out(W, 8, 4);
    const int h2 = conv_out(h1, 4, 2), w2 = conv_out(w1, 4, 2);
    rows.push_back({"Conv1", "Conv2D", {h1, w1, 16}, conv_details(8, 8, 4), count("conv1")});
    rows.push_back({"Conv2", "Conv2D", {h2, w2, 32}, conv_details(4, 4, 2), count("conv2")});
    rows.push_back({"Flatten", "-", {h2 * w2 * 32}, "-", 0});
    rows.push_back({"FC1", "Linear", {F}, "-", count("fc1")});
    if (spec_.use_glu) {
      rows.push_back({"GLU_Feature", "Linear", {F}, "Swish", count("glu_feature")});
      rows.push_back({"GLU_Gate", "Linear", {F}, "Sigmoid", count("glu_gate")});
      rows.push_back({"GLU_Output", "Linear", {F}, "-", count("glu_output")});
    }
  } else {
    const auto dims = deep_stage_dims(H, W);
    rows.push_back({"Initial Conv", "Conv2D", {dims[0].first, dims[0].second, kStageChannels[0]},
                    conv_details(4, 4, 4), count("initial_conv")});
    int conv_index = 1;
    for (int s = 0; s < 4; ++s) {
      const Shape shape{dims[s].first, dims[s].second, kStageChannels[s]};
      if (s > 0) {
        rows.push_back({"Downsample", "Conv2D", shape, conv_details(2, 2, 2), count("downsample" + std::to_string(s))});
      }
      // Stage 3 is reported as a single row covering both of its blocks.
      const bool merge = kStageBlocks[s] > 1 && s == 2;
      for (int b = 0; b < kStageBlocks[s]; b += merge ? kStageBlocks[s] : 1) {
        const int blocks = merge ? kStageBlocks[s] : 1;
        std::int64_t n = 0;
        for (int k = 0; k < blocks; ++k) {
          n += count("stage" + std::to_string(s + 1) + ".block" + std::to_string(b + k + 1) + ".conv_a");
          n += count("stage" + std::to_string(s + 1) + ".block" + std::to_string(b + k + 1) + ".conv_b");
        }
        const int first = conv_index, last = conv_index + 2 * blocks - 1;
        conv_index = last + 1;
        rows.push_back({"Stage " + std::to_string(s + 1) + ": Residual Convs " + std::to_string(first) + "-" +
                            std::to_string(last),
                        std::to_string(2 * blocks) + "x(Conv+LeakyReLU)", shape, "3x3, stride 1", n});
      }
    }
    const int flat = dims[3].first * dims[3].second * kStageChannels[3];
    rows.push_back({"Flatten", "-", {flat}, "Spatial flatten", 0});
    if (spec_.use_glu) rows.push_back({"GLU Gate Layer", "Softmax gating", {F}, "Adaptive routing", count("gate")});
    rows.push_back({"Dense Projection", "Linear", {F}, "Feature projection", count("projection")});
  }
  rows.push_back({"Policy Head", "Linear", {kActionDim}, "Gaussian mean", count("policy_head")});
  rows.push_back({"Policy LogStd", "Parameter", {kActionDim}, "State-independent", kActionDim});
  rows.push_back({"Value Head", "Linear", {1}, "State value", count("value_head")});
  return rows;
}

template <typename T>
template <typename U>
Model<U> Model<T>::cast() const {
  Model<U> out;
  out.spec_ = spec_;
  out.normalizer_ = normalizer_;
  out.index_ = index_;
  for (const auto& p : params_) {
    out.params_.push_back(Parameter<U>{p.name, p.value.template cast<U>(), p.grad.template cast<U>()});
  }
  auto conv_cast = [](const ConvRef& c) { return typename Model<U>::ConvRef{c.kernel, c.bias, c.stride, c.pad}; };
  auto lin_cast = [](const LinearRef& l) { return typename Model<U>::LinearRef{l.weight, l.bias}; };
  out.conv1_ = conv_cast(conv1_);
  out.conv2_ = conv_cast(conv2_);
  out.fc1_ = lin_cast(fc1_);
  out.glu_feature_ = lin_cast(glu_feature_);
  out.glu_gate_ = lin_cast(glu_gate_);
  out.glu_output_ = lin_cast(glu_output_);
  out.initial_ = conv_cast(initial_);
  for (const auto& stage : stages_) {
    out.stages_.emplace_back();
    for (const auto& b : stage) out.stages_.back().push_back({conv_cast(b.a), conv_cast(b.b)});
  }
  for (const auto& d : downsample_) out.downsample_.push_back(conv_cast(d));
  out.gate_ = lin_cast(gate_);
  out.projection_ = lin_cast(projection_);
  out.policy_ = lin_cast(policy_);
  out.value_ = lin_cast(value_);
  out.log_std_ = log_std_;
  return out;
}

template <typename T>
Model<T> graft_glu(const Model<T>& phase1, std::uint64_t seed) {
  ModelSpec spec = phase1.spec();
  if (spec.encoder != EncoderKind::SimpleCnn || spec.use_glu) {
    fail(ErrorKind::Architecture, "phase-2 resume needs a SimpleCNN checkpoint without GLU, got " + spec.arch_id());
  }
  spec.use_glu = true;
  Model<T> out(spec, seed);
  for (const auto& p : phase1.parameters()) out.parameter(p.name).value = p.value;
  out.normalizer() = phase1.normalizer();
  return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> graft_glu(const Model<float>&, std::uint64_t);
template Model<double> graft_glu(const Model<double>&, std::uint64_t);

}  // namespace vf
