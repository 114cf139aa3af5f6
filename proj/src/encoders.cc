// Copyright 2026 The xmodal Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xmodal/encoders.h"

#include <atomic>
#include <cmath>

#include "xmodal/error.h"

namespace xmodal {

std::string ToString(Activation a) { return a == Activation::kTanh ? "tanh" : "relu"; }

Activation ActivationFromString(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw Error(ErrorKind::kConfig, "unknown activation '" + s + "'");
}

std::uint64_t Stamp::Next() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& other) {
  Check(layers.size() == other.layers.size(), "gradient layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    Check(layers[l].bias.size() == other.layers[l].bias.size(), "bias shape mismatch");
    for (std::size_t o = 0; o < layers[l].bias.size(); ++o)
      layers[l].bias[o] += other.layers[l].bias[o];
  }
  return *this;
}

std::vector<std::span<const double>> MlpGradients::Views() const {
  std::vector<std::span<const double>> views;
  for (const auto& layer : layers) {
    views.emplace_back(layer.weight.data());
    views.emplace_back(layer.bias);
  }
  return views;
}

Mlp::Mlp(const std::vector<std::size_t>& dims, Activation activation, bool activate_output,
         Rng& rng)
    : activation_(activation), activate_output_(activate_output) {
  Check(dims.size() >= 2, "an MLP needs at least input and output dims");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l], out = dims[l + 1];
    Check(in > 0 && out > 0, "layer dims must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    for (double& w : layer.weight.data()) w = rng.Uniform(-limit, limit);
    layers_.push_back(std::move(layer));
  }
}

Mlp::Mlp(std::vector<DenseLayer> layers, Activation activation, bool activate_output)
    : layers_(std::move(layers)), activation_(activation), activate_output_(activate_output) {
  Check(!layers_.empty(), "an MLP needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Check(layers_[l].bias.size() == layers_[l].weight.rows(), "bias length != layer width");
    if (l > 0)
      Check(layers_[l].weight.cols() == layers_[l - 1].weight.rows(),
            "consecutive layer dimensions do not chain");
  }
}

std::size_t Mlp::input_dim() const { return layers_.front().weight.cols(); }
std::size_t Mlp::output_dim() const { return layers_.back().weight.rows(); }

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> d{input_dim()};
  for (const auto& layer : layers_) d.push_back(layer.weight.rows());
  return d;
}

namespace {

inline double Activate(Activation a, double z) {
  return a == Activation::kTanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

inline double ActivateGrad(Activation a, double z) {
  if (a == Activation::kTanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  return z > 0.0 ? 1.0 : 0.0;
}

}  // namespace

Matrix Mlp::Forward(const Matrix& x, Tape* tape) const {
  Check(!layers_.empty(), "forward through an empty MLP");
  Check(x.cols() == input_dim(), "input width does not match the first layer");
  if (tape != nullptr) {
    tape->stamp = stamp_.value();
    tape->inputs.clear();
    tape->pre.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    const std::size_t out = layer.weight.rows();
    Matrix z(h.rows(), out);
    for (std::size_t t = 0; t < h.rows(); ++t) {
      auto ht = h.row(t);
      for (std::size_t o = 0; o < out; ++o) z(t, o) = layer.bias[o] + Dot(ht, layer.weight.row(o));
    }
    const bool activated = l + 1 < layers_.size() || activate_output_;
    Matrix a = z;
    if (activated)
      for (double& v : a.data()) v = Activate(activation_, v);
    if (tape != nullptr) {
      tape->inputs.push_back(std::move(h));
      tape->pre.push_back(std::move(z));
    }
    h = std::move(a);
  }
  return h;
}

MlpGradients Mlp::ZeroGradients() const {
  MlpGradients g;
  for (const auto& layer : layers_)
    g.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                        std::vector<double>(layer.bias.size(), 0.0)});
  return g;
}

MlpGradients Mlp::Backward(const Tape& tape, const Matrix& upstream) const {
  if (tape.stamp != stamp_.value() || tape.inputs.size() != layers_.size())
    Fail("stale tape");
  Check(upstream.rows() == tape.inputs.front().rows() && upstream.cols() == output_dim(),
        "upstream shape does not match the forward output");
  MlpGradients g = ZeroGradients();
  Matrix delta = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const DenseLayer& layer = layers_[l];
    const Matrix& in = tape.inputs[l];
    const Matrix& z = tape.pre[l];
    const bool activated = l + 1 < layers_.size() || activate_output_;
    if (activated)
      for (std::size_t i = 0; i < delta.size(); ++i)
        delta.data()[i] *= ActivateGrad(activation_, z.data()[i]);
    DenseLayer& gl = g.layers[l];
    Matrix dx(in.rows(), in.cols());
    for (std::size_t t = 0; t < in.rows(); ++t) {
      auto xt = in.row(t);
      auto dxt = dx.row(t);
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        const double d = delta(t, o);
        if (d == 0.0) continue;
        gl.bias[o] += d;
        auto gw = gl.weight.row(o);
        auto w = layer.weight.row(o);
        for (std::size_t i = 0; i < xt.size(); ++i) {
          gw[i] += d * xt[i];
          dxt[i] += d * w[i];
        }
      }
    }
    delta = std::move(dx);
  }
  g.input = std::move(delta);
  return g;
}

std::vector<std::span<double>> Mlp::Parameters() {
  stamp_.Renew();
  std::vector<std::span<double>> views;
  for (auto& layer : layers_) {
    views.emplace_back(layer.weight.data());
    views.emplace_back(layer.bias);
  }
  return views;
}

nlohmann::json Mlp::ToJson() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : layers_)
    layers.push_back({{"weight", layer.weight.values()}, {"bias", layer.bias}});
  return {{"dims", dims()},
          {"activation", ToString(activation_)},
          {"activate_output", activate_output_},
          {"layers", layers}};
}

Mlp Mlp::FromJson(const nlohmann::json& j) {
  try {
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    const auto& layers_json = j.at("layers");
    if (dims.size() != layers_json.size() + 1)
      throw Error(ErrorKind::kConfig, "checkpoint dims do not match layer count");
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < layers_json.size(); ++l) {
      auto w = layers_json[l].at("weight").get<std::vector<double>>();
      auto b = layers_json[l].at("bias").get<std::vector<double>>();
      if (w.size() != dims[l] * dims[l + 1] || b.size() != dims[l + 1])
        throw Error(ErrorKind::kConfig, "checkpoint layer has the wrong size");
      layers.push_back({Matrix(dims[l + 1], dims[l], std::move(w)), std::move(b)});
    }
    return Mlp(std::move(layers), ActivationFromString(j.at("activation").get<std::string>()),
               j.at("activate_output").get<bool>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("malformed checkpoint: ") + e.what());
  }
}

Pooled Pool(PoolingKind kind, const Matrix& frames, Rng& rng) {
  Check(frames.rows() >= 1, "pooling needs at least one frame");
  Pooled p;
  p.kind = kind;
  p.frames = frames.rows();
  if (kind == PoolingKind::kRandomSelectOne) {
    p.selected = rng.Index(frames.rows());
    auto r = frames.row(p.selected);
    p.value.assign(r.begin(), r.end());
    return p;
  }
  // Running mean: exact when all frames are equal.
  p.value.assign(frames.cols(), 0.0);
  for (std::size_t t = 0; t < frames.rows(); ++t) {
    auto r = frames.row(t);
    const double inv = 1.0 / static_cast<double>(t + 1);
    for (std::size_t k = 0; k < r.size(); ++k) p.value[k] += (r[k] - p.value[k]) * inv;
  }
  return p;
}

Matrix PoolBackward(const Pooled& pooled, std::span<const double> upstream) {
  Check(upstream.size() == pooled.value.size(), "pooled gradient has the wrong width");
  Matrix g(pooled.frames, upstream.size());
  if (pooled.kind == PoolingKind::kRandomSelectOne) {
    std::copy(upstream.begin(), upstream.end(), g.row(pooled.selected).begin());
    return g;
  }
  const double inv = 1.0 / static_cast<double>(pooled.frames);
  for (std::size_t t = 0; t < pooled.frames; ++t) {
    auto r = g.row(t);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = upstream[k] * inv;
  }
  return g;
}

std::vector<std::span<const double>> StreamGradients::Views() const {
  auto views = trunk.Views();
  for (auto v : identity.Views()) views.push_back(v);
  for (auto v : content.Views()) views.push_back(v);
  return views;
}

StreamEncoder::StreamEncoder(std::size_t input_dim, const EncoderConfig& config, Rng& rng)
    : trunk_({input_dim, config.hidden_dim}, config.activation, true, rng),
      identity_({config.hidden_dim, config.output_dim}, config.activation, false, rng),
      content_({config.hidden_dim, config.output_dim}, config.activation, false, rng) {}

StreamEncoder::StreamEncoder(Mlp trunk, Mlp identity, Mlp content)
    : trunk_(std::move(trunk)), identity_(std::move(identity)), content_(std::move(content)) {
  Check(identity_.input_dim() == trunk_.output_dim() &&
            content_.input_dim() == trunk_.output_dim(),
        "heads must consume the trunk output");
}

Matrix StreamEncoder::Forward(const Matrix& frames, Head head, StreamTape* tape) const {
  const Mlp& h = head == Head::kIdentity ? identity_ : content_;
  if (tape == nullptr) return h.Forward(trunk_.Forward(frames, nullptr), nullptr);
  tape->head = head;
  return h.Forward(trunk_.Forward(frames, &tape->trunk), &tape->head_tape);
}

Matrix StreamEncoder::Backward(const StreamTape& tape, const Matrix& upstream,
                               StreamGradients* grads) const {
  const Mlp& h = tape.head == Head::kIdentity ? identity_ : content_;
  MlpGradients gh = h.Backward(tape.head_tape, upstream);
  MlpGradients gt = trunk_.Backward(tape.trunk, gh.input);
  (tape.head == Head::kIdentity ? grads->identity : grads->content) += gh;
  grads->trunk += gt;
  return std::move(gt.input);
}

StreamGradients StreamEncoder::ZeroGradients() const {
  return {trunk_.ZeroGradients(), identity_.ZeroGradients(), content_.ZeroGradients()};
}

std::vector<std::span<double>> StreamEncoder::Parameters() {
  auto views = trunk_.Parameters();
  for (auto v : identity_.Parameters()) views.push_back(v);
  for (auto v : content_.Parameters()) views.push_back(v);
  return views;
}

nlohmann::json StreamEncoder::ToJson() const {
  return {{"trunk", trunk_.ToJson()},
          {"identity_head", identity_.ToJson()},
          {"content_head", content_.ToJson()}};
}

StreamEncoder StreamEncoder::FromJson(const nlohmann::json& j) {
  if (!j.contains("trunk") || !j.contains("identity_head") || !j.contains("content_head"))
    throw Error(ErrorKind::kConfig, "malformed checkpoint: missing encoder module");
  return StreamEncoder(Mlp::FromJson(j["trunk"]), Mlp::FromJson(j["identity_head"]),
                       Mlp::FromJson(j["content_head"]));
}

void Optimizer::Step(const std::vector<std::span<double>>& params,
                     const std::vector<std::span<const double>>& grads) {
  Check(params.size() == grads.size(), "parameter/gradient block count mismatch");
  if (steps_ == 0) {
    first_.clear();
    second_.clear();
    for (const auto& p : params) {
      first_.emplace_back(p.size(), 0.0);
      if (config_.kind == OptimizerKind::kAdam) second_.emplace_back(p.size(), 0.0);
    }
  }
  Check(first_.size() == params.size(), "optimizer state shape mismatch");
  for (std::size_t b = 0; b < params.size(); ++b)
    Check(params[b].size() == grads[b].size() && params[b].size() == first_[b].size(),
          "optimizer state shape mismatch");
  ++steps_;

  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    for (std::size_t b = 0; b < params.size(); ++b) {
      auto& vel = first_[b];
      for (std::size_t i = 0; i < params[b].size(); ++i) {
        vel[i] = config_.momentum * vel[i] + grads[b][i];
        params[b][i] -= lr * vel[i];
      }
    }
    return;
  }
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = first_[b];
    auto& v = second_[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      params[b][i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

nlohmann::json EncoderCheckpoint(const StreamEncoder& audio, const StreamEncoder& visual,
                                 std::uint64_t seed) {
  return {{"format", "xmodal-encoders"},
          {"version", 1},
          {"seed", seed},
          {"activation", ToString(audio.trunk().activation())},
          {"audio", audio.ToJson()},
          {"visual", visual.ToJson()}};
}

}  // namespace xmodal
