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

#ifndef XMODAL_ENCODERS_H_
#define XMODAL_ENCODERS_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/numerics.h"

namespace xmodal {

enum class Activation { kTanh, kRelu };

std::string ToString(Activation a);
Activation ActivationFromString(const std::string& s);

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
};

// Identifies one immutable state of a parameter set. Copies and every
// mutable access get a fresh value, which is how stale tapes are caught.
class Stamp {
 public:
  Stamp() : value_(Next()) {}
  Stamp(const Stamp&) : value_(Next()) {}
  Stamp& operator=(const Stamp&) {
    value_ = Next();
    return *this;
  }
  void Renew() { value_ = Next(); }
  std::uint64_t value() const { return value_; }

 private:
  static std::uint64_t Next();
  std::uint64_t value_;
};

// Activations recorded by Mlp::Forward for the matching Backward.
struct Tape {
  std::uint64_t stamp = 0;
  std::vector<Matrix> inputs;  // input of each layer
  std::vector<Matrix> pre;     // pre-activation of each layer
};

struct MlpGradients {
  std::vector<DenseLayer> layers;
  Matrix input;

  MlpGradients& operator+=(const MlpGradients& other);
  std::vector<std::span<const double>> Views() const;
};

// Fully connected network. Hidden layers use `activation`; the last layer is
// linear unless `activate_output` is set.
class Mlp {
 public:
  Mlp() = default;
  // dims = {in, h1, ..., out}. Weights ~ U(+-sqrt(6 / (fan_in + fan_out))),
  // biases zero.
  Mlp(const std::vector<std::size_t>& dims, Activation activation, bool activate_output,
      Rng& rng);
  Mlp(std::vector<DenseLayer> layers, Activation activation, bool activate_output);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  Activation activation() const { return activation_; }
  bool activate_output() const { return activate_output_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<std::size_t> dims() const;

  // x is T x input_dim; returns T x output_dim. `tape` may be null.
  Matrix Forward(const Matrix& x, Tape* tape) const;
  // Throws "stale tape" if the parameters changed since the forward pass.
  MlpGradients Backward(const Tape& tape, const Matrix& upstream) const;
  MlpGradients ZeroGradients() const;

  // Mutable parameter views (weights then bias, layer by layer). Invalidates
  // outstanding tapes.
  std::vector<std::span<double>> Parameters();

  nlohmann::json ToJson() const;
  static Mlp FromJson(const nlohmann::json& j);

 private:
  std::vector<DenseLayer> layers_;
  Activation activation_ = Activation::kTanh;
  bool activate_output_ = false;
  Stamp stamp_;
};

enum class PoolingKind { kMeanOverTime, kRandomSelectOne };

struct Pooled {
  std::vector<double> value;
  PoolingKind kind = PoolingKind::kMeanOverTime;
  std::size_t frames = 0;
  std::size_t selected = 0;  // RandomSelectOne only
};

// Collapses T frame embeddings into one clip embedding: the column mean, or
// one row drawn uniformly from rng.
Pooled Pool(PoolingKind kind, const Matrix& frames, Rng& rng);
// Routes a clip-level gradient back to the frames: 1/T each for the mean,
// everything to the selected row otherwise.
Matrix PoolBackward(const Pooled& pooled, std::span<const double> upstream);

struct EncoderConfig {
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 16;
  Activation activation = Activation::kTanh;
};

enum class Head { kIdentity, kContent };

struct StreamTape {
  Head head = Head::kIdentity;
  Tape trunk;
  Tape head_tape;
};

struct StreamGradients {
  MlpGradients trunk;
  MlpGradients identity;
  MlpGradients content;

  std::vector<std::span<const double>> Views() const;
};

// One modality's encoder: a shared activated trunk feeding two linear heads,
// identity (biometric matching) and content (synchronisation).
class StreamEncoder {
 public:
  StreamEncoder() = default;
  StreamEncoder(std::size_t input_dim, const EncoderConfig& config, Rng& rng);
  StreamEncoder(Mlp trunk, Mlp identity, Mlp content);

  Matrix Forward(const Matrix& frames, Head head, StreamTape* tape) const;
  // Accumulates parameter gradients into `grads`; returns the input gradient.
  Matrix Backward(const StreamTape& tape, const Matrix& upstream, StreamGradients* grads) const;
  StreamGradients ZeroGradients() const;

  // Trunk, identity head, content head; ordered like StreamGradients::Views.
  std::vector<std::span<double>> Parameters();

  const Mlp& trunk() const { return trunk_; }
  const Mlp& identity_head() const { return identity_; }
  const Mlp& content_head() const { return content_; }

  nlohmann::json ToJson() const;
  static StreamEncoder FromJson(const nlohmann::json& j);

 private:
  Mlp trunk_;
  Mlp identity_;
  Mlp content_;
};

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // SGD
  double beta1 = 0.9;     // Adam
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// SGD with (heavy-ball) momentum, or Adam with bias correction. State is
// laid out on the first Step and must keep the same shapes afterwards.
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config) : config_(config) {}

  void Step(const std::vector<std::span<double>>& params,
            const std::vector<std::span<const double>>& grads);

  std::int64_t steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

// Checkpoint for a pair of stream encoders.
nlohmann::json EncoderCheckpoint(const StreamEncoder& audio, const StreamEncoder& visual,
                                 std::uint64_t seed);

}  // namespace xmodal

#endif  // XMODAL_ENCODERS_H_
