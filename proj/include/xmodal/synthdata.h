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

#ifndef XMODAL_SYNTHDATA_H_
#define XMODAL_SYNTHDATA_H_

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "xmodal/numerics.h"

namespace xmodal {

struct WorldConfig {
  std::size_t num_identities = 500;
  std::size_t identity_dim = 8;
  std::size_t content_dim = 4;
  std::size_t frames = 10;  // T, frames per clip
  std::size_t dim_a = 32;   // audio-analogue feature width
  std::size_t dim_b = 48;   // visual-analogue feature width
  // Per-frame content is codebook[class] + content_jitter * N(0, I) with the
  // class drawn uniformly; the class is the label of the content probe.
  // Codebook entries are content_scale * N(0, I).
  std::size_t content_classes = 10;
  double content_scale = 1.0;
  double content_jitter = 0.25;
  // Multiplies the rendering weights; larger values saturate the tanh.
  double render_gain = 0.1;
  double noise_sigma = 0.1;
  double train_fraction = 0.8;

  void Validate() const;
};

enum class Modality { kAudio, kVisual };

// x = tanh(W [identity; content] + c), W ~ N(0, gain^2 / (identity_dim + content_dim)).
struct RenderMap {
  Matrix weight;  // out x (identity_dim + content_dim)
  std::vector<double> bias;
};

// Fixed latent tables and rendering maps. Immutable after MakeWorld.
struct SyntheticWorld {
  WorldConfig config;
  std::uint64_t seed = 0;
  Matrix identities;        // num_identities x identity_dim
  Matrix content_codebook;  // content_classes x content_dim
  RenderMap audio;
  RenderMap visual;
  std::vector<std::size_t> train_identities;
  std::vector<std::size_t> test_identities;

  const RenderMap& map(Modality m) const { return m == Modality::kAudio ? audio : visual; }
  std::vector<std::size_t> all_identities() const;
};

// One facetrack: T synchronous frames of both modalities driven by one
// identity latent and per-frame content latents.
struct Clip {
  std::size_t identity = 0;
  Matrix audio;    // T x dim_a
  Matrix visual;   // T x dim_b
  Matrix content;  // T x content_dim
  std::vector<std::size_t> content_classes;
};

SyntheticWorld MakeWorld(const WorldConfig& config, std::uint64_t seed);

// Noise-free rendering of one frame.
std::vector<double> RenderFrame(const SyntheticWorld& world, Modality modality,
                                std::span<const double> identity_latent,
                                std::span<const double> content_latent);

// Draws content classes and jitter for every frame, then renders both
// modalities with independent noise.
Clip MakeClip(const SyntheticWorld& world, std::size_t identity, Rng& rng);
// Renders a clip with caller-supplied content latents (T x content_dim).
Clip MakeClip(const SyntheticWorld& world, std::size_t identity, const Matrix& content,
              std::vector<std::size_t> content_classes, Rng& rng);

// n clips from n distinct identities of `pool` (every identity when `pool`
// is empty). Clip j's audio and visual streams form positive pair j.
std::vector<Clip> SampleBiometricBatch(const SyntheticWorld& world, std::size_t n, Rng& rng,
                                       std::span<const std::size_t> pool = {});

// n same-timestep (audio, visual) frame pairs from a single clip. Negatives
// are the other timesteps of the same clip, so identity cannot separate them.
struct SyncBatch {
  std::size_t identity = 0;
  std::vector<std::size_t> timesteps;
  Matrix audio;   // n x dim_a
  Matrix visual;  // n x dim_b
  std::vector<std::size_t> content_classes;
};

SyncBatch SampleSyncBatch(const SyntheticWorld& world, std::size_t n, Rng& rng,
                          std::span<const std::size_t> pool = {});
// Same, from an existing clip.
SyncBatch SampleSyncBatch(const Clip& clip, std::size_t n, Rng& rng);

nlohmann::json WorldToJson(const SyntheticWorld& world);
SyntheticWorld WorldFromJson(const nlohmann::json& j);
nlohmann::json ClipToJson(const Clip& clip);

}  // namespace xmodal

#endif  // XMODAL_SYNTHDATA_H_
