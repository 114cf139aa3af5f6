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

#include "xmodal/synthdata.h"

#include <cmath>

#include "xmodal/error.h"

namespace xmodal {

void WorldConfig::Validate() const {
  auto bad = [](const char* what) { throw Error(ErrorKind::kConfig, what); };
  if (num_identities == 0) bad("world needs at least one identity");
  if (identity_dim == 0 || content_dim == 0) bad("latent dims must be >= 1");
  if (frames == 0) bad("clips need at least one frame");
  if (dim_a == 0 || dim_b == 0) bad("modality dims must be >= 1");
  if (content_classes == 0) bad("need at least one content class");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be >= 0");
  if (!(content_jitter >= 0.0) || !std::isfinite(content_jitter))
    bad("content_jitter must be >= 0");
  if (!(content_scale > 0.0) || !std::isfinite(content_scale)) bad("content_scale must be > 0");
  if (!(render_gain > 0.0) || !std::isfinite(render_gain)) bad("render_gain must be > 0");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) bad("train_fraction must be in (0, 1)");
}

std::vector<std::size_t> SyntheticWorld::all_identities() const {
  std::vector<std::size_t> ids(config.num_identities);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return ids;
}

namespace {

enum Stream : std::uint64_t { kIdentities = 1, kCodebook, kAudioMap, kVisualMap, kSplit };

RenderMap MakeRenderMap(std::size_t out, std::size_t in, double gain, Rng& rng) {
  RenderMap m{RandomNormal(out, in, rng), std::vector<double>(out)};
  m.weight *= gain / std::sqrt(static_cast<double>(in));
  for (double& b : m.bias) b = 0.1 * rng.Normal();
  return m;
}

void AddNoise(Matrix& m, double sigma, Rng& rng) {
  if (sigma == 0.0) return;
  for (double& v : m.data()) v += sigma * rng.Normal();
}

}  // namespace

SyntheticWorld MakeWorld(const WorldConfig& config, std::uint64_t seed) {
  config.Validate();
  SyntheticWorld w;
  w.config = config;
  w.seed = seed;
  Rng id_rng = Rng::Derive(seed, kIdentities);
  w.identities = RandomNormal(config.num_identities, config.identity_dim, id_rng);
  Rng cb_rng = Rng::Derive(seed, kCodebook);
  w.content_codebook = RandomNormal(config.content_classes, config.content_dim, cb_rng);
  w.content_codebook *= config.content_scale;
  const std::size_t latent = config.identity_dim + config.content_dim;
  Rng a_rng = Rng::Derive(seed, kAudioMap);
  w.audio = MakeRenderMap(config.dim_a, latent, config.render_gain, a_rng);
  Rng v_rng = Rng::Derive(seed, kVisualMap);
  w.visual = MakeRenderMap(config.dim_b, latent, config.render_gain, v_rng);

  std::vector<std::size_t> ids = w.all_identities();
  Rng split_rng = Rng::Derive(seed, kSplit);
  split_rng.Shuffle(ids);
  const auto n_train = static_cast<std::size_t>(
      std::floor(config.train_fraction * static_cast<double>(ids.size())));
  w.train_identities.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  w.test_identities.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  return w;
}

std::vector<double> RenderFrame(const SyntheticWorld& world, Modality modality,
                                std::span<const double> identity_latent,
                                std::span<const double> content_latent) {
  const RenderMap& m = world.map(modality);
  const std::size_t id_dim = identity_latent.size();
  Check(id_dim + content_latent.size() == m.weight.cols(), "latent width mismatch");
  std::vector<double> out(m.weight.rows());
  for (std::size_t o = 0; o < out.size(); ++o) {
    auto w = m.weight.row(o);
    double z = m.bias[o];
    for (std::size_t k = 0; k < id_dim; ++k) z += w[k] * identity_latent[k];
    for (std::size_t k = 0; k < content_latent.size(); ++k) z += w[id_dim + k] * content_latent[k];
    out[o] = std::tanh(z);
  }
  return out;
}

Clip MakeClip(const SyntheticWorld& world, std::size_t identity, const Matrix& content,
              std::vector<std::size_t> content_classes, Rng& rng) {
  const WorldConfig& c = world.config;
  Check(identity < c.num_identities, "identity out of range");
  Check(content.rows() == c.frames && content.cols() == c.content_dim,
        "content latents must be T x content_dim");
  Check(content_classes.size() == c.frames, "one content class per frame");
  Clip clip;
  clip.identity = identity;
  clip.content = content;
  clip.content_classes = std::move(content_classes);
  clip.audio = Matrix(c.frames, c.dim_a);
  clip.visual = Matrix(c.frames, c.dim_b);
  auto z = world.identities.row(identity);
  for (std::size_t t = 0; t < c.frames; ++t) {
    auto a = RenderFrame(world, Modality::kAudio, z, content.row(t));
    auto v = RenderFrame(world, Modality::kVisual, z, content.row(t));
    std::copy(a.begin(), a.end(), clip.audio.row(t).begin());
    std::copy(v.begin(), v.end(), clip.visual.row(t).begin());
  }
  AddNoise(clip.audio, c.noise_sigma, rng);
  AddNoise(clip.visual, c.noise_sigma, rng);
  return clip;
}

Clip MakeClip(const SyntheticWorld& world, std::size_t identity, Rng& rng) {
  const WorldConfig& c = world.config;
  Matrix content(c.frames, c.content_dim);
  std::vector<std::size_t> classes(c.frames);
  for (std::size_t t = 0; t < c.frames; ++t) {
    classes[t] = rng.Index(c.content_classes);
    auto code = world.content_codebook.row(classes[t]);
    for (std::size_t k = 0; k < c.content_dim; ++k)
      content(t, k) = code[k] + c.content_jitter * rng.Normal();
  }
  return MakeClip(world, identity, content, std::move(classes), rng);
}

std::vector<Clip> SampleBiometricBatch(const SyntheticWorld& world, std::size_t n, Rng& rng,
                                       std::span<const std::size_t> pool) {
  const std::size_t available = pool.empty() ? world.config.num_identities : pool.size();
  if (n > available) Fail("biometric batch larger than the identity pool");
  std::vector<std::size_t> picks = rng.SampleWithoutReplacement(available, n);
  std::vector<Clip> clips;
  clips.reserve(n);
  for (std::size_t p : picks) clips.push_back(MakeClip(world, pool.empty() ? p : pool[p], rng));
  return clips;
}

SyncBatch SampleSyncBatch(const Clip& clip, std::size_t n, Rng& rng) {
  const std::size_t frames = clip.audio.rows();
  if (n > frames) Fail("sync batch needs n <= frames per clip");
  SyncBatch b;
  b.identity = clip.identity;
  b.timesteps = rng.SampleWithoutReplacement(frames, n);
  b.audio = clip.audio.SelectRows(b.timesteps);
  b.visual = clip.visual.SelectRows(b.timesteps);
  for (std::size_t t : b.timesteps) b.content_classes.push_back(clip.content_classes[t]);
  return b;
}

SyncBatch SampleSyncBatch(const SyntheticWorld& world, std::size_t n, Rng& rng,
                          std::span<const std::size_t> pool) {
  if (n > world.config.frames) Fail("sync batch needs n <= frames per clip");
  const std::size_t available = pool.empty() ? world.config.num_identities : pool.size();
  Check(available > 0, "empty identity pool");
  const std::size_t pick = rng.Index(available);
  Clip clip = MakeClip(world, pool.empty() ? pick : pool[pick], rng);
  return SampleSyncBatch(clip, n, rng);
}

namespace {

nlohmann::json MatrixToJson(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix MatrixFromJson(const nlohmann::json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("data").get<std::vector<double>>());
}

}  // namespace

nlohmann::json WorldToJson(const SyntheticWorld& world) {
  const WorldConfig& c = world.config;
  return {{"format", "xmodal-world"},
          {"version", 1},
          {"seed", world.seed},
          {"config",
           {{"num_identities", c.num_identities},
            {"identity_dim", c.identity_dim},
            {"content_dim", c.content_dim},
            {"frames", c.frames},
            {"dim_a", c.dim_a},
            {"dim_b", c.dim_b},
            {"content_classes", c.content_classes},
            {"content_scale", c.content_scale},
            {"content_jitter", c.content_jitter},
            {"render_gain", c.render_gain},
            {"noise_sigma", c.noise_sigma},
            {"train_fraction", c.train_fraction}}},
          {"identities", MatrixToJson(world.identities)},
          {"content_codebook", MatrixToJson(world.content_codebook)},
          {"audio_map", {{"weight", MatrixToJson(world.audio.weight)}, {"bias", world.audio.bias}}},
          {"visual_map",
           {{"weight", MatrixToJson(world.visual.weight)}, {"bias", world.visual.bias}}},
          {"train_identities", world.train_identities},
          {"test_identities", world.test_identities}};
}

SyntheticWorld WorldFromJson(const nlohmann::json& j) {
  try {
    if (j.at("format") != "xmodal-world" || j.at("version") != 1)
      throw Error(ErrorKind::kConfig, "not a version-1 xmodal world file");
    SyntheticWorld w;
    const auto& c = j.at("config");
    w.config.num_identities = c.at("num_identities");
    w.config.identity_dim = c.at("identity_dim");
    w.config.content_dim = c.at("content_dim");
    w.config.frames = c.at("frames");
    w.config.dim_a = c.at("dim_a");
    w.config.dim_b = c.at("dim_b");
    w.config.content_classes = c.at("content_classes");
    w.config.content_scale = c.at("content_scale");
    w.config.content_jitter = c.at("content_jitter");
    w.config.render_gain = c.at("render_gain");
    w.config.noise_sigma = c.at("noise_sigma");
    w.config.train_fraction = c.at("train_fraction");
    w.config.Validate();
    w.seed = j.at("seed");
    w.identities = MatrixFromJson(j.at("identities"));
    w.content_codebook = MatrixFromJson(j.at("content_codebook"));
    w.audio = {MatrixFromJson(j.at("audio_map").at("weight")),
               j.at("audio_map").at("bias").get<std::vector<double>>()};
    w.visual = {MatrixFromJson(j.at("visual_map").at("weight")),
                j.at("visual_map").at("bias").get<std::vector<double>>()};
    w.train_identities = j.at("train_identities").get<std::vector<std::size_t>>();
    w.test_identities = j.at("test_identities").get<std::vector<std::size_t>>();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("malformed world file: ") + e.what());
  }
}

nlohmann::json ClipToJson(const Clip& clip) {
  return {{"format", "xmodal-clip"},
          {"version", 1},
          {"identity", clip.identity},
          {"audio", MatrixToJson(clip.audio)},
          {"visual", MatrixToJson(clip.visual)},
          {"content", MatrixToJson(clip.content)},
          {"content_classes", clip.content_classes}};
}

}  // namespace xmodal
