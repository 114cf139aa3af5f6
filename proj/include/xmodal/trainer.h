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

#ifndef XMODAL_TRAINER_H_
#define XMODAL_TRAINER_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "xmodal/encoders.h"
#include "xmodal/eval.h"
#include "xmodal/losses.h"
#include "xmodal/synthdata.h"

namespace xmodal {

// kBiometric: identity matching on clips of distinct identities, plus the
// weighted auxiliary content (synchronisation) loss.
// kSync: synchronisation only; negatives are other timesteps of one clip.
enum class Task { kBiometric, kSync };

struct EvalConfig {
  std::size_t every = 250;
  std::size_t clips_per_identity = 8;
  std::size_t cbm_pairs = 3000;
  double cbm_positive_fraction = 1.0 / 30.0;
  std::size_t sv_pairs = 0;  // 0: every pair of held-out clips
  std::size_t recall_k = 10;
  ProbeConfig probe;
};

struct ExperimentConfig {
  std::string name;  // row label in comparisons; defaults to the loss preset
  std::uint64_t seed = 1;
  Task task = Task::kBiometric;
  WorldConfig world;
  EncoderConfig encoder;
  LossSpec identity_loss;
  LossSpec content_loss;
  double lambda_content = 1.0;
  std::size_t batch_size = 40;
  std::size_t sync_batch_size = 10;
  std::size_t steps = 2000;
  OptimizerConfig optimizer;
  EvalConfig eval;

  // Throws Error(kConfig) on anything that would fail mid-run.
  void Validate() const;
  // The loss that a comparison varies: identity loss for biometric runs,
  // content loss for sync runs.
  LossSpec& primary_loss() { return task == Task::kSync ? content_loss : identity_loss; }
  const LossSpec& primary_loss() const {
    return task == Task::kSync ? content_loss : identity_loss;
  }
};

// Named loss presets: mwm-angular, mwm-euclidean, cddl-angular,
// cddl-euclidean, contrastive, contrastive-euclidean, binary.
LossSpec LossPreset(const std::string& name);
std::vector<std::string> LossPresetNames();
// Preset name matching `spec`'s kind and kernel kind.
std::string LossName(const LossSpec& spec);

std::string ToString(Task task);

nlohmann::json LossSpecToJson(const LossSpec& spec);
LossSpec LossSpecFromJson(const nlohmann::json& j);
// Fully resolved config, every field present.
nlohmann::json ConfigToJson(const ExperimentConfig& config);
// Missing keys keep their defaults; unknown keys are an error.
ExperimentConfig ConfigFromJson(const nlohmann::json& j);

// Encoders plus the (trainable) losses of one run.
struct Model {
  StreamEncoder audio;
  StreamEncoder visual;
  LossSpec identity_loss;
  LossSpec content_loss;

  // Audio encoder, visual encoder, identity-loss scalars, content-loss scalars.
  std::vector<std::span<double>> Parameters();
};

Model InitModel(const ExperimentConfig& config, Rng& rng);

struct ObjectiveResult {
  double total = 0.0;
  std::map<std::string, double> components;  // weighted AV / VA / AAV / VVA
  StreamGradients audio;
  StreamGradients visual;
  double identity_scalars[2] = {0.0, 0.0};
  double content_scalars[2] = {0.0, 0.0};

  // Ordered like Model::Parameters for a model with the same loss specs.
  std::vector<std::span<const double>> Views(const Model& model) const;
};

// Identity loss on `clips` (audio mean-pooled over time, one visual frame
// drawn with Rng(pooling_seed)) plus content_weight times the content loss on
// `sync`. Either batch may be null.
ObjectiveResult EvaluateObjective(const Model& model, const std::vector<Clip>* clips,
                                  const SyncBatch* sync, double content_weight,
                                  std::uint64_t pooling_seed);

struct CurvePoint {
  std::size_t step = 0;
  double total = 0.0;
  double av = 0.0;
  double va = 0.0;
  double aav = 0.0;
  double vva = 0.0;
};

struct MetricsPoint {
  std::size_t step = 0;
  std::uint64_t seed = 0;
  double cbm_eer = 0.0;     // audio vs visual identity embeddings
  double sv_eer = 0.0;      // audio vs audio
  double visual_eer = 0.0;  // visual vs visual
  double recall_at_1 = 0.0;
  double recall_at_k = 0.0;
  std::size_t recall_k = 0;
  double probe_top1 = 0.0;  // content classes from frozen visual content features
  double probe_topk = 0.0;
  std::size_t probe_k = 0;
};

struct RunReport {
  ExperimentConfig config;
  std::vector<CurvePoint> curve;
  std::vector<MetricsPoint> metrics;  // held-out identities only
  std::string checkpoint;             // set by the caller that writes one
  double wall_clock_seconds = 0.0;    // not part of the serialised report
};

// Runs one experiment. The report depends only on `config`. If `final_model`
// is non-null it receives the trained model.
RunReport RunExperiment(const ExperimentConfig& config, Model* final_model = nullptr);

struct ComparisonRow {
  std::string method;
  std::uint64_t seed = 0;
  MetricsPoint final_metrics;
};

struct MethodSummary {
  std::string method;
  MetricsPoint mean;  // mean of the final metrics over seeds
  // Relative to the first method: mean SV-EER difference (this - first), and
  // the number of seeds where this method's SV-EER is strictly lower.
  double sv_eer_delta = 0.0;
  double cbm_eer_delta = 0.0;
  double probe_top1_delta = 0.0;
  std::size_t sv_wins = 0;
  std::size_t probe_wins = 0;
};

struct ComparisonTable {
  Task task = Task::kBiometric;
  std::vector<std::uint64_t> seeds;
  std::vector<ComparisonRow> rows;  // method-major, seed-minor
  std::vector<MethodSummary> summary;
};

// Runs every config under every seed. Configs must agree on everything but
// their loss specs and name. Up to `threads` runs execute concurrently; the
// table does not depend on the thread count.
ComparisonTable CompareLosses(const std::vector<ExperimentConfig>& configs,
                              const std::vector<std::uint64_t>& seeds, std::size_t threads = 1);

}  // namespace xmodal

#endif  // XMODAL_TRAINER_H_
