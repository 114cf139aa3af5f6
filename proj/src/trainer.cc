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

#include "xmodal/trainer.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "xmodal/error.h"

namespace xmodal {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Loss presets and config (de)serialisation.

LossSpec LossPreset(const std::string& name) {
  LossSpec s;
  if (name == "mwm-angular" || name == "cddl-angular") {
    s.kind = name[0] == 'm' ? LossKind::kMwm : LossKind::kCddl;
    s.kernel = SimilarityKernel::ScaledCosine();
  } else if (name == "mwm-euclidean" || name == "cddl-euclidean") {
    s.kind = name[0] == 'm' ? LossKind::kMwm : LossKind::kCddl;
    s.kernel = SimilarityKernel::InverseEuclidean();
  } else if (name == "contrastive") {
    s.kind = LossKind::kPairwiseContrastive;
    s.kernel = SimilarityKernel::ScaledCosine();
  } else if (name == "contrastive-euclidean") {
    s.kind = LossKind::kPairwiseContrastive;
    s.kernel = SimilarityKernel::InverseEuclidean();
  } else if (name == "binary") {
    s.kind = LossKind::kPairwiseBinary;
    s.kernel = SimilarityKernel::InverseEuclidean();
  } else {
    throw Error(ErrorKind::kConfig, "unknown loss preset '" + name + "'");
  }
  return s;
}

std::vector<std::string> LossPresetNames() {
  return {"mwm-angular", "mwm-euclidean", "cddl-angular", "cddl-euclidean",
          "contrastive", "contrastive-euclidean", "binary"};
}

std::string LossName(const LossSpec& spec) {
  const bool angular = spec.kernel.kind == KernelKind::kScaledCosine;
  switch (spec.kind) {
    case LossKind::kMwm:
      return angular ? "mwm-angular" : "mwm-euclidean";
    case LossKind::kCddl:
      return angular ? "cddl-angular" : "cddl-euclidean";
    case LossKind::kPairwiseContrastive:
      return angular ? "contrastive" : "contrastive-euclidean";
    case LossKind::kPairwiseBinary:
      return "binary";
  }
  return "unknown";
}

std::string ToString(Task task) { return task == Task::kSync ? "sync" : "biometric"; }

namespace {

[[noreturn]] void ConfigError(const std::string& what) { throw Error(ErrorKind::kConfig, what); }

// Reads the keys of one JSON object, rejecting any key it was not asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void Get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  // Nested object, or nullptr when absent.
  const json* Child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string Path(const char* key) const { return path_ + "." + key; }

  void Finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) ConfigError(path_ + ": unknown key '" + item.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const char* KindName(LossKind k) {
  switch (k) {
    case LossKind::kPairwiseContrastive:
      return "contrastive";
    case LossKind::kPairwiseBinary:
      return "binary";
    case LossKind::kMwm:
      return "mwm";
    case LossKind::kCddl:
      return "cddl";
  }
  return "mwm";
}

LossSpec LossSpecFromJsonAt(const json& j, const std::string& path) {
  if (j.is_string()) return LossPreset(j.get<std::string>());
  ObjectReader r(j, path);
  LossSpec s;
  std::string kind = KindName(s.kind), kernel = "scaled_cosine";
  r.Get("kind", kind);
  r.Get("kernel", kernel);
  if (kind == "mwm") s.kind = LossKind::kMwm;
  else if (kind == "cddl") s.kind = LossKind::kCddl;
  else if (kind == "contrastive") s.kind = LossKind::kPairwiseContrastive;
  else if (kind == "binary") s.kind = LossKind::kPairwiseBinary;
  else ConfigError(path + ".kind: unknown loss kind '" + kind + "'");
  if (kernel == "scaled_cosine") s.kernel = SimilarityKernel::ScaledCosine();
  else if (kernel == "inverse_euclidean") s.kernel = SimilarityKernel::InverseEuclidean();
  else ConfigError(path + ".kernel: unknown kernel '" + kernel + "'");
  r.Get("scale", s.kernel.scale);
  r.Get("offset", s.kernel.offset);
  r.Get("eps", s.kernel.eps);
  r.Get("margin", s.margin);
  r.Get("slope", s.slope);
  r.Get("bias", s.bias);
  r.Finish();
  return s;
}

}  // namespace

json LossSpecToJson(const LossSpec& spec) {
  return {{"kind", KindName(spec.kind)},
          {"kernel", spec.kernel.kind == KernelKind::kScaledCosine ? "scaled_cosine"
                                                                   : "inverse_euclidean"},
          {"scale", spec.kernel.scale},
          {"offset", spec.kernel.offset},
          {"eps", spec.kernel.eps},
          {"margin", spec.margin},
          {"slope", spec.slope},
          {"bias", spec.bias}};
}

LossSpec LossSpecFromJson(const json& j) { return LossSpecFromJsonAt(j, "loss"); }

json ConfigToJson(const ExperimentConfig& c) {
  const WorldConfig& w = c.world;
  const OptimizerConfig& o = c.optimizer;
  const EvalConfig& e = c.eval;
  return {
      {"schema_version", 1},
      {"name", c.name},
      {"seed", c.seed},
      {"task", ToString(c.task)},
      {"world",
       {{"num_identities", w.num_identities},
        {"identity_dim", w.identity_dim},
        {"content_dim", w.content_dim},
        {"frames", w.frames},
        {"dim_a", w.dim_a},
        {"dim_b", w.dim_b},
        {"content_classes", w.content_classes},
        {"content_scale", w.content_scale},
        {"content_jitter", w.content_jitter},
        {"render_gain", w.render_gain},
        {"noise_sigma", w.noise_sigma},
        {"train_fraction", w.train_fraction}}},
      {"encoder",
       {{"hidden_dim", c.encoder.hidden_dim},
        {"output_dim", c.encoder.output_dim},
        {"activation", ToString(c.encoder.activation)}}},
      {"identity_loss", LossSpecToJson(c.identity_loss)},
      {"content_loss", LossSpecToJson(c.content_loss)},
      {"lambda_content", c.lambda_content},
      {"batch_size", c.batch_size},
      {"sync_batch_size", c.sync_batch_size},
      {"steps", c.steps},
      {"optimizer",
       {{"kind", o.kind == OptimizerKind::kAdam ? "adam" : "sgd"},
        {"learning_rate", o.learning_rate},
        {"momentum", o.momentum},
        {"beta1", o.beta1},
        {"beta2", o.beta2},
        {"epsilon", o.epsilon}}},
      {"eval",
       {{"every", e.every},
        {"clips_per_identity", e.clips_per_identity},
        {"cbm_pairs", e.cbm_pairs},
        {"cbm_positive_fraction", e.cbm_positive_fraction},
        {"sv_pairs", e.sv_pairs},
        {"recall_k", e.recall_k},
        {"probe",
         {{"epochs", e.probe.epochs},
          {"learning_rate", e.probe.learning_rate},
          {"l2", e.probe.l2},
          {"top_k", e.probe.top_k}}}}},
  };
}

ExperimentConfig ConfigFromJson(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  int schema = 1;
  r.Get("schema_version", schema);
  if (schema != 1) ConfigError("config: unsupported schema_version " + std::to_string(schema));
  r.Get("name", c.name);
  r.Get("seed", c.seed);
  std::string task = ToString(c.task);
  r.Get("task", task);
  if (task == "biometric") c.task = Task::kBiometric;
  else if (task == "sync") c.task = Task::kSync;
  else ConfigError("config.task: expected 'biometric' or 'sync'");

  if (const json* wj = r.Child("world")) {
    ObjectReader w(*wj, r.Path("world"));
    w.Get("num_identities", c.world.num_identities);
    w.Get("identity_dim", c.world.identity_dim);
    w.Get("content_dim", c.world.content_dim);
    w.Get("frames", c.world.frames);
    w.Get("dim_a", c.world.dim_a);
    w.Get("dim_b", c.world.dim_b);
    w.Get("content_classes", c.world.content_classes);
    w.Get("content_scale", c.world.content_scale);
    w.Get("content_jitter", c.world.content_jitter);
    w.Get("render_gain", c.world.render_gain);
    w.Get("noise_sigma", c.world.noise_sigma);
    w.Get("train_fraction", c.world.train_fraction);
    w.Finish();
  }
  if (const json* ej = r.Child("encoder")) {
    ObjectReader e(*ej, r.Path("encoder"));
    e.Get("hidden_dim", c.encoder.hidden_dim);
    e.Get("output_dim", c.encoder.output_dim);
    std::string act = ToString(c.encoder.activation);
    e.Get("activation", act);
    c.encoder.activation = ActivationFromString(act);
    e.Finish();
  }
  if (const json* lj = r.Child("identity_loss"))
    c.identity_loss = LossSpecFromJsonAt(*lj, r.Path("identity_loss"));
  if (const json* lj = r.Child("content_loss"))
    c.content_loss = LossSpecFromJsonAt(*lj, r.Path("content_loss"));
  r.Get("lambda_content", c.lambda_content);
  r.Get("batch_size", c.batch_size);
  r.Get("sync_batch_size", c.sync_batch_size);
  r.Get("steps", c.steps);
  if (const json* oj = r.Child("optimizer")) {
    ObjectReader o(*oj, r.Path("optimizer"));
    std::string kind = c.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd";
    o.Get("kind", kind);
    if (kind == "adam") c.optimizer.kind = OptimizerKind::kAdam;
    else if (kind == "sgd") c.optimizer.kind = OptimizerKind::kSgd;
    else ConfigError("config.optimizer.kind: expected 'adam' or 'sgd'");
    o.Get("learning_rate", c.optimizer.learning_rate);
    o.Get("momentum", c.optimizer.momentum);
    o.Get("beta1", c.optimizer.beta1);
    o.Get("beta2", c.optimizer.beta2);
    o.Get("epsilon", c.optimizer.epsilon);
    o.Finish();
  }
  if (const json* ej = r.Child("eval")) {
    ObjectReader e(*ej, r.Path("eval"));
    e.Get("every", c.eval.every);
    e.Get("clips_per_identity", c.eval.clips_per_identity);
    e.Get("cbm_pairs", c.eval.cbm_pairs);
    e.Get("cbm_positive_fraction", c.eval.cbm_positive_fraction);
    e.Get("sv_pairs", c.eval.sv_pairs);
    e.Get("recall_k", c.eval.recall_k);
    if (const json* pj = e.Child("probe")) {
      ObjectReader p(*pj, e.Path("probe"));
      p.Get("epochs", c.eval.probe.epochs);
      p.Get("learning_rate", c.eval.probe.learning_rate);
      p.Get("l2", c.eval.probe.l2);
      p.Get("top_k", c.eval.probe.top_k);
      p.Finish();
    }
    e.Finish();
  }
  r.Finish();
  if (c.name.empty()) c.name = LossName(c.primary_loss());
  c.Validate();
  return c;
}

void ExperimentConfig::Validate() const {
  try {
    world.Validate();
    identity_loss.Validate();
    content_loss.Validate();
  } catch (const Error& e) {
    ConfigError(e.what());
  }
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(world.train_fraction * static_cast<double>(world.num_identities)));
  const std::size_t n_test = world.num_identities - n_train;
  if (encoder.hidden_dim == 0 || encoder.output_dim == 0)
    ConfigError("encoder dims must be >= 1");
  if (batch_size == 0 || batch_size > n_train)
    ConfigError("batch_size must be in [1, number of training identities]");
  if (sync_batch_size == 0 || sync_batch_size > world.frames)
    ConfigError("sync_batch_size must be in [1, frames]");
  if (!(lambda_content >= 0.0) || !std::isfinite(lambda_content))
    ConfigError("lambda_content must be >= 0");
  if (!(optimizer.learning_rate > 0.0)) ConfigError("learning_rate must be > 0");
  if (eval.every == 0) ConfigError("eval.every must be >= 1");
  if (n_test < 2) ConfigError("need at least two held-out identities");
  if (eval.clips_per_identity < 2) ConfigError("eval.clips_per_identity must be >= 2");
  if (!(eval.cbm_positive_fraction > 0.0 && eval.cbm_positive_fraction < 1.0))
    ConfigError("eval.cbm_positive_fraction must be in (0, 1)");
  if (eval.recall_k == 0) ConfigError("eval.recall_k must be >= 1");
  if (world.content_classes < 2) ConfigError("the content probe needs >= 2 content classes");
}

// ---------------------------------------------------------------------------
// Model and objective.

std::vector<std::span<double>> Model::Parameters() {
  auto views = audio.Parameters();
  for (auto v : visual.Parameters()) views.push_back(v);
  for (double* s : TrainableScalars(identity_loss)) views.emplace_back(s, 1);
  for (double* s : TrainableScalars(content_loss)) views.emplace_back(s, 1);
  return views;
}

Model InitModel(const ExperimentConfig& config, Rng& rng) {
  Model m;
  m.audio = StreamEncoder(config.world.dim_a, config.encoder, rng);
  m.visual = StreamEncoder(config.world.dim_b, config.encoder, rng);
  m.identity_loss = config.identity_loss;
  m.content_loss = config.content_loss;
  return m;
}

std::vector<std::span<const double>> ObjectiveResult::Views(const Model& model) const {
  auto views = audio.Views();
  for (auto v : visual.Views()) views.push_back(v);
  LossSpec id = model.identity_loss, content = model.content_loss;
  for (std::size_t s = 0; s < TrainableScalars(id).size(); ++s)
    views.emplace_back(&identity_scalars[s], 1);
  for (std::size_t s = 0; s < TrainableScalars(content).size(); ++s)
    views.emplace_back(&content_scalars[s], 1);
  return views;
}

namespace {

Matrix StackFrames(const std::vector<Clip>& clips, bool audio) {
  const Matrix& first = audio ? clips.front().audio : clips.front().visual;
  const std::size_t frames = first.rows();
  Matrix out(clips.size() * frames, first.cols());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const Matrix& m = audio ? clips[i].audio : clips[i].visual;
    Check(m.rows() == frames && m.cols() == first.cols(), "clips differ in shape");
    std::copy(m.data().begin(), m.data().end(), out.data().begin() + i * m.size());
  }
  return out;
}

Matrix RowBlock(const Matrix& m, std::size_t begin, std::size_t count) {
  Matrix out(count, m.cols());
  std::copy_n(m.data().begin() + begin * m.cols(), count * m.cols(), out.data().begin());
  return out;
}

void AddComponents(std::map<std::string, double>& into, const LossResult& r, double weight) {
  for (const auto& [name, v] : r.components) into[name] += weight * v;
}

}  // namespace

ObjectiveResult EvaluateObjective(const Model& model, const std::vector<Clip>* clips,
                                  const SyncBatch* sync, double content_weight,
                                  std::uint64_t pooling_seed) {
  ObjectiveResult out;
  out.audio = model.audio.ZeroGradients();
  out.visual = model.visual.ZeroGradients();

  if (clips != nullptr && !clips->empty()) {
    const std::size_t n = clips->size();
    const std::size_t frames = clips->front().audio.rows();
    StreamTape tape_a, tape_v;
    const Matrix ya = model.audio.Forward(StackFrames(*clips, true), Head::kIdentity, &tape_a);
    const Matrix yv = model.visual.Forward(StackFrames(*clips, false), Head::kIdentity, &tape_v);
    Rng pool_rng(pooling_seed);
    std::vector<Pooled> pooled_a, pooled_v;
    Matrix xa(n, ya.cols()), xv(n, yv.cols());
    for (std::size_t i = 0; i < n; ++i) {
      pooled_a.push_back(Pool(PoolingKind::kMeanOverTime, RowBlock(ya, i * frames, frames), pool_rng));
      pooled_v.push_back(
          Pool(PoolingKind::kRandomSelectOne, RowBlock(yv, i * frames, frames), pool_rng));
      std::copy(pooled_a[i].value.begin(), pooled_a[i].value.end(), xa.row(i).begin());
      std::copy(pooled_v[i].value.begin(), pooled_v[i].value.end(), xv.row(i).begin());
    }
    const LossResult r = EvaluateLoss(model.identity_loss, xa, xv);
    out.total += r.value;
    AddComponents(out.components, r, 1.0);
    out.identity_scalars[0] = r.grad_w;
    out.identity_scalars[1] = r.grad_b;
    Matrix up_a(ya.rows(), ya.cols()), up_v(yv.rows(), yv.cols());
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix ga = PoolBackward(pooled_a[i], r.grad_a.row(i));
      const Matrix gv = PoolBackward(pooled_v[i], r.grad_v.row(i));
      std::copy(ga.data().begin(), ga.data().end(), up_a.data().begin() + i * ga.size());
      std::copy(gv.data().begin(), gv.data().end(), up_v.data().begin() + i * gv.size());
    }
    model.audio.Backward(tape_a, up_a, &out.audio);
    model.visual.Backward(tape_v, up_v, &out.visual);
  }

  if (sync != nullptr && content_weight > 0.0) {
    StreamTape tape_a, tape_v;
    const Matrix ca = model.audio.Forward(sync->audio, Head::kContent, &tape_a);
    const Matrix cv = model.visual.Forward(sync->visual, Head::kContent, &tape_v);
    LossResult r = EvaluateLoss(model.content_loss, ca, cv);
    r.Scale(content_weight);
    out.total += r.value;
    AddComponents(out.components, r, 1.0);
    out.content_scalars[0] = r.grad_w;
    out.content_scalars[1] = r.grad_b;
    model.audio.Backward(tape_a, r.grad_a, &out.audio);
    model.visual.Backward(tape_v, r.grad_v, &out.visual);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment loop.

namespace {

enum Stream : std::uint64_t { kWorld = 11, kInit, kBatches, kPooling, kEval };

// Held-out clips and trial plans, fixed for the whole run.
struct EvalSet {
  std::vector<Clip> clips;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> visual_frame;  // frame used as the visual identity sample
  std::vector<std::size_t> gallery;       // first clip of every identity
  std::vector<std::size_t> probe_train;   // clip indices
  std::vector<std::size_t> probe_test;
  std::uint64_t cbm_seed = 0, sv_seed = 0, visual_seed = 0;
};

EvalSet BuildEvalSet(const SyntheticWorld& world, const EvalConfig& cfg, Rng& rng) {
  EvalSet e;
  for (std::size_t id : world.test_identities) {
    for (std::size_t c = 0; c < cfg.clips_per_identity; ++c) {
      const std::size_t index = e.clips.size();
      e.clips.push_back(MakeClip(world, id, rng));
      e.ids.push_back(id);
      e.visual_frame.push_back(rng.Index(world.config.frames));
      if (c == 0) e.gallery.push_back(index);
      (2 * c < cfg.clips_per_identity ? e.probe_train : e.probe_test).push_back(index);
    }
  }
  e.cbm_seed = rng.NextU64();
  e.sv_seed = rng.NextU64();
  e.visual_seed = rng.NextU64();
  return e;
}

MetricsPoint Evaluate(const Model& model, const EvalSet& e, const ExperimentConfig& config,
                      std::size_t step) {
  const std::size_t n = e.clips.size();
  const std::size_t dim = config.encoder.output_dim;
  Matrix audio_id(n, dim), visual_id(n, dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix ya = model.audio.Forward(e.clips[i].audio, Head::kIdentity, nullptr);
    Rng unused(0);
    const Pooled p = Pool(PoolingKind::kMeanOverTime, ya, unused);
    std::copy(p.value.begin(), p.value.end(), audio_id.row(i).begin());
    const Matrix frame = e.clips[i].visual.SelectRows(std::vector{e.visual_frame[i]});
    const Matrix yv = model.visual.Forward(frame, Head::kIdentity, nullptr);
    std::copy(yv.data().begin(), yv.data().end(), visual_id.row(i).begin());
  }

  MetricsPoint m;
  m.step = step;
  m.seed = config.seed;
  Rng cbm_rng(e.cbm_seed), sv_rng(e.sv_seed), visual_rng(e.visual_seed);
  m.cbm_eer = Eer(CrossModalTrials(audio_id, e.ids, visual_id, e.ids, config.eval.cbm_pairs,
                                   config.eval.cbm_positive_fraction, cbm_rng))
                  .eer;
  m.sv_eer = Eer(VerificationTrials(audio_id, e.ids, config.eval.sv_pairs, sv_rng)).eer;
  m.visual_eer = Eer(VerificationTrials(visual_id, e.ids, config.eval.sv_pairs, visual_rng)).eer;

  const Matrix queries = audio_id.SelectRows(e.gallery);
  const Matrix gallery = visual_id.SelectRows(e.gallery);
  m.recall_k = std::min(config.eval.recall_k, gallery.rows());
  m.recall_at_1 = RecallAtK(queries, gallery, 1);
  m.recall_at_k = RecallAtK(queries, gallery, m.recall_k);

  auto content_features = [&](const std::vector<std::size_t>& clip_indices, Matrix* feats,
                              std::vector<std::size_t>* labels) {
    const std::size_t frames = config.world.frames;
    *feats = Matrix(clip_indices.size() * frames, dim);
    for (std::size_t k = 0; k < clip_indices.size(); ++k) {
      const Clip& clip = e.clips[clip_indices[k]];
      const Matrix y = model.visual.Forward(clip.visual, Head::kContent, nullptr);
      std::copy(y.data().begin(), y.data().end(), feats->data().begin() + k * y.size());
      labels->insert(labels->end(), clip.content_classes.begin(), clip.content_classes.end());
    }
  };
  Matrix train_x, test_x;
  std::vector<std::size_t> train_y, test_y;
  content_features(e.probe_train, &train_x, &train_y);
  content_features(e.probe_test, &test_x, &test_y);
  const ProbeResult probe = LinearProbe(train_x, train_y, test_x, test_y,
                                        config.world.content_classes, config.eval.probe);
  m.probe_top1 = probe.top1;
  m.probe_topk = probe.topk;
  m.probe_k = probe.k;
  return m;
}

}  // namespace

RunReport RunExperiment(const ExperimentConfig& config, Model* final_model) {
  config.Validate();
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.config = config;

  const SyntheticWorld world = MakeWorld(config.world, Rng::Derive(config.seed, kWorld).NextU64());
  Rng init_rng = Rng::Derive(config.seed, kInit);
  Rng batch_rng = Rng::Derive(config.seed, kBatches);
  Rng pool_rng = Rng::Derive(config.seed, kPooling);
  Rng eval_rng = Rng::Derive(config.seed, kEval);

  Model model = InitModel(config, init_rng);
  Optimizer optimizer(config.optimizer);
  const EvalSet eval_set = BuildEvalSet(world, config.eval, eval_rng);
  const bool biometric = config.task == Task::kBiometric;
  const bool use_sync = !biometric || config.lambda_content > 0.0;
  const double content_weight = biometric ? config.lambda_content : 1.0;

  for (std::size_t step = 0; step < config.steps; ++step) {
    if (step % config.eval.every == 0) report.metrics.push_back(Evaluate(model, eval_set, config, step));

    std::vector<Clip> clips;
    if (biometric)
      clips = SampleBiometricBatch(world, config.batch_size, batch_rng, world.train_identities);
    SyncBatch sync;
    if (use_sync)
      sync = SampleSyncBatch(world, config.sync_batch_size, batch_rng, world.train_identities);

    const ObjectiveResult obj = EvaluateObjective(model, biometric ? &clips : nullptr,
                                                  use_sync ? &sync : nullptr, content_weight,
                                                  pool_rng.NextU64());
    CurvePoint point{step, obj.total, 0.0, 0.0, 0.0, 0.0};
    auto comp = [&](const char* key) {
      auto it = obj.components.find(key);
      return it == obj.components.end() ? 0.0 : it->second;
    };
    point.av = comp("AV");
    point.va = comp("VA");
    point.aav = comp("AAV");
    point.vva = comp("VVA");
    if (!std::isfinite(obj.total))
      throw Error(ErrorKind::kNumerical, "non-finite loss at step " + std::to_string(step));
    report.curve.push_back(point);

    const auto grads = obj.Views(model);
    for (const auto& g : grads)
      for (double v : g)
        if (!std::isfinite(v))
          throw Error(ErrorKind::kNumerical, "non-finite gradient at step " + std::to_string(step));
    const auto params = model.Parameters();
    optimizer.Step(params, grads);
    for (const auto& block : params)
      for (double v : block)
        if (!std::isfinite(v))
          throw Error(ErrorKind::kNumerical,
                      "non-finite parameters after step " + std::to_string(step));
  }
  report.metrics.push_back(Evaluate(model, eval_set, config, config.steps));

  if (final_model != nullptr) *final_model = std::move(model);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

// ---------------------------------------------------------------------------
// Controlled comparisons.

namespace {

json WithoutLosses(const ExperimentConfig& c) {
  json j = ConfigToJson(c);
  j.erase("identity_loss");
  j.erase("content_loss");
  j.erase("name");
  j.erase("seed");
  return j;
}

MetricsPoint Mean(const std::vector<MetricsPoint>& points) {
  MetricsPoint m = points.front();
  const double inv = 1.0 / static_cast<double>(points.size());
  m.cbm_eer = m.sv_eer = m.visual_eer = m.recall_at_1 = m.recall_at_k = 0.0;
  m.probe_top1 = m.probe_topk = 0.0;
  m.seed = 0;
  for (const auto& p : points) {
    m.cbm_eer += p.cbm_eer * inv;
    m.sv_eer += p.sv_eer * inv;
    m.visual_eer += p.visual_eer * inv;
    m.recall_at_1 += p.recall_at_1 * inv;
    m.recall_at_k += p.recall_at_k * inv;
    m.probe_top1 += p.probe_top1 * inv;
    m.probe_topk += p.probe_topk * inv;
  }
  return m;
}

}  // namespace

ComparisonTable CompareLosses(const std::vector<ExperimentConfig>& configs,
                              const std::vector<std::uint64_t>& seeds, std::size_t threads) {
  if (configs.empty()) ConfigError("compare needs at least one config");
  if (seeds.empty()) ConfigError("compare needs at least one seed");
  const json reference = WithoutLosses(configs.front());
  for (const auto& c : configs) {
    c.Validate();
    if (WithoutLosses(c) != reference)
      ConfigError("compared configs differ in more than their loss specs");
  }

  const std::size_t total = configs.size() * seeds.size();
  std::vector<MetricsPoint> finals(total);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    for (std::size_t job = next++; job < total; job = next++) {
      try {
        ExperimentConfig c = configs[job / seeds.size()];
        c.seed = seeds[job % seeds.size()];
        finals[job] = RunExperiment(c).metrics.back();
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, total);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  ComparisonTable table;
  table.task = configs.front().task;
  table.seeds = seeds;
  for (std::size_t job = 0; job < total; ++job)
    table.rows.push_back({configs[job / seeds.size()].name, seeds[job % seeds.size()], finals[job]});
  for (std::size_t c = 0; c < configs.size(); ++c) {
    MethodSummary s;
    s.method = configs[c].name;
    std::vector<MetricsPoint> mine(finals.begin() + c * seeds.size(),
                                   finals.begin() + (c + 1) * seeds.size());
    s.mean = Mean(mine);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      const MetricsPoint& base = finals[k];
      if (mine[k].sv_eer < base.sv_eer) ++s.sv_wins;
      if (mine[k].probe_top1 > base.probe_top1) ++s.probe_wins;
    }
    table.summary.push_back(s);
  }
  for (auto& s : table.summary) {
    s.sv_eer_delta = s.mean.sv_eer - table.summary.front().mean.sv_eer;
    s.cbm_eer_delta = s.mean.cbm_eer - table.summary.front().mean.cbm_eer;
    s.probe_top1_delta = s.mean.probe_top1 - table.summary.front().mean.probe_top1;
  }
  return table;
}

}  // namespace xmodal
