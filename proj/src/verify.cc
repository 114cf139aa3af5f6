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

#include "xmodal/verify.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xmodal/error.h"
#include "xmodal/eval.h"
#include "xmodal/trainer.h"

namespace xmodal::verify {

double NaiveSimilarity(const SimilarityKernel& kernel, std::span<const double> a,
                       std::span<const double> b) {
  if (kernel.kind == KernelKind::kInverseEuclidean) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
    return std::exp(1.0 / (std::sqrt(sq) + kernel.eps));
  }
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return std::exp(kernel.scale * ab / (std::sqrt(aa) * std::sqrt(bb)) + kernel.offset);
}

double NaiveLossAv(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  const std::size_t n = xa.rows();
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) denom += NaiveSimilarity(kernel, xa.row(j), xv.row(k));
    total += std::log(NaiveSimilarity(kernel, xa.row(j), xv.row(j)) / denom);
  }
  return -total / static_cast<double>(n);
}

double NaiveLossAav(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  const std::size_t n = xa.rows();
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double positive = NaiveSimilarity(kernel, xa.row(j), xv.row(j));
    double denom = positive;
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) denom += NaiveSimilarity(kernel, xa.row(k), xa.row(j));
    total += std::log(positive / denom);
  }
  return -total / static_cast<double>(n);
}

double NaiveLossMwm(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  return NaiveLossAv(kernel, xa, xv) + NaiveLossAv(kernel, xv, xa);
}

double NaiveLossCddl(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  return NaiveLossMwm(kernel, xa, xv) + NaiveLossAav(kernel, xa, xv) +
         NaiveLossAav(kernel, xv, xa);
}

std::vector<double> NumericScoreGrad(const SimilarityKernel& kernel, const Matrix& a,
                                     const Matrix& b, const Matrix& upstream, double step) {
  Matrix pa = a, pb = b;
  SimilarityKernel pk = kernel;
  auto objective = [&]() {
    double f = 0.0;
    for (std::size_t i = 0; i < pa.rows(); ++i)
      for (std::size_t j = 0; j < pb.rows(); ++j)
        f += upstream(i, j) * std::log(NaiveSimilarity(pk, pa.row(i), pb.row(j)));
    return f;
  };
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + step;
    const double up = objective();
    slot = saved - step;
    const double down = objective();
    slot = saved;
    return (up - down) / (2.0 * step);
  };
  std::vector<double> g;
  for (double& v : pa.data()) g.push_back(central(v));
  for (double& v : pb.data()) g.push_back(central(v));
  if (kernel.kind == KernelKind::kScaledCosine) {
    g.push_back(central(pk.scale));
    g.push_back(central(pk.offset));
  } else {
    g.push_back(0.0);
    g.push_back(0.0);
  }
  return g;
}

namespace {

// FAR and FRR at `threshold`, counted from scratch.
std::pair<double, double> Rates(const std::vector<double>& scores, const std::vector<bool>& same,
                                double threshold) {
  double fa = 0, fr = 0, pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (same[i]) {
      pos += 1;
      if (scores[i] < threshold) fr += 1;
    } else {
      neg += 1;
      if (scores[i] >= threshold) fa += 1;
    }
  }
  return {fa / neg, fr / pos};
}

}  // namespace

double BruteForceEer(const std::vector<double>& scores, const std::vector<bool>& same) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());
  auto [far_prev, frr_prev] = Rates(scores, same, thresholds[0]);
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    auto [far, frr] = Rates(scores, same, thresholds[i]);
    if (far - frr <= 0.0) {
      const double t = (far_prev - frr_prev) / ((far_prev - frr_prev) - (far - frr));
      return far_prev + t * (far - far_prev);
    }
    far_prev = far;
    frr_prev = frr;
  }
  return 0.5;
}

double BruteForceRecallAtK(const Matrix& queries, const Matrix& gallery, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    std::vector<double> s(gallery.rows());
    for (std::size_t g = 0; g < gallery.rows(); ++g) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t d = 0; d < queries.cols(); ++d) {
        ab += queries(q, d) * gallery(g, d);
        aa += queries(q, d) * queries(q, d);
        bb += gallery(g, d) * gallery(g, d);
      }
      s[g] = ab / (std::sqrt(aa) * std::sqrt(bb));
    }
    std::vector<std::size_t> order(gallery.rows());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return s[x] > s[y]; });
    const auto pos = std::find(order.begin(), order.end(), q) - order.begin();
    if (static_cast<std::size_t>(pos) < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.rows());
}

double EndToEndGradCheck(const LossSpec& spec, std::uint64_t seed) {
  constexpr double kStep = 1e-6;
  constexpr std::size_t kClips = 3, kFrames = 3, kDimA = 5, kDimB = 6;
  Rng rng(seed);
  EncoderConfig enc{4, 3, Activation::kTanh};
  Model model;
  model.audio = StreamEncoder(kDimA, enc, rng);
  model.visual = StreamEncoder(kDimB, enc, rng);
  model.identity_loss = spec;
  model.content_loss = spec;

  std::vector<Clip> clips(kClips);
  for (std::size_t i = 0; i < kClips; ++i) {
    clips[i].identity = i;
    clips[i].audio = RandomNormal(kFrames, kDimA, rng);
    clips[i].visual = RandomNormal(kFrames, kDimB, rng);
  }
  SyncBatch sync;
  sync.audio = RandomNormal(kClips, kDimA, rng);
  sync.visual = RandomNormal(kClips, kDimB, rng);
  const double content_weight = 0.5;
  const std::uint64_t pooling_seed = rng.NextU64();

  const ObjectiveResult analytic =
      EvaluateObjective(model, &clips, &sync, content_weight, pooling_seed);
  const auto grads = analytic.Views(model);
  const auto params = model.Parameters();
  Check(grads.size() == params.size(), "parameter/gradient layout mismatch");

  double worst = 0.0;
  for (std::size_t blk = 0; blk < params.size(); ++blk) {
    std::vector<double> numeric(params[blk].size());
    for (std::size_t i = 0; i < params[blk].size(); ++i) {
      double& slot = params[blk][i];
      const double saved = slot;
      slot = saved + kStep;
      const double up = EvaluateObjective(model, &clips, &sync, content_weight, pooling_seed).total;
      slot = saved - kStep;
      const double down =
          EvaluateObjective(model, &clips, &sync, content_weight, pooling_seed).total;
      slot = saved;
      numeric[i] = (up - down) / (2.0 * kStep);
    }
    worst = std::max(worst, RelativeError(grads[blk], numeric));
  }
  return worst;
}

namespace {

std::vector<LossSpec> AllLossCombinations() {
  std::vector<LossSpec> specs;
  for (const auto& name : LossPresetNames()) specs.push_back(LossPreset(name));
  return specs;
}

}  // namespace

std::vector<CheckOutcome> RunSelfTest(std::size_t instances) {
  std::vector<CheckOutcome> out;
  auto record = [&](std::string name, double measured, double tol) {
    out.push_back({std::move(name), measured, tol, measured < tol});
  };

  for (const LossSpec& spec : AllLossCombinations()) {
    double worst = 0.0, worst_e2e = 0.0;
    for (std::size_t i = 0; i < instances; ++i) {
      worst = std::max(worst, LossGradCheck(spec, 2 + i % 7, 2 + i % 5, 1000 + i));
      worst_e2e = std::max(worst_e2e, EndToEndGradCheck(spec, 5000 + i));
    }
    record("gradcheck/" + LossName(spec), worst, 1e-5);
    record("gradcheck-end-to-end/" + LossName(spec), worst_e2e, 1e-5);
  }

  double loss_gap = 0.0;
  for (std::size_t i = 0; i < instances; ++i) {
    Rng rng(9000 + i);
    const std::size_t n = 1 + i % 8, d = 2 + i % 6;
    const Matrix xa = RandomNormal(n, d, rng), xv = RandomNormal(n, d, rng);
    for (const SimilarityKernel& k :
         {SimilarityKernel::ScaledCosine(), SimilarityKernel::InverseEuclidean()}) {
      loss_gap = std::max(loss_gap, std::abs(LossAv(k, xa, xv).value - NaiveLossAv(k, xa, xv)));
      loss_gap = std::max(loss_gap, std::abs(LossMwm(k, xa, xv).value - NaiveLossMwm(k, xa, xv)));
      loss_gap = std::max(loss_gap, std::abs(LossAav(k, xa, xv).value - NaiveLossAav(k, xa, xv)));
      loss_gap = std::max(loss_gap, std::abs(LossCddl(k, xa, xv).value - NaiveLossCddl(k, xa, xv)));
    }
  }
  record("oracle/softmax-losses", loss_gap, 1e-10);

  double eer_gap = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(instances, 20); ++i) {
    Rng rng(12000 + i);
    TrialSet t;
    const std::size_t n = 10 + 97 * i;
    for (std::size_t k = 0; k < n; ++k) {
      const bool same = k % 3 == 0;
      // Coarse grid so that ties occur.
      t.Add(std::round((rng.Normal() + (same ? 1.0 : 0.0)) * 8.0) / 8.0, same);
    }
    eer_gap = std::max(eer_gap, std::abs(Eer(t).eer - BruteForceEer(t.scores, t.same)));
  }
  record("oracle/eer", eer_gap, 1e-9);

  double recall_gap = 0.0;
  for (std::size_t i = 0; i < std::min<std::size_t>(instances, 20); ++i) {
    Rng rng(15000 + i);
    const Matrix q = RandomNormal(10, 4, rng), g = RandomNormal(10, 4, rng);
    for (std::size_t k = 1; k <= 10; ++k)
      recall_gap = std::max(recall_gap, std::abs(RecallAtK(q, g, k) - BruteForceRecallAtK(q, g, k)));
  }
  // Exact agreement required; any positive gap fails.
  record("oracle/recall-at-k", recall_gap, std::numeric_limits<double>::min());
  return out;
}

}  // namespace xmodal::verify
