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

#ifndef XMODAL_LOSSES_H_
#define XMODAL_LOSSES_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xmodal/numerics.h"
#include "xmodal/similarity.h"

namespace xmodal {

enum class LossKind { kPairwiseContrastive, kPairwiseBinary, kMwm, kCddl };

// One training objective. Row j of the audio batch and row j of the video
// batch are the positive pair; every other row is a negative.
struct LossSpec {
  LossKind kind = LossKind::kMwm;
  SimilarityKernel kernel;
  // Hinge margin of the contrastive baseline.
  double margin = 1.0;
  // Logistic baseline: P(same) = sigmoid(bias - slope * distance).
  double slope = 1.0;
  double bias = 0.0;

  bool is_softmax() const { return kind == LossKind::kMwm || kind == LossKind::kCddl; }
  void Validate() const;
};

// Value and gradients of a loss. `grad_w` and `grad_b` are the gradients of
// the spec's two trainable scalars: (scale, offset) of a ScaledCosine kernel
// for the softmax family, (slope, bias) for the logistic baseline, zero
// otherwise. `components` holds AV / VA / AAV / VVA where applicable.
struct LossResult {
  double value = 0.0;
  Matrix grad_a;
  Matrix grad_v;
  double grad_w = 0.0;
  double grad_b = 0.0;
  std::map<std::string, double> components;

  LossResult& operator+=(const LossResult& other);
  void Scale(double s);
};

enum class PairLabel : std::uint8_t { kDifferent = 0, kSame = 1 };

// Audio-to-video N-way matching: mean over rows of the negative log softmax
// of the diagonal of Score(kernel, xa, xv).
LossResult LossAv(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);

// L_AV + L_VA, the second term with the modality roles swapped.
LossResult LossMwm(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);

// Within-modality discriminative term: row j's positive is the cross-modal
// pair (xa_j, xv_j), its negatives are the other audio rows xa_k, k != j.
LossResult LossAav(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);

// L_AV + L_VA + L_AAV + L_VVA.
LossResult LossCddl(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);

// Mean over pairs of d^2 (same) or max(0, margin - d)^2 (different). d is
// the Euclidean distance between rows; under a ScaledCosine kernel rows are
// L2-normalised first.
LossResult LossPairwiseContrastive(const SimilarityKernel& kernel, const Matrix& xa,
                                   const Matrix& xv, const std::vector<PairLabel>& labels,
                                   double margin);

// Mean logistic loss with logit (bias - slope * d), d the raw Euclidean row
// distance. grad_w / grad_b are the slope / bias gradients.
LossResult LossPairwiseBinary(const Matrix& xa, const Matrix& xv,
                              const std::vector<PairLabel>& labels, double slope,
                              double bias);

// Evaluates `spec` on an N-way matching batch. The pairwise baselines see
// the positive pair (j, j) and one negative (j, j + 1 mod N) per row.
LossResult EvaluateLoss(const LossSpec& spec, const Matrix& xa, const Matrix& xv);

// Mutable views of the spec's trainable scalars, ordered like
// LossResult::grad_w / grad_b. Empty when the loss has none.
std::vector<double*> TrainableScalars(LossSpec& spec);

// Compares analytic gradients (embeddings and trainable scalars) of `spec`
// against central finite differences on a random n x d batch. Returns the
// worst relative error over the gradient blocks.
double LossGradCheck(const LossSpec& spec, std::size_t n, std::size_t d, std::uint64_t seed);

// Relative error between two gradient blocks, ||a - b|| / max(||a||, ||b||, floor).
double RelativeError(std::span<const double> analytic, std::span<const double> numeric,
                     double floor = 1e-3);

}  // namespace xmodal

#endif  // XMODAL_LOSSES_H_
