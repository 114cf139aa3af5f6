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

#ifndef XMODAL_SIMILARITY_H_
#define XMODAL_SIMILARITY_H_

#include "xmodal/numerics.h"

namespace xmodal {

enum class KernelKind { kInverseEuclidean, kScaledCosine };

// Similarity S(a, b) used inside the matching softmax. Only its logarithm is
// ever materialised:
//   InverseEuclidean: log S = 1 / (||a - b|| + eps)
//   ScaledCosine:     log S = w * cos(a, b) + b
// `scale` (w) and `offset` (b) are trainable; `eps` floors the distance so
// that the score and its gradient stay finite when two embeddings coincide.
struct SimilarityKernel {
  KernelKind kind = KernelKind::kScaledCosine;
  double scale = 10.0;
  double offset = -5.0;
  double eps = 1e-6;

  static SimilarityKernel InverseEuclidean(double eps = 1e-6) {
    return {KernelKind::kInverseEuclidean, 0.0, 0.0, eps};
  }
  static SimilarityKernel ScaledCosine(double scale = 10.0, double offset = -5.0) {
    return {KernelKind::kScaledCosine, scale, offset, 1e-6};
  }

  bool has_learnable_scale() const { return kind == KernelKind::kScaledCosine; }
  void Validate() const;
};

// N x M matrix of log-similarities between rows of a and rows of b.
Matrix Score(const SimilarityKernel& kernel, const Matrix& a, const Matrix& b);

struct ScoreGradient {
  Matrix d_a;             // N x D
  Matrix d_b;             // M x D
  double d_scale = 0.0;   // zero for InverseEuclidean
  double d_offset = 0.0;  // zero for InverseEuclidean
};

// Gradient of sum_ij upstream(i, j) * Score(kernel, a, b)(i, j).
ScoreGradient ScoreGrad(const SimilarityKernel& kernel, const Matrix& a,
                        const Matrix& b, const Matrix& upstream);

}  // namespace xmodal

#endif  // XMODAL_SIMILARITY_H_
