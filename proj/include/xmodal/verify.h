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

#ifndef XMODAL_VERIFY_H_
#define XMODAL_VERIFY_H_

// Reference implementations used by the test suites and `xmodal selftest`.
// Everything here is written the slow, obvious way and shares no code path
// with the production losses, metrics or backprop.

#include <cstdint>
#include <string>
#include <vector>

#include "xmodal/losses.h"
#include "xmodal/numerics.h"
#include "xmodal/similarity.h"

namespace xmodal::verify {

// S(a, b) itself (not its log), evaluated per pair with scalar loops.
double NaiveSimilarity(const SimilarityKernel& kernel, std::span<const double> a,
                       std::span<const double> b);

// Direct exp/sum evaluations of the matching objectives.
double NaiveLossAv(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);
double NaiveLossAav(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);
double NaiveLossMwm(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);
double NaiveLossCddl(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv);

// Central-difference gradient of sum_ij upstream_ij * logS_ij w.r.t. every
// entry of a and b, followed by the scale and offset.
std::vector<double> NumericScoreGrad(const SimilarityKernel& kernel, const Matrix& a,
                                     const Matrix& b, const Matrix& upstream,
                                     double step = 1e-6);

// Equal error rate by recounting false accepts / rejects from scratch at
// every candidate threshold (O(n^2)), interpolated at the sign change of
// FAR - FRR.
double BruteForceEer(const std::vector<double>& scores, const std::vector<bool>& same);

// Recall@k by fully sorting every query's gallery scores. Ties go to the
// lower gallery index.
double BruteForceRecallAtK(const Matrix& queries, const Matrix& gallery, std::size_t k);

// Finite-difference check of the full pipeline: two small two-layer
// encoders, mean-pooled audio and select-one visual frames, then `spec`.
// Covers every encoder parameter and the loss's trainable scalars.
double EndToEndGradCheck(const LossSpec& spec, std::uint64_t seed);

struct CheckOutcome {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Gradient checks and oracle comparisons run by `xmodal selftest`.
std::vector<CheckOutcome> RunSelfTest(std::size_t instances);

}  // namespace xmodal::verify

#endif  // XMODAL_VERIFY_H_
