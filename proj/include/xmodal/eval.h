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

#ifndef XMODAL_EVAL_H_
#define XMODAL_EVAL_H_

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "xmodal/numerics.h"

namespace xmodal {

// Scored verification trials. Higher score = more likely the same identity.
struct TrialSet {
  std::vector<double> scores;
  std::vector<bool> same;

  std::size_t size() const { return scores.size(); }
  std::size_t num_same() const;
  std::size_t num_different() const { return size() - num_same(); }
  void Add(double score, bool is_same) {
    scores.push_back(score);
    same.push_back(is_same);
  }
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Trials with score >= threshold are accepted. Sweeps every distinct score
// as a threshold and interpolates linearly between the two operating points
// where FAR - FRR changes sign.
EerResult Eer(const TrialSet& trials);

// Audio-to-visual trials scored by cosine similarity. Trial (i, j) pairs row
// i of emb_a with row j of emb_b; it is "same" when ids_a[i] == ids_b[j].
// Exactly round(num_pairs * positive_fraction) trials are positive. With
// num_pairs == 0 every (i, j) combination is scored once instead.
TrialSet CrossModalTrials(const Matrix& emb_a, const std::vector<std::size_t>& ids_a,
                          const Matrix& emb_b, const std::vector<std::size_t>& ids_b,
                          std::size_t num_pairs, double positive_fraction, Rng& rng);

// Within-modality trials between distinct rows of `emb`, scored by cosine
// similarity. num_pairs == 0 scores every unordered pair of rows once.
TrialSet VerificationTrials(const Matrix& emb, const std::vector<std::size_t>& ids,
                            std::size_t num_pairs, Rng& rng, double positive_fraction = 0.5);

// Fraction of queries whose true match (gallery row with the same index)
// ranks in the top k by cosine similarity. Ties rank the lower gallery index
// first.
double RecallAtK(const Matrix& queries, const Matrix& gallery, std::size_t k);

struct ProbeConfig {
  std::size_t epochs = 300;
  double learning_rate = 0.5;
  double l2 = 1e-4;
  std::size_t top_k = 5;
};

struct ProbeResult {
  double top1 = 0.0;
  double topk = 0.0;
  std::size_t k = 0;
  std::size_t num_classes = 0;
};

// Multinomial logistic regression on frozen, standardised features, trained
// by full-batch gradient descent from zero weights.
ProbeResult LinearProbe(const Matrix& train_features, const std::vector<std::size_t>& train_labels,
                        const Matrix& test_features, const std::vector<std::size_t>& test_labels,
                        std::size_t num_classes, const ProbeConfig& config);

// `score,label` rows with a header line; label is 1 (same) or 0 (different).
void WriteTrialsCsv(const TrialSet& trials, std::ostream& out);
TrialSet ReadTrialsCsv(std::istream& in);

}  // namespace xmodal

#endif  // XMODAL_EVAL_H_
