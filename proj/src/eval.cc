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

#include "xmodal/eval.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <string>

#include "xmodal/error.h"

namespace xmodal {

std::size_t TrialSet::num_same() const {
  return static_cast<std::size_t>(std::count(same.begin(), same.end(), true));
}

EerResult Eer(const TrialSet& trials) {
  Check(trials.scores.size() == trials.same.size(), "scores and labels differ in length");
  const std::size_t n_pos = trials.num_same();
  const std::size_t n_neg = trials.num_different();
  if (n_pos == 0 || n_neg == 0) Fail("EER needs both same and different trials");

  std::vector<std::size_t> order(trials.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return trials.scores[a] < trials.scores[b];
  });

  // Operating points at each distinct score (ascending), then +inf.
  struct Point {
    double threshold, far, frr;
  };
  std::vector<Point> points;
  std::size_t pos_below = 0, neg_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double tau = trials.scores[order[i]];
    points.push_back({tau, static_cast<double>(n_neg - neg_below) / static_cast<double>(n_neg),
                      static_cast<double>(pos_below) / static_cast<double>(n_pos)});
    for (; i < order.size() && trials.scores[order[i]] == tau; ++i)
      (trials.same[order[i]] ? pos_below : neg_below) += 1;
  }
  points.push_back({std::numeric_limits<double>::infinity(), 0.0, 1.0});

  // FAR - FRR starts at 1 and ends at -1; find the first point where it is <= 0.
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double hi = points[i - 1].far - points[i - 1].frr;
    const double lo = points[i].far - points[i].frr;
    if (lo > 0.0) continue;
    const double t = hi / (hi - lo);
    EerResult r;
    r.eer = points[i - 1].far + t * (points[i].far - points[i - 1].far);
    r.threshold = std::isinf(points[i].threshold)
                      ? points[i - 1].threshold
                      : points[i - 1].threshold +
                            t * (points[i].threshold - points[i - 1].threshold);
    return r;
  }
  Fail("EER sweep did not cross");  // unreachable: the last point has FAR - FRR = -1
}

namespace {

double Cosine(std::span<const double> a, std::span<const double> b) {
  const double na = Norm(a), nb = Norm(b);
  if (!(na * na > kCosineGuard) || !(nb * nb > kCosineGuard)) Fail("degenerate embedding");
  return Dot(a, b) / (na * nb);
}

std::map<std::size_t, std::vector<std::size_t>> GroupByIdentity(
    const std::vector<std::size_t>& ids) {
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ids.size(); ++i) groups[ids[i]].push_back(i);
  return groups;
}

std::size_t CountPositives(std::size_t num_pairs, double positive_fraction) {
  Check(positive_fraction > 0.0 && positive_fraction < 1.0, "positive_fraction must be in (0, 1)");
  return static_cast<std::size_t>(std::llround(static_cast<double>(num_pairs) * positive_fraction));
}

// Rejection sampling bound; generous because every draw has a fixed,
// non-trivial acceptance probability once the preconditions hold.
constexpr int kMaxDraws = 1 << 20;

}  // namespace

TrialSet CrossModalTrials(const Matrix& emb_a, const std::vector<std::size_t>& ids_a,
                          const Matrix& emb_b, const std::vector<std::size_t>& ids_b,
                          std::size_t num_pairs, double positive_fraction, Rng& rng) {
  Check(emb_a.rows() == ids_a.size() && emb_b.rows() == ids_b.size(),
        "one identity per embedding row required");
  Check(emb_a.cols() == emb_b.cols(), "dimension mismatch");
  auto groups_b = GroupByIdentity(ids_b);
  std::map<std::size_t, int> all_ids;
  for (std::size_t id : ids_a) all_ids[id] |= 1;
  for (std::size_t id : ids_b) all_ids[id] |= 2;
  if (all_ids.size() < 2) Fail("cross-modal trials need at least two identities");

  TrialSet trials;
  if (num_pairs == 0) {
    for (std::size_t i = 0; i < emb_a.rows(); ++i)
      for (std::size_t j = 0; j < emb_b.rows(); ++j)
        trials.Add(Cosine(emb_a.row(i), emb_b.row(j)), ids_a[i] == ids_b[j]);
    return trials;
  }

  const std::size_t n_pos = CountPositives(num_pairs, positive_fraction);
  bool has_positive = false, has_negative = false;
  for (std::size_t id : ids_a) {
    has_positive |= groups_b.count(id) > 0;
    has_negative |= groups_b.size() > groups_b.count(id);
  }
  if (n_pos > 0 && !has_positive) Fail("no identity appears in both modalities");
  if (n_pos < num_pairs && !has_negative) Fail("no cross-identity pairs available");

  for (std::size_t t = 0; t < num_pairs; ++t) {
    const bool want_same = t < n_pos;
    for (int draw = 0;; ++draw) {
      if (draw == kMaxDraws) Fail("trial sampling did not converge");
      const std::size_t i = rng.Index(emb_a.rows());
      auto it = groups_b.find(ids_a[i]);
      if (want_same) {
        if (it == groups_b.end()) continue;
        const std::size_t j = it->second[rng.Index(it->second.size())];
        trials.Add(Cosine(emb_a.row(i), emb_b.row(j)), true);
        break;
      }
      const std::size_t j = rng.Index(emb_b.rows());
      if (ids_b[j] == ids_a[i]) continue;
      trials.Add(Cosine(emb_a.row(i), emb_b.row(j)), false);
      break;
    }
  }
  return trials;
}

TrialSet VerificationTrials(const Matrix& emb, const std::vector<std::size_t>& ids,
                            std::size_t num_pairs, Rng& rng, double positive_fraction) {
  Check(emb.rows() == ids.size(), "one identity per embedding row required");
  auto groups = GroupByIdentity(ids);
  if (groups.size() < 2) Fail("verification trials need at least two identities");
  TrialSet trials;
  if (num_pairs == 0) {
    for (std::size_t i = 0; i < emb.rows(); ++i)
      for (std::size_t j = i + 1; j < emb.rows(); ++j)
        trials.Add(Cosine(emb.row(i), emb.row(j)), ids[i] == ids[j]);
    return trials;
  }

  std::vector<std::size_t> repeated;  // rows whose identity has another row
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (groups[ids[i]].size() >= 2) repeated.push_back(i);

  const std::size_t n_pos = CountPositives(num_pairs, positive_fraction);
  if (n_pos > 0 && repeated.empty()) Fail("no identity has two embeddings");

  for (std::size_t t = 0; t < num_pairs; ++t) {
    if (t < n_pos) {
      const std::size_t i = repeated[rng.Index(repeated.size())];
      const auto& g = groups[ids[i]];
      std::size_t j;
      do {
        j = g[rng.Index(g.size())];
      } while (j == i);
      trials.Add(Cosine(emb.row(i), emb.row(j)), true);
      continue;
    }
    for (int draw = 0;; ++draw) {
      if (draw == kMaxDraws) Fail("trial sampling did not converge");
      const std::size_t i = rng.Index(emb.rows());
      const std::size_t j = rng.Index(emb.rows());
      if (ids[i] == ids[j]) continue;
      trials.Add(Cosine(emb.row(i), emb.row(j)), false);
      break;
    }
  }
  return trials;
}

double RecallAtK(const Matrix& queries, const Matrix& gallery, std::size_t k) {
  Check(queries.rows() == gallery.rows(), "query j must match gallery row j");
  Check(queries.rows() > 0, "empty retrieval set");
  Check(k >= 1 && k <= gallery.rows(), "k must be in [1, gallery size]");
  const Matrix s = PairwiseCosine(queries, gallery);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < s.rows(); ++q) {
    const double target = s(q, q);
    std::size_t rank = 0;
    for (std::size_t g = 0; g < s.cols(); ++g)
      if (s(q, g) > target || (s(q, g) == target && g < q)) ++rank;
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(s.rows());
}

ProbeResult LinearProbe(const Matrix& train_features, const std::vector<std::size_t>& train_labels,
                        const Matrix& test_features, const std::vector<std::size_t>& test_labels,
                        std::size_t num_classes, const ProbeConfig& config) {
  Check(num_classes >= 2, "probe needs at least two classes");
  Check(train_features.rows() == train_labels.size() && test_features.rows() == test_labels.size(),
        "one label per feature row required");
  Check(train_features.cols() == test_features.cols(), "train/test feature widths differ");
  Check(test_features.rows() > 0, "empty probe test set");
  std::vector<bool> seen(num_classes, false);
  for (std::size_t y : train_labels) {
    Check(y < num_classes, "label out of range");
    seen[y] = true;
  }
  for (std::size_t y : test_labels) Check(y < num_classes, "label out of range");
  for (std::size_t c = 0; c < num_classes; ++c)
    if (!seen[c]) Fail("class " + std::to_string(c) + " absent from the probe training set");

  const std::size_t n = train_features.rows(), dim = train_features.cols();
  std::vector<double> mean(dim, 0.0), inv_std(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += train_features(i, d) / static_cast<double>(n);
  for (std::size_t d = 0; d < dim; ++d) {
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = train_features(i, d) - mean[d];
      var += c * c / static_cast<double>(n);
    }
    inv_std[d] = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  }
  auto standardize = [&](const Matrix& m) {
    Matrix out(m.rows(), dim);
    for (std::size_t i = 0; i < m.rows(); ++i)
      for (std::size_t d = 0; d < dim; ++d) out(i, d) = (m(i, d) - mean[d]) * inv_std[d];
    return out;
  };
  const Matrix x = standardize(train_features);
  const Matrix xt = standardize(test_features);

  Matrix w(num_classes, dim);
  std::vector<double> b(num_classes, 0.0);
  std::vector<double> logits(num_classes);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Matrix gw(num_classes, dim);
    std::vector<double> gb(num_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < num_classes; ++c) logits[c] = b[c] + Dot(w.row(c), x.row(i));
      const double lse = LogSumExp(logits);
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double g =
            (std::exp(logits[c] - lse) - (c == train_labels[i] ? 1.0 : 0.0)) / static_cast<double>(n);
        gb[c] += g;
        auto gwc = gw.row(c);
        auto xi = x.row(i);
        for (std::size_t d = 0; d < dim; ++d) gwc[d] += g * xi[d];
      }
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
      b[c] -= config.learning_rate * gb[c];
      for (std::size_t d = 0; d < dim; ++d)
        w(c, d) -= config.learning_rate * (gw(c, d) + config.l2 * w(c, d));
    }
  }

  ProbeResult r;
  r.num_classes = num_classes;
  r.k = std::min<std::size_t>(std::max<std::size_t>(config.top_k, 1), num_classes);
  std::size_t top1 = 0, topk = 0;
  for (std::size_t i = 0; i < xt.rows(); ++i) {
    for (std::size_t c = 0; c < num_classes; ++c) logits[c] = b[c] + Dot(w.row(c), xt.row(i));
    const std::size_t y = test_labels[i];
    std::size_t rank = 0;
    for (std::size_t c = 0; c < num_classes; ++c)
      if (logits[c] > logits[y] || (logits[c] == logits[y] && c < y)) ++rank;
    if (rank == 0) ++top1;
    if (rank < r.k) ++topk;
  }
  r.top1 = static_cast<double>(top1) / static_cast<double>(xt.rows());
  r.topk = static_cast<double>(topk) / static_cast<double>(xt.rows());
  return r;
}

void WriteTrialsCsv(const TrialSet& trials, std::ostream& out) {
  out << "score,label\n";
  char buf[64];
  for (std::size_t i = 0; i < trials.size(); ++i) {
    auto res = std::to_chars(buf, buf + sizeof(buf), trials.scores[i]);
    out.write(buf, res.ptr - buf);
    out << ',' << (trials.same[i] ? '1' : '0') << '\n';
  }
}

TrialSet ReadTrialsCsv(std::istream& in) {
  TrialSet trials;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line == "score,label") continue;
    const auto comma = line.find(',');
    auto bad = [&]() {
      throw Error(ErrorKind::kConfig, "trials line " + std::to_string(line_no) + ": expected score,label");
    };
    if (comma == std::string::npos) bad();
    double score = 0.0;
    auto res = std::from_chars(line.data(), line.data() + comma, score);
    if (res.ec != std::errc() || res.ptr != line.data() + comma || !std::isfinite(score)) bad();
    const std::string label = line.substr(comma + 1);
    if (label == "1" || label == "same") {
      trials.Add(score, true);
    } else if (label == "0" || label == "different") {
      trials.Add(score, false);
    } else {
      bad();
    }
  }
  return trials;
}

}  // namespace xmodal
