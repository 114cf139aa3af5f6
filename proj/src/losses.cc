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

#include "xmodal/losses.h"

#include <algorithm>
#include <cmath>
#include <utility>

#include "xmodal/error.h"

namespace xmodal {

void LossSpec::Validate() const {
  kernel.Validate();
  if (kind == LossKind::kPairwiseContrastive)
    Check(margin > 0.0 && std::isfinite(margin), "contrastive margin must be > 0");
  if (kind == LossKind::kPairwiseBinary)
    Check(std::isfinite(slope) && std::isfinite(bias), "binary slope/bias must be finite");
}

LossResult& LossResult::operator+=(const LossResult& other) {
  value += other.value;
  grad_a += other.grad_a;
  grad_v += other.grad_v;
  grad_w += other.grad_w;
  grad_b += other.grad_b;
  for (const auto& [name, v] : other.components) components[name] += v;
  return *this;
}

void LossResult::Scale(double s) {
  value *= s;
  grad_a *= s;
  grad_v *= s;
  grad_w *= s;
  grad_b *= s;
  for (auto& [name, v] : components) v *= s;
}

namespace {

void CheckBatch(const Matrix& xa, const Matrix& xv) {
  Check(xa.rows() >= 1, "empty batch");
  Check(xa.rows() == xv.rows(), "batch sizes differ between modalities");
  Check(xa.cols() == xv.cols(), "embedding dimensions differ between modalities");
}

LossResult FromScoreGrad(double value, ScoreGradient g) {
  LossResult r;
  r.value = value;
  r.grad_a = std::move(g.d_a);
  r.grad_v = std::move(g.d_b);
  r.grad_w = g.d_scale;
  r.grad_b = g.d_offset;
  return r;
}

// Swaps the modality roles of a result computed with (xv, xa).
LossResult Swapped(LossResult r) {
  std::swap(r.grad_a, r.grad_v);
  return r;
}

}  // namespace

LossResult LossAv(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  CheckBatch(xa, xv);
  const std::size_t n = xa.rows();
  const Matrix logits = Score(kernel, xa, xv);
  Matrix upstream(n, n);
  double value = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    auto row = logits.row(j);
    const double lse = LogSumExp(row);
    value += lse - row[j];
    for (std::size_t k = 0; k < n; ++k)
      upstream(j, k) = std::exp(row[k] - lse) / static_cast<double>(n);
    upstream(j, j) -= 1.0 / static_cast<double>(n);
  }
  value /= static_cast<double>(n);
  return FromScoreGrad(value, ScoreGrad(kernel, xa, xv, upstream));
}

LossResult LossMwm(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  LossResult av = LossAv(kernel, xa, xv);
  LossResult va = Swapped(LossAv(kernel, xv, xa));
  av.components["AV"] = av.value;
  va.components["VA"] = va.value;
  av += va;
  return av;
}

LossResult LossAav(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  CheckBatch(xa, xv);
  const std::size_t n = xa.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Matrix cross = Score(kernel, xa, xv);
  const Matrix same = Score(kernel, xa, xa);

  Matrix up_cross(n, n);
  Matrix up_same(n, n);
  std::vector<double> logits;
  logits.reserve(n);
  double value = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    // Slot 0 is the cross-modal positive, then same-modality S(xa_k, xa_j).
    logits.assign(1, cross(j, j));
    for (std::size_t k = 0; k < n; ++k)
      if (k != j) logits.push_back(same(k, j));
    const double lse = LogSumExp(logits);
    value += lse - logits[0];
    up_cross(j, j) = (std::exp(logits[0] - lse) - 1.0) * inv_n;
    for (std::size_t k = 0, slot = 1; k < n; ++k)
      if (k != j) up_same(k, j) = std::exp(logits[slot++] - lse) * inv_n;
  }
  value *= inv_n;

  LossResult r = FromScoreGrad(value, ScoreGrad(kernel, xa, xv, up_cross));
  ScoreGradient g = ScoreGrad(kernel, xa, xa, up_same);
  r.grad_a += g.d_a;
  r.grad_a += g.d_b;
  r.grad_w += g.d_scale;
  r.grad_b += g.d_offset;
  return r;
}

LossResult LossCddl(const SimilarityKernel& kernel, const Matrix& xa, const Matrix& xv) {
  LossResult total = LossMwm(kernel, xa, xv);
  LossResult aav = LossAav(kernel, xa, xv);
  LossResult vva = Swapped(LossAav(kernel, xv, xa));
  aav.components["AAV"] = aav.value;
  vva.components["VVA"] = vva.value;
  total += aav;
  total += vva;
  return total;
}

namespace {

void CheckPairs(const Matrix& xa, const Matrix& xv, const std::vector<PairLabel>& labels) {
  CheckBatch(xa, xv);
  Check(labels.size() == xa.rows(), "one label per row pair required");
}

double Softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double Sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

LossResult LossPairwiseContrastive(const SimilarityKernel& kernel, const Matrix& xa,
                                   const Matrix& xv, const std::vector<PairLabel>& labels,
                                   double margin) {
  CheckPairs(xa, xv, labels);
  Check(margin > 0.0, "contrastive margin must be > 0");
  kernel.Validate();
  const bool normalize = kernel.kind == KernelKind::kScaledCosine;
  const std::size_t n = xa.rows(), dim = xa.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossResult r;
  r.grad_a = Matrix(n, dim);
  r.grad_v = Matrix(n, dim);
  std::vector<double> ua(dim), uv(dim), diff(dim), g(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double norm_a = normalize ? Norm(xa.row(i)) : 1.0;
    const double norm_v = normalize ? Norm(xv.row(i)) : 1.0;
    if (normalize && (norm_a * norm_a <= kCosineGuard || norm_v * norm_v <= kCosineGuard))
      Fail("degenerate embedding");
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      ua[k] = xa(i, k) / norm_a;
      uv[k] = xv(i, k) / norm_v;
      diff[k] = ua[k] - uv[k];
      sq += diff[k] * diff[k];
    }
    const double d = std::sqrt(sq);
    // dL/d(ua) = coef * diff.
    double coef = 0.0;
    if (labels[i] == PairLabel::kSame) {
      r.value += sq;
      coef = 2.0;
    } else if (d < margin) {
      r.value += (margin - d) * (margin - d);
      coef = d > 0.0 ? -2.0 * (margin - d) / d : 0.0;
    }
    if (coef == 0.0) continue;
    for (std::size_t k = 0; k < dim; ++k) g[k] = coef * diff[k] * inv_n;
    auto ga = r.grad_a.row(i);
    auto gv = r.grad_v.row(i);
    if (!normalize) {
      for (std::size_t k = 0; k < dim; ++k) {
        ga[k] = g[k];
        gv[k] = -g[k];
      }
      continue;
    }
    // Through u = x / |x|: dx = (g - (g.u) u) / |x|.
    const double ga_u = Dot(g, ua);
    const double gv_u = -Dot(g, uv);
    for (std::size_t k = 0; k < dim; ++k) {
      ga[k] = (g[k] - ga_u * ua[k]) / norm_a;
      gv[k] = (-g[k] - gv_u * uv[k]) / norm_v;
    }
  }
  r.value *= inv_n;
  return r;
}

LossResult LossPairwiseBinary(const Matrix& xa, const Matrix& xv,
                              const std::vector<PairLabel>& labels, double slope,
                              double bias) {
  CheckPairs(xa, xv, labels);
  Check(std::isfinite(slope) && std::isfinite(bias), "binary slope/bias must be finite");
  const std::size_t n = xa.rows(), dim = xa.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossResult r;
  r.grad_a = Matrix(n, dim);
  r.grad_v = Matrix(n, dim);
  std::vector<double> diff(dim);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      diff[k] = xa(i, k) - xv(i, k);
      sq += diff[k] * diff[k];
    }
    const double d = std::sqrt(sq);
    const double z = bias - slope * d;
    const bool same = labels[i] == PairLabel::kSame;
    r.value += same ? Softplus(-z) : Softplus(z);
    const double dz = (same ? Sigmoid(z) - 1.0 : Sigmoid(z)) * inv_n;
    r.grad_w += -d * dz;
    r.grad_b += dz;
    if (d == 0.0) continue;
    const double coef = -slope * dz / d;
    auto ga = r.grad_a.row(i);
    auto gv = r.grad_v.row(i);
    for (std::size_t k = 0; k < dim; ++k) {
      ga[k] = coef * diff[k];
      gv[k] = -coef * diff[k];
    }
  }
  r.value *= inv_n;
  return r;
}

namespace {

// Positive (j, j) for every row plus negative (j, j + 1 mod N) when N >= 2.
LossResult EvaluatePairwise(const LossSpec& spec, const Matrix& xa, const Matrix& xv) {
  const std::size_t n = xa.rows();
  std::vector<std::size_t> rows_a, rows_v;
  std::vector<PairLabel> labels;
  for (std::size_t j = 0; j < n; ++j) {
    rows_a.push_back(j);
    rows_v.push_back(j);
    labels.push_back(PairLabel::kSame);
  }
  if (n >= 2) {
    for (std::size_t j = 0; j < n; ++j) {
      rows_a.push_back(j);
      rows_v.push_back((j + 1) % n);
      labels.push_back(PairLabel::kDifferent);
    }
  }
  const Matrix pa = xa.SelectRows(rows_a);
  const Matrix pv = xv.SelectRows(rows_v);
  LossResult pr = spec.kind == LossKind::kPairwiseContrastive
                      ? LossPairwiseContrastive(spec.kernel, pa, pv, labels, spec.margin)
                      : LossPairwiseBinary(pa, pv, labels, spec.slope, spec.bias);
  LossResult r;
  r.value = pr.value;
  r.grad_w = pr.grad_w;
  r.grad_b = pr.grad_b;
  r.grad_a = Matrix(n, xa.cols());
  r.grad_v = Matrix(n, xv.cols());
  for (std::size_t p = 0; p < labels.size(); ++p) {
    auto src_a = pr.grad_a.row(p);
    auto src_v = pr.grad_v.row(p);
    auto dst_a = r.grad_a.row(rows_a[p]);
    auto dst_v = r.grad_v.row(rows_v[p]);
    for (std::size_t k = 0; k < src_a.size(); ++k) {
      dst_a[k] += src_a[k];
      dst_v[k] += src_v[k];
    }
  }
  return r;
}

}  // namespace

LossResult EvaluateLoss(const LossSpec& spec, const Matrix& xa, const Matrix& xv) {
  spec.Validate();
  CheckBatch(xa, xv);
  switch (spec.kind) {
    case LossKind::kMwm:
      return LossMwm(spec.kernel, xa, xv);
    case LossKind::kCddl:
      return LossCddl(spec.kernel, xa, xv);
    case LossKind::kPairwiseContrastive:
    case LossKind::kPairwiseBinary:
      return EvaluatePairwise(spec, xa, xv);
  }
  Fail("unknown loss kind");
}

std::vector<double*> TrainableScalars(LossSpec& spec) {
  if (spec.kind == LossKind::kPairwiseBinary) return {&spec.slope, &spec.bias};
  if (spec.is_softmax() && spec.kernel.has_learnable_scale())
    return {&spec.kernel.scale, &spec.kernel.offset};
  return {};
}

double RelativeError(std::span<const double> analytic, std::span<const double> numeric,
                     double floor) {
  Check(analytic.size() == numeric.size(), "gradient block sizes differ");
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), floor});
}

double LossGradCheck(const LossSpec& spec, std::size_t n, std::size_t d, std::uint64_t seed) {
  Check(n >= 2 && d >= 2, "gradient check needs n >= 2 and d >= 2");
  constexpr double kStep = 1e-6;
  Rng rng(seed);
  Matrix xa = RandomNormal(n, d, rng);
  Matrix xv = RandomNormal(n, d, rng);
  LossSpec probe = spec;
  const LossResult analytic = EvaluateLoss(probe, xa, xv);

  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + kStep;
    const double up = EvaluateLoss(probe, xa, xv).value;
    slot = saved - kStep;
    const double down = EvaluateLoss(probe, xa, xv).value;
    slot = saved;
    return (up - down) / (2.0 * kStep);
  };

  std::vector<double> num_a(xa.size()), num_v(xv.size());
  for (std::size_t i = 0; i < xa.size(); ++i) num_a[i] = central(xa.data()[i]);
  for (std::size_t i = 0; i < xv.size(); ++i) num_v[i] = central(xv.data()[i]);
  double worst = std::max(RelativeError(analytic.grad_a.data(), num_a),
                          RelativeError(analytic.grad_v.data(), num_v));

  std::vector<double*> scalars = TrainableScalars(probe);
  const double analytic_scalars[2] = {analytic.grad_w, analytic.grad_b};
  for (std::size_t s = 0; s < scalars.size(); ++s) {
    const double numeric = central(*scalars[s]);
    worst = std::max(worst, RelativeError(std::span(&analytic_scalars[s], 1),
                                          std::span(&numeric, 1)));
  }
  return worst;
}

}  // namespace xmodal
