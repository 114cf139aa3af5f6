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

#include "xmodal/similarity.h"

#include <cmath>

#include "xmodal/error.h"

namespace xmodal {

void SimilarityKernel::Validate() const {
  Check(std::isfinite(scale) && std::isfinite(offset), "kernel parameters must be finite");
  if (kind == KernelKind::kInverseEuclidean)
    Check(eps > 0.0 && std::isfinite(eps), "InverseEuclidean kernel needs eps > 0");
}

Matrix Score(const SimilarityKernel& kernel, const Matrix& a, const Matrix& b) {
  kernel.Validate();
  if (kernel.kind == KernelKind::kInverseEuclidean) {
    Matrix s = PairwiseEuclidean(a, b);
    for (double& v : s.data()) v = 1.0 / (v + kernel.eps);
    CheckFinite(s.AllFinite(), "non-finite similarity score");
    return s;
  }
  Matrix s = PairwiseCosine(a, b);
  for (double& v : s.data()) v = kernel.scale * v + kernel.offset;
  CheckFinite(s.AllFinite(), "non-finite similarity score");
  return s;
}

namespace {

ScoreGradient InverseEuclideanGrad(const SimilarityKernel& kernel, const Matrix& a,
                                   const Matrix& b, const Matrix& upstream) {
  const std::size_t dim = a.cols();
  ScoreGradient g{Matrix(a.rows(), dim), Matrix(b.rows(), dim)};
  std::vector<double> diff(dim);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    auto gai = g.d_a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double u = upstream(i, j);
      if (u == 0.0) continue;
      auto bj = b.row(j);
      double sq = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        diff[k] = ai[k] - bj[k];
        sq += diff[k] * diff[k];
      }
      const double d = std::sqrt(sq);
      // The distance is not differentiable at 0; take the zero subgradient.
      if (d == 0.0) continue;
      const double s = 1.0 / (d + kernel.eps);
      const double coef = -u * s * s / d;
      auto gbj = g.d_b.row(j);
      for (std::size_t k = 0; k < dim; ++k) {
        gai[k] += coef * diff[k];
        gbj[k] -= coef * diff[k];
      }
    }
  }
  return g;
}

// d cos(a, b) / d a = b / (|a||b|) - cos(a, b) * a / |a|^2
ScoreGradient ScaledCosineGrad(const SimilarityKernel& kernel, const Matrix& a,
                               const Matrix& b, const Matrix& upstream) {
  const std::size_t dim = a.cols();
  ScoreGradient g{Matrix(a.rows(), dim), Matrix(b.rows(), dim)};
  Matrix cos = PairwiseCosine(a, b);
  std::vector<double> na(a.rows()), nb(b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) na[i] = Norm(a.row(i));
  for (std::size_t j = 0; j < b.rows(); ++j) nb[j] = Norm(b.row(j));

  // Per-row accumulators of sum_j u_ij * cos_ij for the radial terms.
  std::vector<double> radial_a(a.rows(), 0.0), radial_b(b.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto ai = a.row(i);
    auto gai = g.d_a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double u = upstream(i, j);
      g.d_scale += u * cos(i, j);
      g.d_offset += u;
      if (u == 0.0) continue;
      const double wu = kernel.scale * u;
      const double inv = wu / (na[i] * nb[j]);
      auto bj = b.row(j);
      auto gbj = g.d_b.row(j);
      for (std::size_t k = 0; k < dim; ++k) {
        gai[k] += inv * bj[k];
        gbj[k] += inv * ai[k];
      }
      radial_a[i] += wu * cos(i, j);
      radial_b[j] += wu * cos(i, j);
    }
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double c = radial_a[i] / (na[i] * na[i]);
    auto ai = a.row(i);
    auto gai = g.d_a.row(i);
    for (std::size_t k = 0; k < dim; ++k) gai[k] -= c * ai[k];
  }
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double c = radial_b[j] / (nb[j] * nb[j]);
    auto bj = b.row(j);
    auto gbj = g.d_b.row(j);
    for (std::size_t k = 0; k < dim; ++k) gbj[k] -= c * bj[k];
  }
  return g;
}

}  // namespace

ScoreGradient ScoreGrad(const SimilarityKernel& kernel, const Matrix& a,
                        const Matrix& b, const Matrix& upstream) {
  kernel.Validate();
  Check(a.cols() == b.cols(), "dimension mismatch");
  Check(upstream.rows() == a.rows() && upstream.cols() == b.rows(),
        "upstream shape must be rows(a) x rows(b)");
  CheckFinite(upstream.AllFinite(), "non-finite upstream gradient");
  if (kernel.kind == KernelKind::kInverseEuclidean)
    return InverseEuclideanGrad(kernel, a, b, upstream);
  return ScaledCosineGrad(kernel, a, b, upstream);
}

}  // namespace xmodal
