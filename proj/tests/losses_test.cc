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


#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "xmodal/error.h"
#include "xmodal/losses.h"
#include "xmodal/verify.h"

using xmodal::LossKind;
using xmodal::LossSpec;
using xmodal::Matrix;
using xmodal::PairLabel;
using xmodal::Rng;
using xmodal::SimilarityKernel;

namespace {

const double kLogOnePlusInvE = std::log1p(std::exp(-1.0));

std::vector<SimilarityKernel> Kernels() {
  return {SimilarityKernel::ScaledCosine(), SimilarityKernel::ScaledCosine(1.0, 0.0),
          SimilarityKernel::InverseEuclidean()};
}

Matrix PermuteRows(const Matrix& m, const std::vector<std::size_t>& perm) {
  return m.SelectRows(perm);
}

}  // namespace

TEST_CASE("two-row batch with orthonormal embeddings") {
  const auto kernel = SimilarityKernel::ScaledCosine(1.0, 0.0);
  const Matrix eye = Matrix::FromRows({{1, 0}, {0, 1}});
  CHECK(std::abs(xmodal::LossAv(kernel, eye, eye).value - kLogOnePlusInvE) < 1e-14);
  CHECK(std::abs(xmodal::LossAav(kernel, eye, eye).value - kLogOnePlusInvE) < 1e-14);
  CHECK(kLogOnePlusInvE == doctest::Approx(0.31326).epsilon(1e-5));
}

TEST_CASE("single-row batches cost nothing") {
  Rng rng(5);
  for (const auto& kernel : Kernels()) {
    const Matrix a = xmodal::RandomNormal(1, 3, rng), v = xmodal::RandomNormal(1, 3, rng);
    CHECK(xmodal::LossAv(kernel, a, v).value == 0.0);
    CHECK(xmodal::LossAav(kernel, a, v).value == 0.0);
    const auto mwm = xmodal::LossMwm(kernel, a, v);
    CHECK(mwm.value == 0.0);
    CHECK(mwm.components.at("AV") == 0.0);
    CHECK(mwm.components.at("VA") == 0.0);
    const auto cddl = xmodal::LossCddl(kernel, a, v);
    CHECK(cddl.value == 0.0);
    for (const auto& [name, value] : cddl.components) CHECK(value == 0.0);
    for (double g : cddl.grad_a.data()) CHECK(g == 0.0);
  }
}

TEST_CASE("softmax losses match enumeration oracles") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.Index(8), d = 2 + rng.Index(4);
    const Matrix a = xmodal::RandomNormal(n, d, rng), v = xmodal::RandomNormal(n, d, rng);
    for (const auto& kernel : Kernels()) {
      CHECK(std::abs(xmodal::LossAv(kernel, a, v).value - xmodal::verify::NaiveLossAv(kernel, a, v)) <
            1e-10);
      CHECK(std::abs(xmodal::LossAav(kernel, a, v).value -
                     xmodal::verify::NaiveLossAav(kernel, a, v)) < 1e-10);
      CHECK(std::abs(xmodal::LossMwm(kernel, a, v).value -
                     xmodal::verify::NaiveLossMwm(kernel, a, v)) < 1e-10);
      CHECK(std::abs(xmodal::LossCddl(kernel, a, v).value -
                     xmodal::verify::NaiveLossCddl(kernel, a, v)) < 1e-10);
    }
  }
}

TEST_CASE("components and decomposition") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = xmodal::RandomNormal(4, 3, rng), v = xmodal::RandomNormal(4, 3, rng);
    for (const auto& kernel : Kernels()) {
      const auto mwm = xmodal::LossMwm(kernel, a, v);
      const double av = xmodal::LossAv(kernel, a, v).value;
      const double va = xmodal::LossAv(kernel, v, a).value;
      CHECK(std::abs(mwm.value - (av + va)) < 1e-12);
      CHECK(std::abs(mwm.components.at("AV") - av) < 1e-12);

      const auto cddl = xmodal::LossCddl(kernel, a, v);
      const double aav = xmodal::LossAav(kernel, a, v).value;
      const double vva = xmodal::LossAav(kernel, v, a).value;
      CHECK(std::abs(cddl.value - (mwm.value + aav + vva)) < 1e-12);
      CHECK(std::abs(cddl.components.at("AAV") - aav) < 1e-12);
      CHECK(std::abs(cddl.components.at("VVA") - vva) < 1e-12);
    }
    // Identical batches make the two directions agree.
    const auto same = xmodal::LossCddl(SimilarityKernel::ScaledCosine(), a, a);
    CHECK(std::abs(same.components.at("AV") - same.components.at("VA")) < 1e-12);
    CHECK(std::abs(same.components.at("AAV") - same.components.at("VVA")) < 1e-12);
  }
}

TEST_CASE("softmax losses are nonnegative") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.Index(10);
    const Matrix a = xmodal::RandomNormal(n, 3, rng), v = xmodal::RandomNormal(n, 3, rng);
    for (const auto& kernel : Kernels()) {
      CHECK(xmodal::LossAv(kernel, a, v).value >= 0.0);
      CHECK(xmodal::LossAav(kernel, a, v).value >= 0.0);
      CHECK(xmodal::LossMwm(kernel, a, v).value >= 0.0);
      CHECK(xmodal::LossCddl(kernel, a, v).value >= 0.0);
    }
  }
}

TEST_CASE("losses are permutation invariant and gradients permute along") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.Index(7);
    const Matrix a = xmodal::RandomNormal(n, 4, rng), v = xmodal::RandomNormal(n, 4, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.Shuffle(perm);
    const Matrix pa = PermuteRows(a, perm), pv = PermuteRows(v, perm);
    for (const auto& kernel : Kernels()) {
      const auto base = xmodal::LossCddl(kernel, a, v);
      const auto moved = xmodal::LossCddl(kernel, pa, pv);
      CHECK(std::abs(base.value - moved.value) < 1e-12);
      const Matrix expected = PermuteRows(base.grad_a, perm);
      for (std::size_t i = 0; i < expected.size(); ++i)
        CHECK(std::abs(expected.data()[i] - moved.grad_a.data()[i]) < 1e-12);
      CHECK(std::abs(xmodal::LossMwm(kernel, a, v).value - xmodal::LossMwm(kernel, pa, pv).value) <
            1e-12);
    }
  }
}

TEST_CASE("angular losses ignore row scale") {
  Rng rng(51);
  const auto kernel = SimilarityKernel::ScaledCosine();
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.Index(6);
    const Matrix a = xmodal::RandomNormal(n, 3, rng), v = xmodal::RandomNormal(n, 3, rng);
    Matrix sa = a, sv = v;
    for (std::size_t r = 0; r < n; ++r) {
      const double ka = std::exp(rng.Uniform(-5.0, 5.0)), kv = std::exp(rng.Uniform(-5.0, 5.0));
      for (double& x : sa.row(r)) x *= ka;
      for (double& x : sv.row(r)) x *= kv;
    }
    CHECK(std::abs(xmodal::LossMwm(kernel, a, v).value - xmodal::LossMwm(kernel, sa, sv).value) <
          1e-10);
    CHECK(std::abs(xmodal::LossCddl(kernel, a, v).value - xmodal::LossCddl(kernel, sa, sv).value) <
          1e-10);
  }
}

TEST_CASE("softmax losses vanish as the diagonal dominates") {
  const Matrix eye = Matrix::FromRows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  double previous = 1e300;
  for (double w : {1.0, 2.0, 5.0, 10.0, 20.0, 40.0}) {
    const double value = xmodal::LossCddl(SimilarityKernel::ScaledCosine(w, 0.0), eye, eye).value;
    CHECK(value < previous);
    previous = value;
  }
  CHECK(previous < 1e-15);
}

TEST_CASE("input validation") {
  const auto kernel = SimilarityKernel::ScaledCosine();
  CHECK_THROWS_AS(xmodal::LossAv(kernel, Matrix(0, 2), Matrix(0, 2)), xmodal::Error);
  CHECK_THROWS_AS(xmodal::LossMwm(kernel, Matrix(2, 2, 1.0), Matrix(3, 2, 1.0)), xmodal::Error);
  CHECK_THROWS_AS(xmodal::LossPairwiseContrastive(kernel, Matrix(0, 2), Matrix(0, 2), {}, 1.0),
                  xmodal::Error);
}

TEST_CASE("contrastive hinge") {
  const auto euclid = SimilarityKernel::InverseEuclidean();
  const Matrix a = Matrix::FromRows({{0, 0}});
  // Same pair, identical rows.
  CHECK(xmodal::LossPairwiseContrastive(euclid, a, a, {PairLabel::kSame}, 1.0).value == 0.0);
  // Inactive hinge.
  const auto far = xmodal::LossPairwiseContrastive(euclid, a, Matrix::FromRows({{3, 4}}),
                                                   {PairLabel::kDifferent}, 1.0);
  CHECK(far.value == 0.0);
  for (double g : far.grad_a.data()) CHECK(g == 0.0);
  // d = 0.5 inside the margin.
  const auto near = xmodal::LossPairwiseContrastive(euclid, a, Matrix::FromRows({{0.3, 0.4}}),
                                                    {PairLabel::kDifferent}, 1.0);
  CHECK(std::abs(near.value - 0.25) < 1e-15);
}

TEST_CASE("logistic baseline") {
  Rng rng(61);
  const Matrix a = xmodal::RandomNormal(8, 3, rng), v = xmodal::RandomNormal(8, 3, rng);
  std::vector<PairLabel> labels(8);
  for (auto& l : labels) l = rng.Index(2) ? PairLabel::kSame : PairLabel::kDifferent;
  CHECK(std::abs(xmodal::LossPairwiseBinary(a, v, labels, 0.0, 0.0).value - std::log(2.0)) < 1e-15);

  const double slope = 1.7, bias = 0.4;
  double expected = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < 3; ++k) d2 += (a(i, k) - v(i, k)) * (a(i, k) - v(i, k));
    const double p = 1.0 / (1.0 + std::exp(-(bias - slope * std::sqrt(d2))));
    expected -= labels[i] == PairLabel::kSame ? std::log(p) : std::log(1.0 - p);
  }
  expected /= 8.0;
  CHECK(std::abs(xmodal::LossPairwiseBinary(a, v, labels, slope, bias).value - expected) < 1e-12);

  // Separated distances with a steep slope saturate.
  const Matrix origin = Matrix::FromRows({{0, 0}, {0, 0}});
  const Matrix other = Matrix::FromRows({{0, 0}, {2, 0}});
  const auto sat = xmodal::LossPairwiseBinary(origin, other, {PairLabel::kSame, PairLabel::kDifferent},
                                              100.0, 100.0);
  CHECK(sat.value < 1e-30);
}

TEST_CASE("pinned gradient checks") {
  LossSpec mwm;
  mwm.kind = LossKind::kMwm;
  CHECK(xmodal::LossGradCheck(mwm, 4, 3, 1) < 1e-5);
  LossSpec cddl;
  cddl.kind = LossKind::kCddl;
  CHECK(xmodal::LossGradCheck(cddl, 5, 4, 2) < 1e-5);
  LossSpec euclid;
  euclid.kernel = SimilarityKernel::InverseEuclidean();
  CHECK(xmodal::LossGradCheck(euclid, 4, 3, 3) < 1e-5);
}

TEST_CASE("gradient checks over random instances") {
  std::vector<LossSpec> specs;
  for (LossKind kind : {LossKind::kMwm, LossKind::kCddl, LossKind::kPairwiseContrastive,
                        LossKind::kPairwiseBinary}) {
    for (const auto& kernel : {SimilarityKernel::ScaledCosine(), SimilarityKernel::InverseEuclidean()}) {
      LossSpec s;
      s.kind = kind;
      s.kernel = kernel;
      specs.push_back(s);
    }
  }
  for (const auto& spec : specs) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      worst = std::max(worst, xmodal::LossGradCheck(spec, 2 + rng.Index(6), 2 + rng.Index(4), seed));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("trainable scalars follow the loss kind") {
  LossSpec s;
  CHECK(xmodal::TrainableScalars(s).size() == 2);
  s.kernel = SimilarityKernel::InverseEuclidean();
  CHECK(xmodal::TrainableScalars(s).empty());
  s.kind = LossKind::kPairwiseBinary;
  const auto views = xmodal::TrainableScalars(s);
  REQUIRE(views.size() == 2);
  CHECK(views[0] == &s.slope);
  CHECK(views[1] == &s.bias);
}
