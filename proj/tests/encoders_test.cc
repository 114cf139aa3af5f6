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
#include <vector>

#include "doctest.h"
#include "xmodal/encoders.h"
#include "xmodal/error.h"
#include "xmodal/losses.h"
#include "xmodal/verify.h"

using xmodal::Activation;
using xmodal::DenseLayer;
using xmodal::Head;
using xmodal::Matrix;
using xmodal::Mlp;
using xmodal::PoolingKind;
using xmodal::Rng;

namespace {

double Weighted(const Matrix& y, const Matrix& up) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * up.data()[i];
  return s;
}

}  // namespace

TEST_CASE("linear identity layer") {
  Matrix eye(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  const Mlp mlp({DenseLayer{eye, {0, 0, 0}}}, Activation::kTanh, false);
  Rng rng(1);
  const Matrix x = xmodal::RandomNormal(5, 3, rng);
  CHECK(mlp.Forward(x, nullptr) == x);
}

TEST_CASE("zero weights emit the bias") {
  const Mlp mlp({DenseLayer{Matrix(2, 4), {0.5, -1.5}}}, Activation::kRelu, false);
  Rng rng(2);
  const Matrix y = mlp.Forward(xmodal::RandomNormal(3, 4, rng), nullptr);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(y(r, 0) == 0.5);
    CHECK(y(r, 1) == -1.5);
  }
}

TEST_CASE("mlp backward matches finite differences") {
  for (Activation act : {Activation::kTanh, Activation::kRelu}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      Mlp mlp({4, 6, 3}, act, seed % 2 == 0, rng);
      const Matrix x = xmodal::RandomNormal(5, 4, rng);
      const Matrix up = xmodal::RandomNormal(5, 3, rng);
      xmodal::Tape tape;
      mlp.Forward(x, &tape);
      const auto grads = mlp.Backward(tape, up);
      const auto analytic = grads.Views();

      const double h = 1e-6;
      auto params = mlp.Parameters();
      for (std::size_t b = 0; b < params.size(); ++b) {
        std::vector<double> numeric(params[b].size());
        for (std::size_t i = 0; i < params[b].size(); ++i) {
          const double saved = params[b][i];
          params[b][i] = saved + h;
          const double plus = Weighted(mlp.Forward(x, nullptr), up);
          params[b][i] = saved - h;
          const double minus = Weighted(mlp.Forward(x, nullptr), up);
          params[b][i] = saved;
          numeric[i] = (plus - minus) / (2 * h);
        }
        CHECK(xmodal::RelativeError(analytic[b], numeric) < 1e-5);
      }
      // Input gradient.
      std::vector<double> numeric(x.size());
      Matrix xp = x;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = xp.data()[i];
        xp.data()[i] = saved + h;
        const double plus = Weighted(mlp.Forward(xp, nullptr), up);
        xp.data()[i] = saved - h;
        const double minus = Weighted(mlp.Forward(xp, nullptr), up);
        xp.data()[i] = saved;
        numeric[i] = (plus - minus) / (2 * h);
      }
      CHECK(xmodal::RelativeError(grads.input.data(), numeric) < 1e-5);
    }
  }
}

TEST_CASE("zero upstream gives zero gradients") {
  Rng rng(3);
  Mlp mlp({3, 5, 2}, Activation::kTanh, false, rng);
  xmodal::Tape tape;
  mlp.Forward(xmodal::RandomNormal(4, 3, rng), &tape);
  const auto g = mlp.Backward(tape, Matrix(4, 2));
  for (auto view : g.Views())
    for (double v : view) CHECK(v == 0.0);
}

TEST_CASE("stale tapes are rejected") {
  Rng rng(4);
  Mlp mlp({3, 2}, Activation::kTanh, false, rng);
  xmodal::Tape tape;
  mlp.Forward(xmodal::RandomNormal(2, 3, rng), &tape);
  mlp.Parameters()[0][0] += 1.0;
  CHECK_THROWS_WITH_AS(mlp.Backward(tape, Matrix(2, 2)), "stale tape", xmodal::Error);

  xmodal::StreamEncoder enc(3, {4, 2, Activation::kTanh}, rng);
  xmodal::StreamTape st;
  enc.Forward(xmodal::RandomNormal(2, 3, rng), Head::kContent, &st);
  auto grads = enc.ZeroGradients();
  CHECK_NOTHROW(enc.Backward(st, Matrix(2, 2), &grads));
  enc.Parameters();
  CHECK_THROWS_AS(enc.Backward(st, Matrix(2, 2), &grads), xmodal::Error);
}

TEST_CASE("glorot initialisation bounds") {
  Rng rng(5);
  const Mlp mlp({30, 20}, Activation::kTanh, false, rng);
  const double limit = std::sqrt(6.0 / 50.0);
  for (double w : mlp.layers()[0].weight.data()) CHECK(std::abs(w) <= limit);
  for (double b : mlp.layers()[0].bias) CHECK(b == 0.0);
}

TEST_CASE("pooling") {
  Rng rng(6);
  const Matrix one = Matrix::FromRows({{1.5, -2.0, 3.0}});
  CHECK(xmodal::Pool(PoolingKind::kMeanOverTime, one, rng).value == std::vector{1.5, -2.0, 3.0});
  CHECK(xmodal::Pool(PoolingKind::kRandomSelectOne, one, rng).value == std::vector{1.5, -2.0, 3.0});
  CHECK(xmodal::Pool(PoolingKind::kMeanOverTime, Matrix::FromRows({{0, 0}, {2, 2}}), rng).value ==
        std::vector{1.0, 1.0});
  CHECK_THROWS_AS(xmodal::Pool(PoolingKind::kMeanOverTime, Matrix(0, 2), rng), xmodal::Error);

  // Replayable selection.
  const Matrix frames = xmodal::RandomNormal(7, 2, rng);
  Rng r1(77), r2(77);
  for (int i = 0; i < 20; ++i) {
    const auto a = xmodal::Pool(PoolingKind::kRandomSelectOne, frames, r1);
    const auto b = xmodal::Pool(PoolingKind::kRandomSelectOne, frames, r2);
    CHECK(a.selected == b.selected);
    CHECK(a.value == b.value);
  }

  // Identical frames make the two rules agree exactly.
  Matrix same(6, 3);
  for (std::size_t t = 0; t < 6; ++t) {
    same(t, 0) = 0.1;
    same(t, 1) = -7.3;
    same(t, 2) = 1.0 / 3.0;
  }
  for (int i = 0; i < 10; ++i)
    CHECK(xmodal::Pool(PoolingKind::kRandomSelectOne, same, rng).value ==
          xmodal::Pool(PoolingKind::kMeanOverTime, same, rng).value);
}

TEST_CASE("pooling backward") {
  Rng rng(7);
  const auto mean = xmodal::Pool(PoolingKind::kMeanOverTime, Matrix(2, 3), rng);
  const Matrix g = xmodal::PoolBackward(mean, std::vector{2.0, 4.0, -6.0});
  for (std::size_t t = 0; t < 2; ++t) CHECK(std::vector(g.row(t).begin(), g.row(t).end()) ==
                                            std::vector{1.0, 2.0, -3.0});
  const auto pick = xmodal::Pool(PoolingKind::kRandomSelectOne, xmodal::RandomNormal(4, 2, rng), rng);
  const Matrix s = xmodal::PoolBackward(pick, std::vector{1.0, 1.0});
  for (std::size_t t = 0; t < 4; ++t) CHECK(s(t, 0) == (t == pick.selected ? 1.0 : 0.0));
}

TEST_CASE("end-to-end gradients through encoders and pooling") {
  xmodal::LossSpec cddl;
  cddl.kind = xmodal::LossKind::kCddl;
  xmodal::LossSpec euclid;
  euclid.kernel = xmodal::SimilarityKernel::InverseEuclidean();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CHECK(xmodal::verify::EndToEndGradCheck(cddl, seed) < 1e-5);
    CHECK(xmodal::verify::EndToEndGradCheck(euclid, seed) < 1e-5);
  }
}

TEST_CASE("optimizers") {
  using xmodal::Optimizer;
  using xmodal::OptimizerConfig;
  using xmodal::OptimizerKind;
  {
    std::vector<double> p{0.0, 3.0};
    OptimizerConfig c;
    c.kind = OptimizerKind::kSgd;
    c.learning_rate = 1.0;
    c.momentum = 0.0;
    Optimizer opt(c);
    const std::vector<double> g{1.0, 0.0};
    opt.Step({std::span<double>(p)}, {std::span<const double>(g)});
    CHECK(p == std::vector{-1.0, 3.0});
  }
  for (double scale : {1e-6, 1.0, 1e4}) {
    std::vector<double> p{0.0, 0.0};
    OptimizerConfig c;
    c.learning_rate = 1e-3;
    Optimizer opt(c);
    const std::vector<double> g{scale, -scale};
    opt.Step({std::span<double>(p)}, {std::span<const double>(g)});
    CHECK(std::abs(p[0] + 1e-3) < 1e-5);
    CHECK(std::abs(p[1] - 1e-3) < 1e-5);
  }
  {
    std::vector<double> p{1.0}, q{1.0, 2.0};
    Optimizer opt(OptimizerConfig{});
    const std::vector<double> g{0.5};
    opt.Step({std::span<double>(p)}, {std::span<const double>(g)});
    CHECK_THROWS_AS(opt.Step({std::span<double>(q)}, {std::span<const double>(q)}), xmodal::Error);
  }
}

TEST_CASE("encoder json round trip") {
  Rng rng(8);
  const xmodal::StreamEncoder enc(5, {6, 3, Activation::kRelu}, rng);
  const auto restored = xmodal::StreamEncoder::FromJson(enc.ToJson());
  CHECK(restored.ToJson().dump() == enc.ToJson().dump());
  const Matrix x = xmodal::RandomNormal(2, 5, rng);
  CHECK(restored.Forward(x, Head::kIdentity, nullptr) == enc.Forward(x, Head::kIdentity, nullptr));
  const auto ck = xmodal::EncoderCheckpoint(enc, enc, 9);
  CHECK(ck.at("format") == "xmodal-encoders");
  CHECK(ck.at("seed") == 9);
}
