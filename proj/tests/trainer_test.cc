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
#include <set>
#include <string>

#include "doctest.h"
#include "xmodal/error.h"
#include "xmodal/report.h"
#include "xmodal/trainer.h"

using xmodal::ExperimentConfig;

namespace {

ExperimentConfig Tiny() {
  ExperimentConfig c;
  c.name = "mwm-angular";
  c.world.num_identities = 60;
  c.encoder.hidden_dim = 16;
  c.encoder.output_dim = 8;
  c.batch_size = 12;
  c.steps = 30;
  c.eval.every = 10;
  c.eval.cbm_pairs = 600;
  c.eval.sv_pairs = 600;
  c.eval.probe.epochs = 30;
  c.identity_loss = xmodal::LossPreset("mwm-angular");
  c.content_loss = xmodal::LossPreset("mwm-angular");
  return c;
}

}  // namespace

TEST_CASE("zero steps report initial metrics only") {
  ExperimentConfig c = Tiny();
  c.world.num_identities = 500;
  c.steps = 0;
  c.eval.cbm_pairs = 3000;
  const auto report = xmodal::RunExperiment(c);
  CHECK(report.curve.empty());
  REQUIRE(report.metrics.size() == 1);
  CHECK(report.metrics[0].step == 0);
  // Untrained audio and visual encoders share no embedding space.
  CHECK(std::abs(report.metrics[0].cbm_eer - 0.5) < 0.15);
}

TEST_CASE("runs are reproducible") {
  const ExperimentConfig c = Tiny();
  const auto a = xmodal::RunExperiment(c);
  const auto b = xmodal::RunExperiment(c);
  CHECK(xmodal::RenderJson(xmodal::RunReportToJson(a)) == xmodal::RenderJson(xmodal::RunReportToJson(b)));
  CHECK(xmodal::CurveCsv(a) == xmodal::CurveCsv(b));
  REQUIRE(a.curve.size() == 30);
  REQUIRE(a.metrics.size() == 4);
  for (const auto& m : a.metrics) CHECK(m.seed == c.seed);
  for (const auto& p : a.curve) {
    CHECK(std::isfinite(p.total));
    CHECK(p.total >= 0.0);
  }

  ExperimentConfig other = c;
  other.seed = 2;
  CHECK(xmodal::CurveCsv(xmodal::RunExperiment(other)) != xmodal::CurveCsv(a));
}

TEST_CASE("every preset trains on both tasks") {
  for (const auto& name : xmodal::LossPresetNames()) {
    ExperimentConfig c = Tiny();
    c.steps = 5;
    c.eval.every = 100;
    c.identity_loss = xmodal::LossPreset(name);
    CHECK_NOTHROW(xmodal::RunExperiment(c));
    c.task = xmodal::Task::kSync;
    c.content_loss = xmodal::LossPreset(name);
    CHECK_NOTHROW(xmodal::RunExperiment(c));
    CHECK(xmodal::LossName(xmodal::LossPreset(name)) == name);
  }
  CHECK_THROWS_AS(xmodal::LossPreset("nope"), xmodal::Error);
}

TEST_CASE("cddl components show up in the curve") {
  ExperimentConfig c = Tiny();
  c.steps = 3;
  c.identity_loss = xmodal::LossPreset("cddl-angular");
  c.lambda_content = 0.0;
  const auto report = xmodal::RunExperiment(c);
  for (const auto& p : report.curve) {
    CHECK(p.aav > 0.0);
    CHECK(p.vva > 0.0);
    CHECK(std::abs(p.total - (p.av + p.va + p.aav + p.vva)) < 1e-12);
  }
}

TEST_CASE("config validation happens before training") {
  ExperimentConfig c = Tiny();
  c.batch_size = 49;  // more than the 48 training identities
  CHECK_THROWS_AS(xmodal::RunExperiment(c), xmodal::Error);
  c = Tiny();
  c.sync_batch_size = 11;
  CHECK_THROWS_AS(c.Validate(), xmodal::Error);
  c = Tiny();
  c.lambda_content = -1.0;
  CHECK_THROWS_AS(c.Validate(), xmodal::Error);
  c = Tiny();
  c.encoder.output_dim = 0;
  CHECK_THROWS_AS(c.Validate(), xmodal::Error);
}

TEST_CASE("config json") {
  const ExperimentConfig c = Tiny();
  const auto j = xmodal::ConfigToJson(c);
  CHECK(xmodal::ConfigToJson(xmodal::ConfigFromJson(j)) == j);

  auto typo = j;
  typo["world"]["noise_sigmaa"] = 0.2;
  try {
    xmodal::ConfigFromJson(typo);
    FAIL("unknown key accepted");
  } catch (const xmodal::Error& e) {
    CHECK(e.kind() == xmodal::ErrorKind::kConfig);
  }
  auto top = j;
  top["stepz"] = 3;
  CHECK_THROWS_AS(xmodal::ConfigFromJson(top), xmodal::Error);

  // Partial configs fill in defaults, presets may be named.
  const auto partial =
      xmodal::ConfigFromJson(nlohmann::json{{"steps", 7}, {"identity_loss", "cddl-angular"}});
  CHECK(partial.steps == 7);
  CHECK(partial.identity_loss.kind == xmodal::LossKind::kCddl);
  CHECK(partial.name == "cddl-angular");
  CHECK(partial.batch_size == 40);
}

TEST_CASE("non-finite training aborts") {
  ExperimentConfig c = Tiny();
  c.identity_loss = xmodal::LossPreset("mwm-euclidean");
  c.optimizer.kind = xmodal::OptimizerKind::kSgd;
  c.optimizer.learning_rate = 1e300;
  try {
    xmodal::RunExperiment(c);
    FAIL("diverging run completed");
  } catch (const xmodal::Error& e) {
    CHECK(e.kind() == xmodal::ErrorKind::kNumerical);
  }
}

TEST_CASE("comparisons") {
  ExperimentConfig a = Tiny();
  a.steps = 10;
  ExperimentConfig b = a;
  const auto same = xmodal::CompareLosses({a, b}, {1, 2});
  REQUIRE(same.rows.size() == 4);
  CHECK(same.rows[0].final_metrics.sv_eer == same.rows[2].final_metrics.sv_eer);
  CHECK(same.rows[1].final_metrics.cbm_eer == same.rows[3].final_metrics.cbm_eer);
  CHECK(same.summary[1].sv_eer_delta == 0.0);
  CHECK(same.summary[1].sv_wins == 0);

  // Thread count does not change the table.
  b.identity_loss = xmodal::LossPreset("cddl-angular");
  b.name = "cddl-angular";
  const auto serial = xmodal::CompareLosses({a, b}, {1, 2}, 1);
  const auto parallel = xmodal::CompareLosses({a, b}, {1, 2}, 3);
  CHECK(xmodal::RenderJson(xmodal::ComparisonToJson(serial)) ==
        xmodal::RenderJson(xmodal::ComparisonToJson(parallel)));

  ExperimentConfig c = a;
  c.world.noise_sigma = 0.2;
  CHECK_THROWS_AS(xmodal::CompareLosses({a, c}, {1}), xmodal::Error);
}
