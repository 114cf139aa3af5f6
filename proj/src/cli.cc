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

#include "xmodal/cli.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "xmodal/error.h"
#include "xmodal/eval.h"
#include "xmodal/report.h"
#include "xmodal/synthdata.h"
#include "xmodal/trainer.h"
#include "xmodal/verify.h"

namespace xmodal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int verbosity = 0;
  // compare
  std::vector<std::string> losses{"mwm-angular", "cddl-angular"};
  std::size_t num_seeds = 5;
  // eval
  std::string trials_path;
  // gradcheck / selftest
  std::vector<std::string> gradcheck_losses;
  std::size_t instances = 100;
};

ExperimentConfig LoadConfig(const Options& o) {
  ExperimentConfig c;
  if (!o.config_path.empty()) {
    std::string text;
    try {
      text = ReadFile(o.config_path);
    } catch (const Error& e) {
      throw Error(ErrorKind::kConfig, e.what());
    }
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kConfig, o.config_path + ": " + e.what());
    }
    c = ConfigFromJson(j);
  } else {
    c.name = LossName(c.primary_loss());
  }
  if (o.seed_given) c.seed = o.seed;
  c.Validate();
  return c;
}

fs::path PrepareOutDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create output directory " + dir);
  return fs::path(dir);
}

std::size_t ThreadCap() {
  const char* env = std::getenv("XMODAL_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) throw Error(ErrorKind::kConfig, "XMODAL_THREADS must be a positive integer");
  return v;
}

int RunGenWorld(const Options& o, std::ostream& out) {
  const ExperimentConfig c = LoadConfig(o);
  const fs::path dir = PrepareOutDir(o.out_dir);
  const SyntheticWorld world = MakeWorld(c.world, c.seed);
  WriteFile(dir / "config.json", RenderJson(ConfigToJson(c)));
  WriteFile(dir / "world.json", RenderJson(WorldToJson(world)));
  out << "wrote " << (dir / "world.json").string() << " (" << world.config.num_identities
      << " identities, " << world.train_identities.size() << " train / "
      << world.test_identities.size() << " test)\n";
  return kExitOk;
}

int RunTrain(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig c = LoadConfig(o);
  const fs::path dir = PrepareOutDir(o.out_dir);
  WriteFile(dir / "config.json", RenderJson(ConfigToJson(c)));
  Model model;
  RunReport report = RunExperiment(c, &model);
  report.checkpoint = "checkpoint.json";
  WriteFile(dir / report.checkpoint,
            RenderJson(EncoderCheckpoint(model.audio, model.visual, c.seed)));
  EmitReport(report, ReportFormat::kJson, dir / "report.json");
  EmitReport(report, ReportFormat::kCsv, dir / "loss.csv");
  EmitReport(report, ReportFormat::kMarkdown, dir / "metrics.md");
  WriteFile(dir / "metrics.csv", MetricsCsv(report));
  if (o.verbosity > 0) err << "wall clock: " << report.wall_clock_seconds << " s\n";
  out << MetricsMarkdown(report);
  return kExitOk;
}

int RunCompare(const Options& o, std::ostream& out, std::ostream& err) {
  const ExperimentConfig base = LoadConfig(o);
  if (o.num_seeds == 0) throw Error(ErrorKind::kConfig, "--seeds must be >= 1");
  std::vector<ExperimentConfig> configs;
  for (const auto& name : o.losses) {
    ExperimentConfig c = base;
    c.primary_loss() = LossPreset(name);
    c.name = name;
    configs.push_back(c);
  }
  std::vector<std::uint64_t> seeds;
  for (std::size_t s = 0; s < o.num_seeds; ++s) seeds.push_back(base.seed + s);
  const fs::path dir = PrepareOutDir(o.out_dir);
  WriteFile(dir / "config.json", RenderJson(ConfigToJson(base)));
  const std::size_t threads = ThreadCap();
  if (o.verbosity > 0)
    err << "running " << configs.size() * seeds.size() << " runs on " << threads << " thread(s)\n";
  const ComparisonTable table = CompareLosses(configs, seeds, threads);
  EmitReport(table, ReportFormat::kJson, dir / "comparison.json");
  EmitReport(table, ReportFormat::kCsv, dir / "comparison.csv");
  EmitReport(table, ReportFormat::kMarkdown, dir / "comparison.md");
  out << ComparisonMarkdown(table);
  return kExitOk;
}

int RunEval(const Options& o, std::ostream& out) {
  std::ifstream in(o.trials_path);
  if (!in) throw Error(ErrorKind::kConfig, "cannot read trials file " + o.trials_path);
  const TrialSet trials = ReadTrialsCsv(in);
  const EerResult r = Eer(trials);
  const json metrics = {{"num_trials", trials.size()},
                        {"num_same", trials.num_same()},
                        {"num_different", trials.num_different()},
                        {"eer", r.eer},
                        {"threshold", r.threshold}};
  if (!o.out_dir.empty()) {
    const fs::path dir = PrepareOutDir(o.out_dir);
    WriteFile(dir / "metrics.json", RenderJson(metrics));
  }
  out << metrics.dump() << "\n";
  return kExitOk;
}

int RunGradcheck(const Options& o, std::ostream& out) {
  std::vector<std::string> names = o.gradcheck_losses;
  if (names.empty() || (names.size() == 1 && names[0] == "all")) names = LossPresetNames();
  const std::uint64_t base = o.seed_given ? o.seed : 1;
  bool ok = true;
  for (const auto& name : names) {
    const LossSpec spec = LossPreset(name);
    double worst = 0.0, worst_e2e = 0.0;
    for (std::size_t i = 0; i < o.instances; ++i) {
      worst = std::max(worst, LossGradCheck(spec, 2 + i % 7, 2 + i % 5, base + i));
      worst_e2e = std::max(worst_e2e, verify::EndToEndGradCheck(spec, base + i));
    }
    const bool pass = worst < 1e-5 && worst_e2e < 1e-5;
    ok &= pass;
    out << json{{"loss", name},
                {"instances", o.instances},
                {"max_rel_error", worst},
                {"max_rel_error_end_to_end", worst_e2e},
                {"pass", pass}}
               .dump()
        << "\n";
  }
  return ok ? kExitOk : kExitNumerical;
}

int RunSelftest(const Options& o, std::ostream& out) {
  bool ok = true;
  for (const auto& c : verify::RunSelfTest(o.instances)) {
    ok &= c.passed;
    out << (c.passed ? "PASS " : "FAIL ") << c.name << " measured=" << c.measured
        << " tolerance=" << c.tolerance << "\n";
  }
  return ok ? kExitOk : kExitNumerical;
}

const char* Category(ErrorKind k) {
  switch (k) {
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kNumerical:
      return "numerical";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kInvalidArgument:
      return "invalid";
  }
  return "invalid";
}

int ExitFor(ErrorKind k) { return k == ErrorKind::kNumerical ? kExitNumerical : kExitConfig; }

}  // namespace

int ParseAndDispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-modal self-supervised loss experiments on a synthetic audio-visual world",
               "xmodal"};
  app.require_subcommand(1);
  Options o;
  app.add_flag("-v,--verbose", o.verbosity, "Print progress and timing to stderr");

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", o.config_path, "Experiment config (JSON); defaults when omitted");
    sub->add_option("--seed", o.seed, "Override the config seed")
        ->each([&](const std::string&) { o.seed_given = true; });
  };

  CLI::App* gen = app.add_subcommand("gen-world", "Generate a synthetic world and dump it as JSON");
  add_config(gen);
  gen->add_option("-o,--out", o.out_dir, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Run one experiment and write its reports");
  add_config(train);
  train->add_option("-o,--out", o.out_dir, "Output directory")->required();

  CLI::App* compare = app.add_subcommand("compare", "Compare loss presets over several seeds");
  add_config(compare);
  compare->add_option("-o,--out", o.out_dir, "Output directory")->required();
  compare->add_option("--losses", o.losses, "Comma-separated loss presets")
      ->delimiter(',')
      ->check(CLI::IsMember(LossPresetNames()));
  compare->add_option("--seeds", o.num_seeds, "Number of seeds, starting at the config seed");

  CLI::App* eval = app.add_subcommand("eval", "Compute the EER of a score,label trial list");
  eval->add_option("-t,--trials", o.trials_path, "Trials CSV")->required();
  eval->add_option("-o,--out", o.out_dir, "Also write metrics.json to this directory");

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gradcheck->add_option("--loss", o.gradcheck_losses, "Loss preset(s), or 'all'")
      ->delimiter(',');
  gradcheck->add_option("--instances", o.instances, "Random instances per loss");
  gradcheck->add_option("--seed", o.seed, "First seed")->each([&](const std::string&) {
    o.seed_given = true;
  });

  CLI::App* selftest = app.add_subcommand("selftest", "Gradient checks and oracle comparisons");
  selftest->add_option("--instances", o.instances, "Random instances per check")
      ->default_val(20);

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "xmodal: error[usage]: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen) return RunGenWorld(o, out);
    if (*train) return RunTrain(o, out, err);
    if (*compare) return RunCompare(o, out, err);
    if (*eval) return RunEval(o, out);
    if (*gradcheck) {
      for (const auto& name : o.gradcheck_losses)
        if (name != "all") LossPreset(name);
      return RunGradcheck(o, out);
    }
    if (*selftest) return RunSelftest(o, out);
  } catch (const Error& e) {
    err << "xmodal: error[" << Category(e.kind()) << "]: " << e.what() << "\n";
    return ExitFor(e.kind());
  } catch (const std::exception& e) {
    err << "xmodal: error[internal]: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace xmodal
