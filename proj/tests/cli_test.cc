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


#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "xmodal/cli.h"
#include "xmodal/report.h"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome Run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = xmodal::ParseAndDispatch(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path Scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("xmodal_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTinyConfig = R"({
  "world": {"num_identities": 40},
  "encoder": {"hidden_dim": 12, "output_dim": 6},
  "batch_size": 8,
  "steps": 20,
  "eval": {"every": 10, "cbm_pairs": 300, "sv_pairs": 300, "probe": {"epochs": 20}}
})";

}  // namespace

TEST_CASE("help documents every subcommand") {
  const Outcome top = Run({"--help"});
  CHECK(top.code == 0);
  for (const char* sub : {"gen-world", "train", "compare", "eval", "gradcheck", "selftest"})
    CHECK(top.out.find(sub) != std::string::npos);
  const Outcome train = Run({"train", "--help"});
  CHECK(train.code == 0);
  for (const char* flag : {"--config", "--seed", "--out"}) CHECK(train.out.find(flag) != std::string::npos);
  const Outcome compare = Run({"compare", "--help"});
  for (const char* flag : {"--losses", "--seeds"}) CHECK(compare.out.find(flag) != std::string::npos);
}

TEST_CASE("usage errors") {
  for (const auto& args : std::vector<std::vector<std::string>>{
           {}, {"train"}, {"train", "--bogus", "-o", "x"}, {"frobnicate"},
           {"compare", "-o", "x", "--losses", "mwm-angular,nope"}}) {
    const Outcome r = Run(args);
    CHECK(r.code == xmodal::kExitUsage);
    CHECK(r.err.rfind("xmodal: error[usage]: ", 0) == 0);
    CHECK(r.err.find('\n') == r.err.size() - 1);
  }
}

TEST_CASE("config errors") {
  const fs::path dir = Scratch("config");
  xmodal::WriteFile(dir / "typo.json", R"({"stepz": 10})");
  Outcome r = Run({"train", "-c", (dir / "typo.json").string(), "-o", (dir / "out").string()});
  CHECK(r.code == xmodal::kExitConfig);
  CHECK(r.err.rfind("xmodal: error[config]: ", 0) == 0);

  xmodal::WriteFile(dir / "broken.json", "{ not json");
  r = Run({"train", "-c", (dir / "broken.json").string(), "-o", (dir / "out").string()});
  CHECK(r.code == xmodal::kExitConfig);

  r = Run({"train", "-c", (dir / "missing.json").string(), "-o", (dir / "out").string()});
  CHECK(r.code == xmodal::kExitConfig);
  CHECK(r.err.rfind("xmodal: error[config]: ", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("numerical failures exit with 3") {
  const fs::path dir = Scratch("numerical");
  xmodal::WriteFile(dir / "c.json", R"({"world": {"num_identities": 40}, "batch_size": 8,
      "steps": 20, "identity_loss": "mwm-euclidean",
      "optimizer": {"kind": "sgd", "learning_rate": 1e300}})");
  const Outcome r = Run({"train", "-c", (dir / "c.json").string(), "-o", (dir / "out").string()});
  CHECK(r.code == xmodal::kExitNumerical);
  CHECK(r.err.rfind("xmodal: error[numerical]: ", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("selftest and gradcheck") {
  const Outcome self = Run({"selftest", "--instances", "2"});
  CHECK(self.code == 0);
  CHECK(self.out.find("FAIL") == std::string::npos);
  CHECK(self.out.find("PASS gradcheck/cddl-angular") != std::string::npos);

  const Outcome grad = Run({"gradcheck", "--loss", "cddl-angular,binary", "--instances", "3"});
  CHECK(grad.code == 0);
  std::istringstream lines(grad.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("pass") == true);
    ++count;
  }
  CHECK(count >= 2);
}

TEST_CASE("train twice gives byte-identical reports") {
  const fs::path dir = Scratch("train");
  xmodal::WriteFile(dir / "c.json", kTinyConfig);
  for (const char* run : {"a", "b"}) {
    const Outcome r = Run({"train", "-c", (dir / "c.json").string(), "--seed", "7", "-o",
                           (dir / run).string()});
    REQUIRE(r.code == 0);
  }
  for (const char* file : {"config.json", "report.json", "loss.csv", "metrics.csv", "metrics.md",
                           "checkpoint.json"}) {
    CAPTURE(file);
    REQUIRE(fs::exists(dir / "a" / file));
    CHECK(xmodal::ReadFile(dir / "a" / file) == xmodal::ReadFile(dir / "b" / file));
  }
  // The resolved config records the seed override.
  const auto cfg = nlohmann::json::parse(xmodal::ReadFile(dir / "a" / "config.json"));
  CHECK(cfg.at("seed") == 7);
  CHECK(cfg.at("steps") == 20);
  fs::remove_all(dir);
}

TEST_CASE("compare writes a table") {
  const fs::path dir = Scratch("compare");
  xmodal::WriteFile(dir / "c.json", kTinyConfig);
  const Outcome r = Run({"compare", "-c", (dir / "c.json").string(), "--losses",
                         "mwm-angular,cddl-angular", "--seeds", "2", "-o", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("| Method | CBM EER | SV EER |", 0) == 0);
  CHECK(r.out.find("| cddl-angular |") != std::string::npos);
  for (const char* file : {"comparison.json", "comparison.csv", "comparison.md", "config.json"})
    CHECK(fs::exists(dir / "out" / file));
  fs::remove_all(dir);
}

TEST_CASE("gen-world and eval") {
  const fs::path dir = Scratch("world");
  REQUIRE(Run({"gen-world", "--seed", "3", "-o", (dir / "w").string()}).code == 0);
  const auto world = nlohmann::json::parse(xmodal::ReadFile(dir / "w" / "world.json"));
  CHECK(world.at("format") == "xmodal-world");

  xmodal::WriteFile(dir / "trials.csv", "score,label\n0.9,1\n0.8,1\n0.1,0\n0.2,0\n");
  const Outcome r = Run({"eval", "-t", (dir / "trials.csv").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.at("eer") == 0.0);
  CHECK(j.at("num_same") == 2);
  fs::remove_all(dir);
}

TEST_CASE("the installed binary honours the exit code contract") {
  const std::string bin = XMODAL_BINARY;
  CHECK(std::system((bin + " selftest --instances 1 > /dev/null").c_str()) == 0);
  const int status = std::system((bin + " --no-such-flag 2> /dev/null").c_str());
  CHECK(WEXITSTATUS(status) == xmodal::kExitUsage);
}
