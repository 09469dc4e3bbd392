// Copyright 2026 The modafm Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "modafm/cli.hpp"

namespace cli = modafm::cli;
namespace fs = std::filesystem;

namespace {

const char* kConfig = R"(run.epochs = 3
run.batch_size = 16
model.extractor = 12
model.classifier =
model.discriminator = 6
data.train_samples = 96
data.test_samples = 64
data.rotations_deg = 0,25,50,80
probe.hidden = 6
probe.epochs = 3
)";

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("modafm_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, const std::string& extra = "") {
  const auto path = (dir / "exp.cfg").string();
  std::ofstream(path) << kConfig << extra;
  return path;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"--help"}).out.find("train") != std::string::npos);
  CHECK(run({"train", "--help"}).code == cli::kExitOk);
  CHECK(run({}).code == cli::kExitConfigError);
  CHECK(run({"fly"}).code == cli::kExitConfigError);
  CHECK(run({"train"}).code == cli::kExitConfigError);
  CHECK(run({"bound", "--config", "x.cfg", "--repeat", "2"}).code == cli::kExitConfigError);
}

TEST_CASE("config errors exit with 1") {
  const auto dir = scratch("cfgerr");
  const auto cfg = write_config(dir);
  CHECK(run({"train", "--config", (dir / "missing.cfg").string()}).code == cli::kExitConfigError);
  const auto bad = (dir / "bad.cfg").string();
  std::ofstream(bad) << "loss.mu_x = 1\n";
  const auto r = run({"train", "--config", bad, "--out", (dir / "o").string()});
  CHECK(r.code == cli::kExitConfigError);
  CHECK(r.err.find("mu_x") != std::string::npos);
  CHECK(run({"train", "--config", cfg, "--set", "loss.tau=3"}).code == cli::kExitConfigError);
  CHECK(run({"train", "--config", cfg, "--set", "loss.tau"}).code == cli::kExitConfigError);
  CHECK(run({"sweep", "--config", cfg, "--param", "epochs", "--values", "1"}).code == cli::kExitConfigError);
  CHECK(run({"sweep", "--config", cfg, "--param", "mu_c", "--values", ""}).code == cli::kExitConfigError);
  CHECK(run({"sweep", "--config", cfg, "--preset", "grid"}).code == cli::kExitConfigError);
  CHECK(run({"overtrain", "--config", cfg, "--repeat", "1"}).code == cli::kExitConfigError);
}

TEST_CASE("runtime failures exit with 2") {
  const auto dir = scratch("rterr");
  const auto cfg = write_config(dir, "run.optimizer = sgd\nrun.learning_rate = 1e12\n");
  const auto r = run({"train", "--config", cfg, "--out", (dir / "o").string()});
  CHECK(r.code == cli::kExitRuntimeError);
  CHECK(r.err.find("failed") != std::string::npos);

  const auto csv = write_config(dir, "data.kind = csv\ndata.source_paths = /nonexistent/a.csv\n"
                                     "data.target_path = /nonexistent/t.csv\n");
  CHECK(run({"train", "--config", csv, "--out", (dir / "o2").string()}).code == cli::kExitRuntimeError);
}

TEST_CASE("train writes metrics, checkpoints and summary") {
  const auto dir = scratch("train");
  const auto cfg = write_config(dir);
  const auto r = run({"train", "--config", cfg, "--seed", "7", "--repeat", "2", "--out", (dir / "o").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(fs::exists(dir / "o" / "seed_7" / "metrics.csv"));
  CHECK(fs::exists(dir / "o" / "seed_8" / "checkpoint.bin"));
  CHECK(read_file(dir / "o" / "summary.json") == r.out);

  const auto s = run({"train", "--config", cfg, "--seed", "8", "--out", (dir / "p").string()});
  CHECK(read_file(dir / "p" / "seed_8" / "metrics.csv") == read_file(dir / "o" / "seed_8" / "metrics.csv"));

  const auto overridden =
      run({"train", "--config", cfg, "--set", "run.epochs=1", "--out", (dir / "q").string()});
  REQUIRE(overridden.code == cli::kExitOk);
  CHECK(overridden.out.find("\"epochs\": 1") != std::string::npos);
}

TEST_CASE("every subcommand is bitwise reproducible") {
  const auto dir = scratch("det");
  const auto cfg = write_config(dir);
  auto twice = [&](const std::vector<std::string>& args, const std::vector<std::string>& files) {
    std::vector<std::string> first, second;
    for (const std::string tag : {"a", "b"}) {
      auto a = args;
      a.push_back("--out");
      a.push_back((dir / tag).string());
      const auto r = run(a);
      REQUIRE(r.code == cli::kExitOk);
      auto& bucket = tag == std::string("a") ? first : second;
      // stdout may echo the output directory.
      std::string text = r.out;
      for (auto pos = text.find((dir / tag).string()); pos != std::string::npos; pos = text.find((dir / tag).string()))
        text.replace(pos, (dir / tag).string().size(), "<out>");
      bucket.push_back(text);
      for (const auto& f : files) bucket.push_back(read_file(dir / tag / f));
    }
    CAPTURE(args[0]);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(first[i] == second[i]);
    fs::remove_all(dir / "a");
    fs::remove_all(dir / "b");
  };
  twice({"train", "--config", cfg, "--repeat", "3"},
        {"summary.json", "seed_0/metrics.csv", "seed_2/metrics.csv", "seed_1/checkpoint.bin"});
  twice({"sweep", "--config", cfg, "--param", "mu_s", "--values", "1e-5,10"}, {"sweep.csv"});
  twice({"sweep", "--config", cfg, "--preset", "cv", "--iterations", "2"}, {"cv.csv", "best.cfg"});
  twice({"overtrain", "--config", cfg, "--repeat", "2", "--set", "run.epochs=30"}, {"overtrain.csv"});
  twice({"bound", "--config", cfg, "--set", "bound.lambda=true"}, {"bound_report.json"});
  twice({"generate", "--config", cfg}, {"source_0.csv", "source_2_test.csv", "target.csv", "target_test.csv"});
}

TEST_CASE("bound refuses lambda without target labels") {
  const auto dir = scratch("lambda");
  const auto cfg = write_config(dir);
  REQUIRE(run({"generate", "--config", cfg, "--out", (dir / "gen").string()}).code == cli::kExitOk);
  {
    std::ifstream in(dir / "gen" / "target.csv");
    std::ofstream out(dir / "target_plain.csv");
    std::string line;
    while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << "\n";
  }
  const auto csv = write_config(dir, "data.kind = csv\ndata.source_paths = " + (dir / "gen" / "source_0.csv").string() +
                                         "," + (dir / "gen" / "source_1.csv").string() +
                                         "\ndata.target_path = " + (dir / "target_plain.csv").string() +
                                         "\nbound.lambda = true\n");
  const auto r = run({"bound", "--config", csv, "--out", (dir / "b").string()});
  CHECK(r.code == cli::kExitConfigError);
  CHECK(r.err.find("oracle") != std::string::npos);
  CHECK(run({"bound", "--config", csv, "--set", "bound.lambda=false", "--out", (dir / "b").string()}).code ==
        cli::kExitOk);
}
