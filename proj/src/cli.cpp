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

#include "modafm/cli.hpp"

#include <filesystem>
#include <optional>

#include "CLI11.hpp"
#include "modafm/config.hpp"
#include "modafm/runner.hpp"

namespace modafm::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::size_t repeat = 1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool with_repeat) {
  cmd->add_option("--config", c.config_path, "Experiment config file")->required();
  cmd->add_option("--seed", c.seed, "Override run.seed");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--set", c.overrides, "Override a config key (key=value), repeatable");
  if (with_repeat) cmd->add_option("--repeat", c.repeat, "Number of seeds (seed, seed+1, ...)")->capture_default_str();
}

config::TrainConfig load(const Common& c) {
  config::TrainConfig cfg = config::load_config(c.config_path);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    config::set_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.seed = *c.seed;
  config::validate(cfg);
  return cfg;
}

std::vector<double> parse_values(const std::string& text) {
  config::TrainConfig scratch;
  config::set_value(scratch, "bound.alpha", text);  // comma-separated reals
  return scratch.bound.alpha;
}

int failed_runs(const std::vector<runner::RunRecord>& records, std::ostream& err) {
  int failed = 0;
  for (const auto& r : records) {
    if (r.failed) {
      err << "run seed " << r.seed << " failed: " << r.failure << "\n";
      ++failed;
    }
  }
  return failed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-source domain adaptation laboratory", "modafm"};
  app.require_subcommand(1);

  Common train_opts;
  auto* train = app.add_subcommand("train", "Run one experiment (or a seed batch)");
  add_common(train, train_opts, true);

  Common sweep_opts;
  std::string param;
  std::string values;
  std::string preset;
  std::size_t iterations = 20;
  auto* sweep = app.add_subcommand("sweep", "Hyperparameter sweep or cross-validation preset");
  add_common(sweep, sweep_opts, true);
  sweep->add_option("--param", param, "mu_d, mu_s, mu_c or tau");
  sweep->add_option("--values", values, "Comma-separated values");
  sweep->add_option("--preset", preset, "cv: random search with source hold-out");
  sweep->add_option("--iterations", iterations, "Random-search iterations for --preset cv")->capture_default_str();

  Common over_opts;
  over_opts.repeat = 5;
  auto* overtrain = app.add_subcommand("overtrain", "Over-training stability study (moda_fm vs moda)");
  add_common(overtrain, over_opts, true);

  Common bound_opts;
  auto* bound = app.add_subcommand("bound", "Evaluate the generalization-bound terms");
  add_common(bound, bound_opts, false);

  Common gen_opts;
  auto* gen = app.add_subcommand("generate", "Write the synthetic domains as CSV");
  add_common(gen, gen_opts, false);

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
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    if (*train) {
      const auto cfg = load(train_opts);
      const auto records = runner::run_batch(cfg, train_opts.repeat, train_opts.out);
      out << runner::summary_json(cfg, records);
      return failed_runs(records, err) ? kExitRuntimeError : kExitOk;
    }
    if (*sweep) {
      const auto cfg = load(sweep_opts);
      if (preset == "cv") {
        const auto res = runner::cross_validate(cfg, iterations, sweep_opts.out);
        const auto& best = res.candidates[res.best];
        out << "best mu_d=" << config::format_double(best.mu_d) << " mu_s=" << config::format_double(best.mu_s)
            << " mu_c=" << config::format_double(best.mu_c)
            << " heldout_acc=" << config::format_double(best.mean_acc) << "\n";
        return kExitOk;
      }
      if (!preset.empty()) throw ConfigError("unknown sweep preset '" + preset + "'");
      if (param.empty()) throw ConfigError("sweep needs --param (or --preset cv)");
      const auto rows = runner::sweep(cfg, param, parse_values(values), sweep_opts.repeat, sweep_opts.out);
      out << runner::sweep_csv(param, rows);
      for (const auto& r : rows) {
        if (r.failed) return kExitRuntimeError;
      }
      return kExitOk;
    }
    if (*overtrain) {
      const auto cfg = load(over_opts);
      const auto report = runner::overtrain_study(cfg, over_opts.repeat, over_opts.out);
      out << runner::overtrain_csv(report);
      return kExitOk;
    }
    if (*bound) {
      const auto cfg = load(bound_opts);
      const auto report = runner::bound_report(cfg);
      const std::string text = divergence::bound_report_json(report);
      runner::write_text((fs::path(bound_opts.out) / "bound_report.json").string(), text);
      out << text;
      return kExitOk;
    }
    if (*gen) {
      const auto cfg = load(gen_opts);
      runner::generate(cfg, gen_opts.out);
      out << "wrote synthetic domains to " << gen_opts.out << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
  return kExitConfigError;
}

}  // namespace modafm::cli
