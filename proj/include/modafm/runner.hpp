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

#ifndef MODAFM_RUNNER_HPP
#define MODAFM_RUNNER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "modafm/config.hpp"
#include "modafm/data.hpp"
#include "modafm/divergence.hpp"
#include "modafm/moda.hpp"

namespace modafm::runner {

struct EpochRow {
  std::size_t epoch = 0;
  double loss_class = 0.0;
  double loss_disc = 0.0;
  double loss_cons = 0.0;
  double sparsity = 0.0;
  double total = 0.0;
  std::vector<double> alpha;
  double masked_frac = 0.0;
  double acc_target = 0.0;
  std::vector<double> acc_src;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string mode;
  std::vector<EpochRow> rows;
  moda::AlphaTrajectory alpha;  // row 0 is the initial mixture
  bool failed = false;
  std::string failure;
};

struct RunResult {
  RunRecord record;
  moda::ModaModel model;
};

// Training, test and evaluation pools for a config (synthetic data is drawn
// from the run seed).
data::DomainSet load_data(const config::TrainConfig& config);

// One full run of config.mode. Throws ConfigError before any training when
// the config is invalid; a mid-run numerical failure ends the run and is
// recorded in the returned record.
RunResult run_experiment(const config::TrainConfig& config, const data::DomainSet& domains);
RunResult run_experiment(const config::TrainConfig& config);

moda::ModelSpec model_spec_for(const config::TrainConfig& config, const data::DomainSet& domains);

std::string metrics_csv(const RunRecord& record);
void write_text(const std::string& path, const std::string& text);

// Mean and sample standard deviation of each final-row metric.
struct MetricStats {
  std::string name;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> values;
};
std::vector<MetricStats> summarize(const std::vector<RunRecord>& records);
std::string summary_json(const config::TrainConfig& config, const std::vector<RunRecord>& records);

// Runs seeds seed .. seed + repeat - 1, possibly in parallel. When out_dir is
// set, writes seed_<S>/metrics.csv (+ checkpoint.bin) and summary.json.
std::vector<RunRecord> run_batch(const config::TrainConfig& config, std::size_t repeat,
                                 const std::optional<std::string>& out_dir);

struct SweepRow {
  double value = 0.0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  std::size_t runs = 0;
  std::size_t failed = 0;
};
std::vector<SweepRow> sweep(const config::TrainConfig& config, const std::string& param,
                            const std::vector<double>& values, std::size_t repeat,
                            const std::optional<std::string>& out_dir);
std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows);

// Random search with each source held out as pseudo-target in turn.
struct CvCandidate {
  double mu_d = 0.0;
  double mu_s = 0.0;
  double mu_c = 0.0;
  double mean_acc = 0.0;
};
struct CvResult {
  std::vector<CvCandidate> candidates;
  std::size_t best = 0;
  config::TrainConfig best_config;
};
CvResult cross_validate(const config::TrainConfig& config, std::size_t iterations,
                        const std::optional<std::string>& out_dir);

// Least-squares slope of ys against xs.
double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys);

struct StabilityStats {
  double max_acc = 0.0;
  double final_acc = 0.0;
  double drop_from_peak = 0.0;
  double tail_slope = 0.0;  // over the last two thirds of epochs
};
StabilityStats stability(const std::vector<double>& accuracy_per_epoch);

struct OvertrainReport {
  std::vector<std::uint64_t> seeds;
  std::vector<StabilityStats> moda_fm;
  std::vector<StabilityStats> moda;
  double median_drop_moda_fm = 0.0;
  double median_drop_moda = 0.0;
};
OvertrainReport overtrain_study(const config::TrainConfig& config, std::size_t repeat,
                                const std::optional<std::string>& out_dir);
std::string overtrain_csv(const OvertrainReport& report);

double median(std::vector<double> v);

divergence::BoundReport bound_report(const config::TrainConfig& config);
divergence::BoundReport bound_report(const config::TrainConfig& config, const data::DomainSet& domains);

// Writes source_<j>.csv, source_<j>_test.csv, target.csv and target_test.csv.
void generate(const config::TrainConfig& config, const std::string& out_dir);

}  // namespace modafm::runner

#endif  // MODAFM_RUNNER_HPP
