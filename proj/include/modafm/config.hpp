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

#ifndef MODAFM_CONFIG_HPP
#define MODAFM_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "modafm/data.hpp"
#include "modafm/divergence.hpp"
#include "modafm/moda.hpp"
#include "modafm/nn.hpp"

namespace modafm::config {

enum class Mode { kModaFm, kModa, kFm, kUniformAlphaAdversarial, kSourceOnly, kFullySupervisedOracle };

std::string mode_name(Mode mode);
Mode parse_mode(const std::string& name);

struct DataConfig {
  std::string kind = "synthetic";  // synthetic | csv
  data::ShiftSpec shift;
  std::vector<std::string> source_paths;
  std::string target_path;
  std::string target_test_path;  // empty: transductive or no held-out split
  bool transductive = false;

  bool operator==(const DataConfig&) const = default;
};

struct BoundConfig {
  double vc_dim = 5.0;
  double delta = 0.05;
  std::size_t n = 0;              // 0: smallest source size
  std::string alpha_source = "uniform";  // uniform | explicit | checkpoint
  std::vector<double> alpha;      // for explicit
  std::string checkpoint;         // for checkpoint
  bool lambda = false;
  std::size_t samples = 0;        // rows per side for the divergence probe; 0: target size

  bool operator==(const BoundConfig&) const = default;
};

/// Every experiment knob. Model input/class/source counts are derived from
/// the data section at run time.
struct TrainConfig {
  Mode mode = Mode::kModaFm;
  std::uint64_t seed = 0;
  std::size_t epochs = 60;
  std::size_t batch_size = 8;
  bool write_checkpoint = true;
  nn::OptimizerConfig optimizer;
  moda::ModelSpec model;
  moda::ObjectiveConfig objective;
  DataConfig data;
  divergence::ProbeConfig probe;
  BoundConfig bound;

  bool operator==(const TrainConfig&) const = default;
};

// Flat "key = value" lines, '#' comments. Unknown or repeated keys, and
// malformed values, raise ConfigError naming the line.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);
std::string serialize_config(const TrainConfig& config);

// Range checks over the whole structure; throws ConfigError.
void validate(const TrainConfig& config);

// Sets one key from its text form, as a config line would.
void set_value(TrainConfig& config, const std::string& key, const std::string& value);
std::string get_value(const TrainConfig& config, const std::string& key);
std::vector<std::string> known_keys();

// Objective switches implied by the mode.
moda::ObjectiveConfig objective_for(const TrainConfig& config);

std::string format_double(double v);

}  // namespace modafm::config

#endif  // MODAFM_CONFIG_HPP
