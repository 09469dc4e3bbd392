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

#include "modafm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace modafm::config {

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kModaFm:
      return "moda_fm";
    case Mode::kModa:
      return "moda";
    case Mode::kFm:
      return "fm";
    case Mode::kUniformAlphaAdversarial:
      return "uniform_alpha_adversarial";
    case Mode::kSourceOnly:
      return "source_only";
    case Mode::kFullySupervisedOracle:
      return "fully_supervised_oracle";
  }
  return "moda_fm";
}

Mode parse_mode(const std::string& name) {
  for (Mode m : {Mode::kModaFm, Mode::kModa, Mode::kFm, Mode::kUniformAlphaAdversarial, Mode::kSourceOnly,
                 Mode::kFullySupervisedOracle}) {
    if (mode_name(m) == name) return m;
  }
  throw ConfigError("unknown mode '" + name + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string part;
  std::istringstream ss(s);
  while (std::getline(ss, part, sep)) out.push_back(trim(part));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("expected a number, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& s) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ConfigError("expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::string join_doubles(const std::vector<double>& v, char sep = ',') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::vector<double> doubles(const std::string& s) {
  std::vector<double> out;
  for (const auto& p : split(s, ',')) out.push_back(to_double(p));
  return out;
}

std::vector<std::size_t> sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& p : split(s, ',')) out.push_back(to_uint(p));
  return out;
}

std::string join_matrix(const std::vector<std::vector<double>>& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) out += ';';
    out += join_doubles(m[i]);
  }
  return out;
}

std::vector<std::vector<double>> matrix(const std::string& s) {
  std::vector<std::vector<double>> out;
  for (const auto& row : split(s, ';')) out.push_back(doubles(row));
  return out;
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

struct Entry {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

template <typename Access>
Entry real(std::string key, Access f) {
  return {std::move(key), [f](const TrainConfig& c) { return format_double(f(const_cast<TrainConfig&>(c))); },
          [f](TrainConfig& c, const std::string& v) { f(c) = to_double(v); }};
}

template <typename Access>
Entry count(std::string key, Access f) {
  return {std::move(key), [f](const TrainConfig& c) { return std::to_string(f(const_cast<TrainConfig&>(c))); },
          [f](TrainConfig& c, const std::string& v) { f(c) = static_cast<std::decay_t<decltype(f(c))>>(to_uint(v)); }};
}

template <typename Access>
Entry flag(std::string key, Access f) {
  return {std::move(key),
          [f](const TrainConfig& c) { return std::string(f(const_cast<TrainConfig&>(c)) ? "true" : "false"); },
          [f](TrainConfig& c, const std::string& v) { f(c) = to_bool(v); }};
}

template <typename Access>
Entry text(std::string key, Access f) {
  return {std::move(key), [f](const TrainConfig& c) { return f(const_cast<TrainConfig&>(c)); },
          [f](TrainConfig& c, const std::string& v) { f(c) = v; }};
}

template <typename Access>
Entry reals(std::string key, Access f) {
  return {std::move(key), [f](const TrainConfig& c) { return join_doubles(f(const_cast<TrainConfig&>(c))); },
          [f](TrainConfig& c, const std::string& v) { f(c) = doubles(v); }};
}

template <typename Access>
Entry widths(std::string key, Access f) {
  return {std::move(key), [f](const TrainConfig& c) { return join_sizes(f(const_cast<TrainConfig&>(c))); },
          [f](TrainConfig& c, const std::string& v) { f(c) = sizes(v); }};
}

template <typename Access>
Entry rows(std::string key, Access f) {
  return {std::move(key), [f](const TrainConfig& c) { return join_matrix(f(const_cast<TrainConfig&>(c))); },
          [f](TrainConfig& c, const std::string& v) { f(c) = matrix(v); }};
}

const std::vector<Entry>& entries() {
  using C = TrainConfig;
  static const std::vector<Entry> table = {
      {"run.mode", [](const C& c) { return mode_name(c.mode); },
       [](C& c, const std::string& v) { c.mode = parse_mode(v); }},
      count("run.seed", [](C& c) -> std::uint64_t& { return c.seed; }),
      count("run.epochs", [](C& c) -> std::size_t& { return c.epochs; }),
      count("run.batch_size", [](C& c) -> std::size_t& { return c.batch_size; }),
      flag("run.checkpoint", [](C& c) -> bool& { return c.write_checkpoint; }),
      {"run.optimizer", [](const C& c) { return nn::optimizer_kind_name(c.optimizer.kind); },
       [](C& c, const std::string& v) { c.optimizer.kind = nn::parse_optimizer_kind(v); }},
      real("run.learning_rate", [](C& c) -> double& { return c.optimizer.learning_rate; }),
      real("run.rho", [](C& c) -> double& { return c.optimizer.rho; }),
      real("run.eps", [](C& c) -> double& { return c.optimizer.eps; }),

      widths("model.extractor", [](C& c) -> std::vector<std::size_t>& { return c.model.extractor_widths; }),
      widths("model.classifier", [](C& c) -> std::vector<std::size_t>& { return c.model.classifier_hidden; }),
      widths("model.discriminator",
             [](C& c) -> std::vector<std::size_t>& { return c.model.discriminator_hidden; }),

      real("loss.mu_d", [](C& c) -> double& { return c.objective.mu_d; }),
      real("loss.mu_s", [](C& c) -> double& { return c.objective.mu_s; }),
      real("loss.mu_c", [](C& c) -> double& { return c.objective.mu_c; }),
      real("loss.tau", [](C& c) -> double& { return c.objective.tau; }),
      real("loss.reversal", [](C& c) -> double& { return c.objective.reversal; }),

      {"augment.kind", [](const C& c) { return augment::augment_kind_name(c.objective.augment.kind); },
       [](C& c, const std::string& v) { c.objective.augment.kind = augment::parse_augment_kind(v); }},
      real("augment.sigma_min", [](C& c) -> double& { return c.objective.augment.sigma_min; }),
      real("augment.sigma_max", [](C& c) -> double& { return c.objective.augment.sigma_max; }),
      real("augment.p_min", [](C& c) -> double& { return c.objective.augment.p_min; }),
      real("augment.p_max", [](C& c) -> double& { return c.objective.augment.p_max; }),
      flag("augment.input_dropout", [](C& c) -> bool& { return c.objective.augment.input_dropout; }),

      text("data.kind", [](C& c) -> std::string& { return c.data.kind; }),
      flag("data.transductive", [](C& c) -> bool& { return c.data.transductive; }),
      count("data.num_sources", [](C& c) -> std::size_t& { return c.data.shift.num_sources; }),
      count("data.num_classes", [](C& c) -> std::size_t& { return c.data.shift.num_classes; }),
      count("data.dim", [](C& c) -> std::size_t& { return c.data.shift.dim; }),
      count("data.train_samples", [](C& c) -> std::size_t& { return c.data.shift.train_samples; }),
      count("data.test_samples", [](C& c) -> std::size_t& { return c.data.shift.test_samples; }),
      real("data.class_radius", [](C& c) -> double& { return c.data.shift.class_radius; }),
      real("data.class_sigma", [](C& c) -> double& { return c.data.shift.class_sigma; }),
      rows("data.class_means", [](C& c) -> std::vector<std::vector<double>>& { return c.data.shift.class_means; }),
      rows("data.class_covariances",
           [](C& c) -> std::vector<std::vector<double>>& { return c.data.shift.class_covariances; }),
      reals("data.rotations_deg", [](C& c) -> std::vector<double>& { return c.data.shift.rotations_deg; }),
      rows("data.label_priors", [](C& c) -> std::vector<std::vector<double>>& { return c.data.shift.label_priors; }),
      {"data.source_paths", [](const C& c) { return join_strings(c.data.source_paths); },
       [](C& c, const std::string& v) { c.data.source_paths = split(v, ','); }},
      text("data.target_path", [](C& c) -> std::string& { return c.data.target_path; }),
      text("data.target_test_path", [](C& c) -> std::string& { return c.data.target_test_path; }),

      widths("probe.hidden", [](C& c) -> std::vector<std::size_t>& { return c.probe.hidden; }),
      count("probe.epochs", [](C& c) -> std::size_t& { return c.probe.epochs; }),
      count("probe.batch_size", [](C& c) -> std::size_t& { return c.probe.batch_size; }),
      {"probe.optimizer", [](const C& c) { return nn::optimizer_kind_name(c.probe.optimizer.kind); },
       [](C& c, const std::string& v) { c.probe.optimizer.kind = nn::parse_optimizer_kind(v); }},
      real("probe.learning_rate", [](C& c) -> double& { return c.probe.optimizer.learning_rate; }),
      real("probe.train_fraction", [](C& c) -> double& { return c.probe.train_fraction; }),

      real("bound.vc_dim", [](C& c) -> double& { return c.bound.vc_dim; }),
      real("bound.delta", [](C& c) -> double& { return c.bound.delta; }),
      count("bound.n", [](C& c) -> std::size_t& { return c.bound.n; }),
      text("bound.alpha_source", [](C& c) -> std::string& { return c.bound.alpha_source; }),
      reals("bound.alpha", [](C& c) -> std::vector<double>& { return c.bound.alpha; }),
      text("bound.checkpoint", [](C& c) -> std::string& { return c.bound.checkpoint; }),
      flag("bound.lambda", [](C& c) -> bool& { return c.bound.lambda; }),
      count("bound.samples", [](C& c) -> std::size_t& { return c.bound.samples; }),
  };
  return table;
}

const Entry& find_entry(const std::string& key) {
  for (const auto& e : entries()) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void check(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& e : entries()) out.push_back(e.key);
  return out;
}

void set_value(TrainConfig& config, const std::string& key, const std::string& value) {
  const Entry& e = find_entry(key);
  try {
    e.set(config, trim(value));
  } catch (const ConfigError& err) {
    throw ConfigError(key + ": " + err.what());
  }
}

std::string get_value(const TrainConfig& config, const std::string& key) { return find_entry(key).get(config); }

TrainConfig parse_config(const std::string& text) {
  TrainConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      set_value(config, key, line.substr(eq + 1));
    } catch (const ConfigError& err) {
      throw ConfigError(where + err.what());
    }
  }
  return config;
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const TrainConfig& config) {
  std::string out;
  for (const auto& e : entries()) out += e.key + " = " + e.get(config) + "\n";
  return out;
}

void validate(const TrainConfig& c) {
  const auto& o = c.objective;
  check(finite_nonneg(o.mu_d), "loss.mu_d must be a non-negative number");
  check(finite_nonneg(o.mu_s), "loss.mu_s must be a non-negative number");
  check(finite_nonneg(o.mu_c), "loss.mu_c must be a non-negative number");
  check(o.tau >= 0.0 && o.tau <= 1.0, "loss.tau must lie in [0, 1]");
  check(std::isfinite(o.reversal) && o.reversal >= 0.0, "loss.reversal must be non-negative");
  o.augment.validate();
  check(c.epochs >= 1, "run.epochs must be at least 1");
  check(c.batch_size >= 1, "run.batch_size must be at least 1");
  check(c.optimizer.learning_rate > 0.0 && std::isfinite(c.optimizer.learning_rate),
        "run.learning_rate must be positive");
  check(c.optimizer.rho >= 0.0 && c.optimizer.rho < 1.0, "run.rho must lie in [0, 1)");
  check(c.optimizer.eps > 0.0, "run.eps must be positive");
  check(!c.model.extractor_widths.empty(), "model.extractor needs at least one layer");
  for (const auto* w : {&c.model.extractor_widths, &c.model.classifier_hidden, &c.model.discriminator_hidden}) {
    for (std::size_t v : *w) check(v > 0, "model layer widths must be positive");
  }
  if (c.data.kind == "synthetic") {
    c.data.shift.validate();
  } else if (c.data.kind == "csv") {
    check(!c.data.source_paths.empty(), "data.source_paths must list at least one file");
    check(!c.data.target_path.empty(), "data.target_path is required for csv data");
  } else {
    throw ConfigError("data.kind must be synthetic or csv, got '" + c.data.kind + "'");
  }
  check(c.probe.epochs >= 1, "probe.epochs must be at least 1");
  check(c.probe.batch_size >= 1, "probe.batch_size must be at least 1");
  check(c.probe.optimizer.learning_rate > 0.0, "probe.learning_rate must be positive");
  check(c.probe.train_fraction > 0.0 && c.probe.train_fraction < 1.0, "probe.train_fraction must lie in (0, 1)");
  for (std::size_t v : c.probe.hidden) check(v > 0, "probe.hidden widths must be positive");
  check(c.bound.delta > 0.0 && c.bound.delta < 1.0, "bound.delta must lie in (0, 1)");
  check(finite_nonneg(c.bound.vc_dim), "bound.vc_dim must be non-negative");
  const std::string& src = c.bound.alpha_source;
  check(src == "uniform" || src == "explicit" || src == "checkpoint",
        "bound.alpha_source must be uniform, explicit or checkpoint");
  if (src == "explicit") {
    double s = 0.0;
    for (double a : c.bound.alpha) {
      check(a >= 0.0, "bound.alpha entries must be non-negative");
      s += a;
    }
    check(!c.bound.alpha.empty() && std::abs(s - 1.0) <= 1e-9, "bound.alpha must sum to 1");
    if (c.data.kind == "synthetic") {
      check(c.bound.alpha.size() == c.data.shift.num_sources, "bound.alpha needs one entry per source");
    }
  }
  if (src == "checkpoint") check(!c.bound.checkpoint.empty(), "bound.checkpoint path is required");
}

moda::ObjectiveConfig objective_for(const TrainConfig& config) {
  moda::ObjectiveConfig o = config.objective;
  switch (config.mode) {
    case Mode::kModaFm:
      o.learn_alpha = o.use_discriminator = o.use_consistency = true;
      break;
    case Mode::kModa:
      o.learn_alpha = o.use_discriminator = true;
      o.use_consistency = false;
      o.mu_c = 0.0;
      break;
    case Mode::kFm:
      o.learn_alpha = o.use_discriminator = false;
      o.use_consistency = true;
      break;
    case Mode::kUniformAlphaAdversarial:
      o.learn_alpha = o.use_consistency = false;
      o.use_discriminator = true;
      break;
    case Mode::kSourceOnly:
    case Mode::kFullySupervisedOracle:
      o.learn_alpha = o.use_discriminator = o.use_consistency = false;
      break;
  }
  if (!o.use_discriminator) o.mu_d = 0.0;
  if (!o.use_consistency) o.mu_c = 0.0;
  return o;
}

}  // namespace modafm::config
