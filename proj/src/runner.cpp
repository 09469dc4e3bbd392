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

#include "modafm/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace modafm::runner {

namespace fs = std::filesystem;
using config::Mode;
using config::TrainConfig;
using config::format_double;

namespace {

std::vector<data::DomainDataset> load_classes(const std::vector<std::string>& paths, bool labels, std::size_t c) {
  std::vector<data::DomainDataset> out;
  for (const auto& p : paths) out.push_back(data::load_csv(p, labels, c));
  return out;
}

std::size_t infer_classes(const TrainConfig& cfg) {
  std::size_t c = 0;
  for (const auto& p : cfg.data.source_paths) c = std::max(c, data::load_csv(p, true).num_classes());
  return std::max<std::size_t>(c, 2);
}

}  // namespace

data::DomainSet load_data(const TrainConfig& cfg) {
  if (cfg.data.kind == "synthetic") return data::generate_domains(cfg.data.shift, cfg.seed, cfg.data.transductive);
  const std::size_t c = infer_classes(cfg);
  auto sources = load_classes(cfg.data.source_paths, true, c);
  for (const auto& s : sources) {
    if (s.dim() != sources.front().dim()) throw ConfigError("csv sources disagree on feature dimension");
  }
  data::DomainDataset target = data::load_csv(cfg.data.target_path, false, c);
  data::DomainDataset target_test =
      (cfg.data.transductive || cfg.data.target_test_path.empty()) ? target
                                                                    : data::load_csv(cfg.data.target_test_path, false, c);
  if (target.dim() != sources.front().dim() || target_test.dim() != target.dim()) {
    throw ConfigError("csv target dimension differs from sources");
  }
  auto tests = sources;
  return data::DomainSet{std::move(sources), std::move(tests), std::move(target), std::move(target_test)};
}

moda::ModelSpec model_spec_for(const TrainConfig& cfg, const data::DomainSet& domains) {
  moda::ModelSpec spec = cfg.model;
  spec.input_dim = domains.target.dim();
  spec.num_classes = domains.target.num_classes();
  spec.num_sources = domains.sources.size();
  return spec;
}

namespace {

double oracle_accuracy(const moda::ModaModel& model, const data::DomainDataset& ds) {
  if (!ds.has_oracle_labels()) return std::numeric_limits<double>::quiet_NaN();
  return model.accuracy(ds.features(), ds.oracle_labels());
}

}  // namespace

RunResult run_experiment(const TrainConfig& cfg, const data::DomainSet& domains) {
  config::validate(cfg);
  if (cfg.data.kind == "csv" && cfg.mode == Mode::kFullySupervisedOracle && !domains.target.has_oracle_labels()) {
    throw divergence::OracleLabelsRequired("fully_supervised_oracle needs ground-truth target labels");
  }
  const std::size_t m_sources = domains.sources.size();
  const moda::ModelSpec spec = model_spec_for(cfg, domains);
  for (const auto& s : domains.sources) {
    if (s.size() < cfg.batch_size) throw ConfigError("run.batch_size exceeds source '" + s.domain_id() + "' size");
  }
  if (domains.target.size() < cfg.batch_size) throw ConfigError("run.batch_size exceeds target size");

  const bool oracle = cfg.mode == Mode::kFullySupervisedOracle;
  moda::ModelSpec train_spec = spec;
  std::optional<data::DomainDataset> revealed;
  if (oracle) {
    revealed = domains.target.reveal_oracle_labels();
    train_spec.num_sources = 1;
  }

  Rng init = make_rng(cfg.seed, 0x494E4954);
  moda::ModaModel model(train_spec, init);
  const moda::ObjectiveConfig objective = config::objective_for(cfg);
  nn::Optimizer optimizer(moda::trainable_parameters(model, objective), cfg.optimizer);

  std::vector<const data::DomainDataset*> train_sources;
  if (oracle) {
    train_sources.push_back(&*revealed);
  } else {
    for (const auto& s : domains.sources) train_sources.push_back(&s);
  }
  data::BatchSampler sampler(train_sources, &domains.target, cfg.batch_size, cfg.seed);
  Rng step_rng = make_rng(cfg.seed, 0x53544550);

  const std::vector<double> uniform(m_sources, 1.0 / static_cast<double>(m_sources));
  auto reported_alpha = [&]() { return objective.learn_alpha ? model.mixture.alpha() : uniform; };

  RunRecord record;
  record.seed = cfg.seed;
  record.mode = config::mode_name(cfg.mode);
  record.alpha.record(reported_alpha());

  const std::size_t per_epoch = std::max<std::size_t>(1, sampler.iterations_per_epoch());
  std::uint64_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochRow row;
    row.epoch = epoch;
    try {
      for (std::size_t it = 0; it < per_epoch; ++it) {
        const data::BatchBundle batch = sampler.sample(iteration++);
        const moda::LossBreakdown b = moda::train_step(model, optimizer, batch, objective, step_rng);
        row.loss_class += b.class_loss;
        row.loss_disc += b.disc_loss;
        row.loss_cons += b.cons_loss;
        row.sparsity += b.sparsity_term;
        row.total += b.total;
        row.masked_frac += b.masked_fraction;
      }
      row.alpha = reported_alpha();
      record.alpha.record(row.alpha);
    } catch (const NumericalError& e) {
      record.failed = true;
      record.failure = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    const double k = static_cast<double>(per_epoch);
    row.loss_class /= k;
    row.loss_disc /= k;
    row.loss_cons /= k;
    row.sparsity /= k;
    row.total /= k;
    row.masked_frac /= k;
    row.acc_target = oracle_accuracy(model, domains.target_test);
    for (const auto& s : domains.source_tests) row.acc_src.push_back(model.accuracy(s.features(), s.labels()));
    record.rows.push_back(std::move(row));
  }
  return RunResult{std::move(record), std::move(model)};
}

RunResult run_experiment(const TrainConfig& cfg) {
  config::validate(cfg);
  return run_experiment(cfg, load_data(cfg));
}

std::string metrics_csv(const RunRecord& record) {
  const std::size_t m = record.alpha.rows().empty() ? 0 : record.alpha.rows().front().size();
  std::string out = "# modafm-metrics v1\n";
  out += "epoch,loss_class,loss_disc,loss_cons,sparsity,total";
  for (std::size_t j = 0; j < m; ++j) out += ",alpha_" + std::to_string(j);
  out += ",masked_frac,acc_target";
  for (std::size_t j = 0; j < m; ++j) out += ",acc_src_" + std::to_string(j);
  out += '\n';
  for (const auto& r : record.rows) {
    out += std::to_string(r.epoch);
    for (double v : {r.loss_class, r.loss_disc, r.loss_cons, r.sparsity, r.total}) out += "," + format_double(v);
    for (double a : r.alpha) out += "," + format_double(a);
    out += "," + format_double(r.masked_frac) + "," + format_double(r.acc_target);
    for (double a : r.acc_src) out += "," + format_double(a);
    out += '\n';
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<MetricStats> summarize(const std::vector<RunRecord>& records) {
  std::vector<MetricStats> stats;
  auto add = [&](const std::string& name, std::size_t idx, double v) {
    if (stats.size() <= idx) stats.push_back({name, 0.0, 0.0, {}});
    stats[idx].values.push_back(v);
  };
  for (const auto& rec : records) {
    if (rec.failed || rec.rows.empty()) continue;
    const EpochRow& r = rec.rows.back();
    std::size_t i = 0;
    add("loss_class", i++, r.loss_class);
    add("loss_disc", i++, r.loss_disc);
    add("loss_cons", i++, r.loss_cons);
    add("sparsity", i++, r.sparsity);
    add("total", i++, r.total);
    for (std::size_t j = 0; j < r.alpha.size(); ++j) add("alpha_" + std::to_string(j), i++, r.alpha[j]);
    add("masked_frac", i++, r.masked_frac);
    add("acc_target", i++, r.acc_target);
    for (std::size_t j = 0; j < r.acc_src.size(); ++j) add("acc_src_" + std::to_string(j), i++, r.acc_src[j]);
  }
  for (auto& s : stats) {
    const double n = static_cast<double>(s.values.size());
    double sum = 0.0;
    for (double v : s.values) sum += v;
    s.mean = sum / n;
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.std = s.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return stats;
}

std::string summary_json(const TrainConfig& cfg, const std::vector<RunRecord>& records) {
  nlohmann::json j;
  j["format"] = "modafm-summary v1";
  j["mode"] = config::mode_name(cfg.mode);
  j["epochs"] = cfg.epochs;
  nlohmann::json runs = nlohmann::json::array();
  std::size_t failed = 0;
  for (const auto& r : records) {
    nlohmann::json item{{"seed", r.seed}, {"failed", r.failed}, {"epochs_completed", r.rows.size()}};
    if (r.failed) {
      item["failure"] = r.failure;
      ++failed;
    }
    runs.push_back(item);
  }
  j["runs"] = runs;
  j["failed_runs"] = failed;
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& s : summarize(records)) {
    metrics[s.name] = {{"mean", s.mean}, {"std", s.std}, {"n", s.values.size()}};
  }
  j["final_metrics"] = metrics;
  return j.dump(2) + "\n";
}

std::vector<RunRecord> run_batch(const TrainConfig& cfg, std::size_t repeat,
                                 const std::optional<std::string>& out_dir) {
  config::validate(cfg);
  if (repeat == 0) throw ConfigError("--repeat must be at least 1");
  std::vector<RunRecord> records(repeat);
  std::vector<std::exception_ptr> errors(repeat);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < repeat; k = next++) {
      try {
        TrainConfig c = cfg;
        c.seed = cfg.seed + k;
        RunResult res = run_experiment(c);
        if (out_dir) {
          const fs::path dir = fs::path(*out_dir) / ("seed_" + std::to_string(c.seed));
          write_text((dir / "metrics.csv").string(), metrics_csv(res.record));
          if (c.write_checkpoint) {
            fs::create_directories(dir);
            nn::save_checkpoint((dir / "checkpoint.bin").string(), res.model.parameters());
          }
        }
        records[k] = std::move(res.record);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const std::size_t threads =
      std::min<std::size_t>(repeat, std::max<unsigned>(1, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  if (out_dir) write_text((fs::path(*out_dir) / "summary.json").string(), summary_json(cfg, records));
  return records;
}

namespace {

double final_accuracy(const RunRecord& r) {
  return r.failed || r.rows.empty() ? std::numeric_limits<double>::quiet_NaN() : r.rows.back().acc_target;
}

}  // namespace

std::vector<SweepRow> sweep(const TrainConfig& cfg, const std::string& param, const std::vector<double>& values,
                            std::size_t repeat, const std::optional<std::string>& out_dir) {
  if (param != "mu_d" && param != "mu_s" && param != "mu_c" && param != "tau") {
    throw ConfigError("sweep parameter must be one of mu_d, mu_s, mu_c, tau (got '" + param + "')");
  }
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    TrainConfig c = cfg;
    config::set_value(c, "loss." + param, format_double(values[i]));
    config::validate(c);
    std::optional<std::string> dir;
    if (out_dir) dir = (fs::path(*out_dir) / (param + "_" + std::to_string(i))).string();
    const auto records = run_batch(c, repeat, dir);
    SweepRow row;
    row.value = values[i];
    std::vector<double> acc;
    for (const auto& r : records) {
      if (r.failed) {
        ++row.failed;
      } else {
        acc.push_back(final_accuracy(r));
      }
    }
    row.runs = records.size();
    if (!acc.empty()) {
      for (double a : acc) row.mean_acc += a;
      row.mean_acc /= static_cast<double>(acc.size());
      double ss = 0.0;
      for (double a : acc) ss += (a - row.mean_acc) * (a - row.mean_acc);
      row.std_acc = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
    } else {
      row.mean_acc = row.std_acc = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(row);
  }
  if (out_dir) write_text((fs::path(*out_dir) / "sweep.csv").string(), sweep_csv(param, rows));
  return rows;
}

std::string sweep_csv(const std::string& param, const std::vector<SweepRow>& rows) {
  std::string out = "# modafm-sweep v1\nparam,value,mean_acc_target,std_acc_target,runs,failed\n";
  for (const auto& r : rows) {
    out += param + "," + format_double(r.value) + "," + format_double(r.mean_acc) + "," + format_double(r.std_acc) +
           "," + std::to_string(r.runs) + "," + std::to_string(r.failed) + "\n";
  }
  return out;
}

CvResult cross_validate(const TrainConfig& cfg, std::size_t iterations, const std::optional<std::string>& out_dir) {
  config::validate(cfg);
  if (iterations == 0) throw ConfigError("cross-validation needs at least one iteration");
  const data::DomainSet domains = load_data(cfg);
  const std::size_t m = domains.sources.size();
  if (m < 2) throw ConfigError("cross-validation over sources needs at least two source domains");

  Rng rng = make_rng(cfg.seed, 0x43565253);
  auto log_uniform = [&rng](double lo, double hi) {
    return std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng));
  };
  CvResult result;
  for (std::size_t it = 0; it < iterations; ++it) {
    CvCandidate cand;
    cand.mu_d = log_uniform(1e-4, 1.0);
    cand.mu_s = log_uniform(1e-5, 1.0);
    cand.mu_c = log_uniform(1e-2, 1.0);
    TrainConfig c = cfg;
    c.objective.mu_d = cand.mu_d;
    c.objective.mu_s = cand.mu_s;
    c.objective.mu_c = cand.mu_c;
    double acc = 0.0;
    for (std::size_t held = 0; held < m; ++held) {
      std::vector<data::DomainDataset> sources;
      std::vector<data::DomainDataset> tests;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == held) continue;
        sources.push_back(domains.sources[j]);
        tests.push_back(domains.source_tests[j]);
      }
      const auto& h = domains.sources[held];
      const auto& ht = domains.source_tests[held];
      const data::DomainSet fold{
          std::move(sources), std::move(tests),
          data::DomainDataset::unlabeled(h.domain_id(), h.features(), h.num_classes(), data::Split::kTrain,
                                         h.labels()),
          data::DomainDataset::unlabeled(ht.domain_id(), ht.features(), ht.num_classes(), data::Split::kTest,
                                         ht.labels())};
      const RunResult res = run_experiment(c, fold);
      acc += res.record.failed ? 0.0 : final_accuracy(res.record);
    }
    cand.mean_acc = acc / static_cast<double>(m);
    result.candidates.push_back(cand);
    if (cand.mean_acc > result.candidates[result.best].mean_acc) result.best = it;
  }
  const CvCandidate& best = result.candidates[result.best];
  result.best_config = cfg;
  result.best_config.objective.mu_d = best.mu_d;
  result.best_config.objective.mu_s = best.mu_s;
  result.best_config.objective.mu_c = best.mu_c;
  if (out_dir) {
    std::string csv = "# modafm-cv v1\niteration,mu_d,mu_s,mu_c,mean_acc_heldout\n";
    for (std::size_t i = 0; i < result.candidates.size(); ++i) {
      const auto& c = result.candidates[i];
      csv += std::to_string(i) + "," + format_double(c.mu_d) + "," + format_double(c.mu_s) + "," +
             format_double(c.mu_c) + "," + format_double(c.mean_acc) + "\n";
    }
    write_text((fs::path(*out_dir) / "cv.csv").string(), csv);
    write_text((fs::path(*out_dir) / "best.cfg").string(), config::serialize_config(result.best_config));
  }
  return result;
}

double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw std::invalid_argument("slope: need two or more paired points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope: x values are all equal");
  return sxy / sxx;
}

StabilityStats stability(const std::vector<double>& acc) {
  if (acc.size() < 3) throw std::invalid_argument("stability: need at least three epochs");
  StabilityStats s;
  s.max_acc = *std::max_element(acc.begin(), acc.end());
  s.final_acc = acc.back();
  s.drop_from_peak = s.max_acc - s.final_acc;
  const std::size_t tail = (2 * acc.size() + 2) / 3;
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = acc.size() - tail; i < acc.size(); ++i) {
    xs.push_back(static_cast<double>(i + 1));
    ys.push_back(acc[i]);
  }
  s.tail_slope = least_squares_slope(xs, ys);
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty set");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

OvertrainReport overtrain_study(const TrainConfig& cfg, std::size_t repeat, const std::optional<std::string>& out_dir) {
  if (cfg.epochs < 30) throw ConfigError("overtrain study needs run.epochs >= 30");
  OvertrainReport report;
  for (Mode mode : {Mode::kModaFm, Mode::kModa}) {
    TrainConfig c = cfg;
    c.mode = mode;
    std::optional<std::string> dir;
    if (out_dir) dir = (fs::path(*out_dir) / config::mode_name(mode)).string();
    const auto records = run_batch(c, repeat, dir);
    auto& target = mode == Mode::kModaFm ? report.moda_fm : report.moda;
    for (const auto& r : records) {
      if (r.failed) throw NumericalError("overtrain run failed: " + r.failure);
      std::vector<double> acc;
      for (const auto& row : r.rows) acc.push_back(row.acc_target);
      target.push_back(stability(acc));
      if (mode == Mode::kModaFm) report.seeds.push_back(r.seed);
    }
  }
  std::vector<double> a;
  std::vector<double> b;
  for (const auto& s : report.moda_fm) a.push_back(s.drop_from_peak);
  for (const auto& s : report.moda) b.push_back(s.drop_from_peak);
  report.median_drop_moda_fm = median(a);
  report.median_drop_moda = median(b);
  if (out_dir) write_text((fs::path(*out_dir) / "overtrain.csv").string(), overtrain_csv(report));
  return report;
}

std::string overtrain_csv(const OvertrainReport& report) {
  std::string out = "# modafm-overtrain v1\nmode,seed,max_acc,final_acc,drop_from_peak,tail_slope\n";
  auto emit = [&](const char* mode, const std::vector<StabilityStats>& stats) {
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const auto& s = stats[i];
      out += std::string(mode) + "," + std::to_string(report.seeds[i]) + "," + format_double(s.max_acc) + "," +
             format_double(s.final_acc) + "," + format_double(s.drop_from_peak) + "," + format_double(s.tail_slope) +
             "\n";
    }
  };
  emit("moda_fm", report.moda_fm);
  emit("moda", report.moda);
  out += "median_drop,moda_fm," + format_double(report.median_drop_moda_fm) + "\n";
  out += "median_drop,moda," + format_double(report.median_drop_moda) + "\n";
  return out;
}

divergence::BoundReport bound_report(const TrainConfig& cfg, const data::DomainSet& domains) {
  config::validate(cfg);
  const auto& b = cfg.bound;
  const std::size_t m = domains.sources.size();
  if (b.lambda && !domains.target.has_oracle_labels()) {
    throw divergence::OracleLabelsRequired(
        "bound.lambda requested, but lambda is oracle-only and target '" + domains.target.domain_id() +
        "' has no ground-truth labels");
  }

  std::vector<double> alpha(m, 1.0 / static_cast<double>(m));
  std::optional<moda::ModaModel> model;
  std::string hypothesis = "probe trained on the alpha-weighted sources";
  if (b.alpha_source == "explicit") {
    if (b.alpha.size() != m) throw ConfigError("bound.alpha needs one entry per source");
    alpha = b.alpha;
  } else if (b.alpha_source == "checkpoint") {
    Rng init = make_rng(cfg.seed, 0x494E4954);
    model.emplace(model_spec_for(cfg, domains), init);
    nn::load_checkpoint(b.checkpoint, model->parameters());
    alpha = model->mixture.alpha();
    hypothesis = "checkpoint model";
  }

  std::vector<double> source_err(m);
  double target_err = std::numeric_limits<double>::quiet_NaN();
  if (model) {
    for (std::size_t j = 0; j < m; ++j) {
      source_err[j] = 1.0 - model->accuracy(domains.sources[j].features(), domains.sources[j].labels());
    }
    if (domains.target_test.has_oracle_labels()) {
      target_err = 1.0 - model->accuracy(domains.target_test.features(), domains.target_test.oracle_labels());
    }
  } else {
    std::vector<divergence::ProbeGroup> groups;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& s = domains.sources[j];
      groups.push_back({s.features(), std::vector<std::size_t>(s.labels().begin(), s.labels().end()), alpha[j]});
    }
    const nn::Mlp h = divergence::train_probe(groups, domains.target.num_classes(), cfg.probe, cfg.seed + 1);
    for (std::size_t j = 0; j < m; ++j) source_err[j] = divergence::zero_one_error(h, groups[j].x, groups[j].y);
    if (domains.target_test.has_oracle_labels()) {
      const auto& y = domains.target_test.oracle_labels();
      target_err = divergence::zero_one_error(h, domains.target_test.features(),
                                              std::vector<std::size_t>(y.begin(), y.end()));
    }
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < m; ++j) weighted += alpha[j] * source_err[j];

  std::size_t n = b.n;
  if (n == 0) {
    n = domains.sources.front().size();
    for (const auto& s : domains.sources) n = std::min(n, s.size());
  }
  const std::size_t rows = b.samples == 0 ? domains.target.size() : b.samples;
  const Tensor mixture = divergence::sample_mixture(domains.sources, alpha, rows, cfg.seed + 2);
  Tensor target_rows = domains.target.features();
  if (rows < target_rows.rows()) {
    std::vector<std::size_t> idx(rows);
    for (std::size_t i = 0; i < rows; ++i) idx[i] = i;
    target_rows = data::gather_rows(target_rows, idx);
  }
  const double hdiv = divergence::estimate_h_divergence(mixture, target_rows, cfg.probe, cfg.seed + 3);

  std::optional<double> lambda;
  if (b.lambda) lambda = divergence::estimate_lambda(domains.sources, domains.target, alpha, cfg.probe, cfg.seed + 4).value;

  divergence::BoundReport r = divergence::make_bound_report(alpha, b.vc_dim, n, b.delta, hdiv, lambda, weighted);
  if (!std::isnan(target_err)) r.measured_target_error = target_err;
  r.alpha_source = b.alpha_source;
  r.hypothesis = hypothesis;
  r.seed = cfg.seed;
  r.probe = cfg.probe;
  for (const auto& s : domains.sources) r.source_label_distributions.push_back(divergence::label_distribution(s));
  if (domains.target.has_oracle_labels()) {
    r.target_label_distribution =
        divergence::label_histogram(domains.target.oracle_labels(), domains.target.num_classes());
    for (const auto& p : r.source_label_distributions) {
      r.js_source_target.push_back(divergence::js_distance(p, *r.target_label_distribution));
    }
  }
  return r;
}

divergence::BoundReport bound_report(const TrainConfig& cfg) {
  config::validate(cfg);
  return bound_report(cfg, load_data(cfg));
}

void generate(const TrainConfig& cfg, const std::string& out_dir) {
  config::validate(cfg);
  if (cfg.data.kind != "synthetic") throw ConfigError("generate needs data.kind = synthetic");
  const data::DomainSet d = data::generate_domains(cfg.data.shift, cfg.seed, false);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  for (std::size_t j = 0; j < d.sources.size(); ++j) {
    data::write_csv((dir / ("source_" + std::to_string(j) + ".csv")).string(), d.sources[j],
                    data::LabelColumn::kLabels);
    data::write_csv((dir / ("source_" + std::to_string(j) + "_test.csv")).string(), d.source_tests[j],
                    data::LabelColumn::kLabels);
  }
  data::write_csv((dir / "target.csv").string(), d.target, data::LabelColumn::kOracle);
  data::write_csv((dir / "target_test.csv").string(), d.target_test, data::LabelColumn::kOracle);
}

}  // namespace modafm::runner
