// Copyright 2026 The egfl authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "egfl/federation.hpp"

#include <atomic>
#include <functional>
#include <optional>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "egfl/io.hpp"
#include "egfl/rng.hpp"

namespace egfl {

namespace {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Mean ignoring NaNs; NaN when nothing is defined.
double mean_defined(const std::vector<double>& v) {
  double s = 0.0;
  std::size_t c = 0;
  for (double x : v) {
    if (!std::isnan(x)) {
      s += x;
      ++c;
    }
  }
  return c == 0 ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(c);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::EgflJs:
      return "EGFL-JS";
    case Variant::EgflKl:
      return "EGFL-KL";
    case Variant::EgflUnconstrained:
      return "EGFL-unconstrained";
    case Variant::FlConstrained:
      return "FL-constrained";
    case Variant::FlVanilla:
      return "FL-vanilla";
  }
  return "EGFL-JS";
}

Variant variant_from_string(const std::string& name) {
  if (name == "EGFL-JS") return Variant::EgflJs;
  if (name == "EGFL-KL") return Variant::EgflKl;
  if (name == "EGFL-unconstrained") return Variant::EgflUnconstrained;
  if (name == "FL-constrained") return Variant::FlConstrained;
  if (name == "FL-vanilla") return Variant::FlVanilla;
  throw ValidationError("unknown variant: " + name);
}

void ExperimentConfig::validate() const {
  if (num_bs < 1) throw ValidationError("config: K must be >= 1");
  if (num_slices < 1) throw ValidationError("config: N must be >= 1");
  if (rounds < 1) throw ValidationError("config: T must be >= 1");
  if (local_epochs < 1) throw ValidationError("config: L must be >= 1");
  if (dataset_size < 1) throw ValidationError("config: D must be >= 1");
  if (static_cast<int>(gamma.size()) != num_slices) {
    throw ValidationError("config: gamma needs exactly N values");
  }
  for (double g : gamma) {
    if (!(g > 0.0 && g < 1.0)) throw ValidationError("config: gamma outside (0,1)");
  }
  if (!(eta_lambda > 0.0)) throw ValidationError("config: eta_lambda must be > 0");
  if (!(r_lambda >= 0.0)) throw ValidationError("config: R_lambda must be >= 0");
  if (oracle_steps < 1) throw ValidationError("config: oracle_steps must be >= 1");
  if (!(oracle_lr > 0.0)) throw ValidationError("config: oracle_lr must be > 0");
  if (ig_steps < 1) throw ValidationError("config: ig_steps must be >= 1");
  if (ig_steps_report < 1) throw ValidationError("config: ig_steps_report must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ValidationError("config: threshold outside (0,1)");
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ValidationError("config: test_fraction outside [0,1)");
  }
  for (int h : hidden_dims) {
    if (h < 1) throw ValidationError("config: hidden_dims must be positive");
  }
  if (!(mu > 0.0)) throw ValidationError("config: mu must be > 0");
  if (variants.empty()) throw ValidationError("config: no variants requested");
  if (threads < 0) throw ValidationError("config: threads must be >= 0");
}

std::vector<int> ExperimentConfig::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(3);
  dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
  dims.push_back(1);
  return dims;
}

LocalTrainConfig ExperimentConfig::local_config(Variant variant, int slice, int bs) const {
  LocalTrainConfig c;
  c.epochs = local_epochs;
  c.gamma = gamma[slice];
  c.eta_lambda = eta_lambda;
  switch (variant) {
    case Variant::EgflJs:
      c.divergence = DivergenceKind::JS;
      c.r_lambda = r_lambda;
      break;
    case Variant::EgflKl:
      c.divergence = DivergenceKind::KL;
      c.r_lambda = r_lambda;
      break;
    case Variant::EgflUnconstrained:
      c.divergence = DivergenceKind::JS;
      c.r_lambda = 0.0;
      break;
    case Variant::FlConstrained:
      c.divergence = DivergenceKind::None;
      c.r_lambda = r_lambda;
      break;
    case Variant::FlVanilla:
      c.divergence = DivergenceKind::None;
      c.r_lambda = 0.0;
      break;
  }
  c.divergence_coeff = divergence_coeff;
  c.oracle_steps = oracle_steps;
  c.oracle_lr = oracle_lr;
  c.ig_steps = ig_steps;
  c.threshold = threshold;
  c.test_fraction = test_fraction;
  c.split_seed = derive_seed(seed, {kStreamSplit, static_cast<std::uint64_t>(bs),
                                    static_cast<std::uint64_t>(slice)});
  return c;
}

namespace {

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += format_double(v[i]);
  }
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string join_variants(const std::vector<Variant>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += to_string(v[i]);
  }
  return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_key_values(
    const std::map<std::string, std::string>& kv) {
  ExperimentConfig cfg;
  for (const auto& [key, value] : kv) {
    try {
      if (key == "K") {
        cfg.num_bs = static_cast<int>(parse_long(value));
      } else if (key == "N") {
        cfg.num_slices = static_cast<int>(parse_long(value));
      } else if (key == "D") {
        cfg.dataset_size = static_cast<int>(parse_long(value));
      } else if (key == "T") {
        cfg.rounds = static_cast<int>(parse_long(value));
      } else if (key == "L") {
        cfg.local_epochs = static_cast<int>(parse_long(value));
      } else if (key == "gamma") {
        cfg.gamma = parse_double_list(value);
      } else if (key == "eta_lambda") {
        cfg.eta_lambda = parse_double(value);
      } else if (key == "R_lambda") {
        cfg.r_lambda = parse_double(value);
      } else if (key == "divergence_coeff") {
        cfg.divergence_coeff = parse_double(value);
      } else if (key == "oracle_steps") {
        cfg.oracle_steps = static_cast<int>(parse_long(value));
      } else if (key == "oracle_lr") {
        cfg.oracle_lr = parse_double(value);
      } else if (key == "ig_steps") {
        cfg.ig_steps = static_cast<int>(parse_long(value));
      } else if (key == "ig_steps_report") {
        cfg.ig_steps_report = static_cast<int>(parse_long(value));
      } else if (key == "threshold") {
        cfg.threshold = parse_double(value);
      } else if (key == "test_fraction") {
        cfg.test_fraction = parse_double(value);
      } else if (key == "hidden_dims") {
        cfg.hidden_dims.clear();
        for (const auto& cell : split_csv_line(value)) {
          cfg.hidden_dims.push_back(static_cast<int>(parse_long(cell)));
        }
      } else if (key == "mu") {
        cfg.mu = parse_double(value);
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_long(value));
      } else if (key == "variants") {
        cfg.variants.clear();
        for (auto cell : split_csv_line(value)) {
          const auto b = cell.find_first_not_of(" \t");
          const auto e = cell.find_last_not_of(" \t");
          if (b == std::string::npos) throw ValidationError("config: empty variant name");
          cfg.variants.push_back(variant_from_string(cell.substr(b, e - b + 1)));
        }
      } else if (key == "threads") {
        cfg.threads = static_cast<int>(parse_long(value));
      } else {
        throw ValidationError("config: unknown key '" + key + "'");
      }
    } catch (const ParseError& e) {
      throw ValidationError("config: key '" + key + "': " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

std::map<std::string, std::string> ExperimentConfig::to_key_values() const {
  std::map<std::string, std::string> kv;
  kv["K"] = std::to_string(num_bs);
  kv["N"] = std::to_string(num_slices);
  kv["D"] = std::to_string(dataset_size);
  kv["T"] = std::to_string(rounds);
  kv["L"] = std::to_string(local_epochs);
  kv["gamma"] = join_doubles(gamma);
  kv["eta_lambda"] = format_double(eta_lambda);
  kv["R_lambda"] = format_double(r_lambda);
  kv["divergence_coeff"] = format_double(divergence_coeff);
  kv["oracle_steps"] = std::to_string(oracle_steps);
  kv["oracle_lr"] = format_double(oracle_lr);
  kv["ig_steps"] = std::to_string(ig_steps);
  kv["ig_steps_report"] = std::to_string(ig_steps_report);
  kv["threshold"] = format_double(threshold);
  kv["test_fraction"] = format_double(test_fraction);
  kv["hidden_dims"] = join_ints(hidden_dims);
  kv["mu"] = format_double(mu);
  kv["seed"] = std::to_string(seed);
  kv["variants"] = join_variants(variants);
  kv["threads"] = std::to_string(threads);
  return kv;
}

Model aggregate(const std::vector<Model>& models, const std::vector<std::size_t>& sizes) {
  if (models.empty()) throw ValidationError("aggregate: no models");
  if (models.size() != sizes.size()) {
    throw ShapeError("aggregate: model/size count mismatch");
  }
  double total = 0.0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ValidationError("aggregate: zero dataset size");
    total += static_cast<double>(s);
  }
  const Model& first = models.front();
  for (const Model& m : models) {
    if (!m.congruent_with(first)) throw ShapeError("aggregate: incongruent architectures");
  }
  Model out = Model::zeros(first.layer_dims(), first.output_activation(), first.mu());
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double w = static_cast<double>(sizes[i]) / total;
    for (std::size_t l = 0; l < out.num_layers(); ++l) {
      auto& ow = out.weight(l);
      const auto& mw = models[i].weight(l);
      for (std::size_t j = 0; j < ow.size(); ++j) ow[j] += w * mw[j];
      auto& ob = out.bias(l);
      const auto& mb = models[i].bias(l);
      for (std::size_t j = 0; j < ob.size(); ++j) ob[j] += w * mb[j];
    }
  }
  return out;
}

std::vector<SplitDataset> make_splits(const DatasetGrid& grid, const ExperimentConfig& cfg) {
  std::vector<SplitDataset> splits(grid.clients.size());
  for (int k = 0; k < grid.num_bs; ++k) {
    for (int n = 0; n < grid.num_slices; ++n) {
      const auto seed = derive_seed(cfg.seed, {kStreamSplit, static_cast<std::uint64_t>(k),
                                               static_cast<std::uint64_t>(n)});
      splits[k * grid.num_slices + n] = stratified_split(grid.at(k, n), cfg.test_fraction, seed);
    }
  }
  return splits;
}

namespace {

struct ClientMetrics {
  double loss = 0.0;  // training objective: BCE + the variant's divergence term
  double recall_train = 0.0;
  double recall_test = std::numeric_limits<double>::quiet_NaN();
  double js = 0.0;
  double comprehensiveness = 0.0;
  double tv = 0.0;
};

ClientMetrics evaluate_client(const Model& global, const SplitDataset& split,
                              const LocalTrainConfig& lcfg, int ig_steps) {
  ClientMetrics m;
  Objective bce_only;
  const double bce = objective_value(global, bce_only, split.train);
  const std::vector<double> p_train = global.forward_batch(split.train.features);
  m.recall_train = recall(split.train.labels, p_train, lcfg.threshold);
  const LocalDataset& probe = split.test.size() > 0 ? split.test : split.train;
  if (split.test.size() > 0 && split.test.positives() > 0) {
    const std::vector<double> p_test = global.forward_batch(split.test.features);
    m.recall_test = recall(split.test.labels, p_test, lcfg.threshold);
  }
  const AttributionMatrix attr = attribution_matrix(global, probe.features, ig_steps);
  const MaskPlan plan = select_mask(attr, 1);
  const Matrix masked = apply_mask(probe.features, plan);
  const std::vector<double> p_hat = global.forward_batch(probe.features);
  const std::vector<double> p_masked = global.forward_batch(masked);
  m.js = js_divergence(p_hat, p_masked);
  m.comprehensiveness = comprehensiveness(p_hat, p_masked);
  m.tv = mean_total_variation(p_hat, p_masked);
  double divergence_term = 0.0;
  if (lcfg.divergence == DivergenceKind::JS) {
    divergence_term = lcfg.divergence_coeff * m.js;
  } else if (lcfg.divergence == DivergenceKind::KL) {
    divergence_term = lcfg.divergence_coeff * kl_divergence(p_hat, p_masked);
  }
  m.loss = bce + divergence_term;
  return m;
}

}  // namespace

RoundOutput run_round(const std::vector<Model>& globals, const DatasetGrid& grid,
                      const std::vector<SplitDataset>& splits, const ExperimentConfig& cfg,
                      Variant variant, int round) {
  const int k_count = grid.num_bs;
  const int n_count = grid.num_slices;
  const int clients = k_count * n_count;
  if (static_cast<int>(globals.size()) != n_count) {
    throw ShapeError("run_round: one global model per slice required");
  }

  std::vector<std::optional<LocalTrainResult>> results(clients);
  parallel_for(clients, cfg.threads, [&](int idx) {
    const int k = idx / n_count;
    const int n = idx % n_count;
    const std::string tag =
        "client (" + std::to_string(k) + "," + std::to_string(n) + "): ";
    try {
      results[idx] = local_train(globals[n], grid.at(k, n), cfg.local_config(variant, n, k));
    } catch (const OracleDivergenceError& e) {
      throw OracleDivergenceError(tag + e.what());
    } catch (const NumericError& e) {
      throw NumericError(tag + e.what());
    } catch (const UndefinedRecallError& e) {
      throw UndefinedRecallError(tag + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(tag + e.what());
    }
  });

  RoundOutput out;
  out.globals.reserve(n_count);
  RoundReport& report = out.report;
  report.round = round;
  report.agg_weights.resize(n_count);
  for (int n = 0; n < n_count; ++n) {
    std::vector<Model> locals;
    std::vector<std::size_t> sizes;
    locals.reserve(k_count);
    sizes.reserve(k_count);
    for (int k = 0; k < k_count; ++k) {
      locals.push_back(results[k * n_count + n]->model);
      sizes.push_back(grid.at(k, n).size());
    }
    out.globals.push_back(aggregate(locals, sizes));
    double total = 0.0;
    for (std::size_t s : sizes) total += static_cast<double>(s);
    for (std::size_t s : sizes) {
      report.agg_weights[n].push_back(static_cast<double>(s) / total);
    }
  }

  std::vector<ClientMetrics> metrics(clients);
  parallel_for(clients, cfg.threads, [&](int idx) {
    const int k = idx / n_count;
    const int n = idx % n_count;
    metrics[idx] =
        evaluate_client(out.globals[n], splits[idx], cfg.local_config(variant, n, k), cfg.ig_steps);
  });

  for (int n = 0; n < n_count; ++n) {
    std::vector<double> loss, rt, rte, js, comp, tv;
    for (int k = 0; k < k_count; ++k) {
      const ClientMetrics& m = metrics[k * n_count + n];
      loss.push_back(m.loss);
      rt.push_back(m.recall_train);
      rte.push_back(m.recall_test);
      js.push_back(m.js);
      comp.push_back(m.comprehensiveness);
      tv.push_back(m.tv);
    }
    report.loss.push_back(mean(loss));
    report.recall_train.push_back(mean(rt));
    report.recall_test.push_back(mean_defined(rte));
    report.js.push_back(mean(js));
    report.comprehensiveness.push_back(mean(comp));
    report.tv.push_back(mean(tv));
  }
  report.norm_loss.assign(n_count, 0.0);  // filled by run_variant

  out.logs.reserve(clients);
  for (int k = 0; k < k_count; ++k) {
    for (int n = 0; n < n_count; ++n) {
      out.logs.push_back(
          ClientRoundLog{round, k, n, std::move(results[k * n_count + n]->log)});
    }
  }
  return out;
}

VariantRun run_variant(const DatasetGrid& grid, const std::vector<SplitDataset>& splits,
                       const ExperimentConfig& cfg, Variant variant) {
  VariantRun run;
  run.variant = variant;
  run.client_sizes.assign(grid.num_slices, std::vector<double>(grid.num_bs, 0.0));
  for (int n = 0; n < grid.num_slices; ++n) {
    for (int k = 0; k < grid.num_bs; ++k) {
      run.client_sizes[n][k] = static_cast<double>(grid.at(k, n).size());
    }
  }

  std::vector<Model> globals;
  globals.reserve(grid.num_slices);
  for (int n = 0; n < grid.num_slices; ++n) {
    globals.emplace_back(cfg.layer_dims(),
                         derive_seed(cfg.seed, {kStreamInit, static_cast<std::uint64_t>(n)}),
                         OutputActivation::Logistic, cfg.mu);
  }

  for (int t = 0; t < cfg.rounds; ++t) {
    RoundOutput out = run_round(globals, grid, splits, cfg, variant, t);
    globals = std::move(out.globals);
    run.rounds.push_back(std::move(out.report));
    run.snapshots.push_back(globals);
    for (auto& log : out.logs) run.logs.push_back(std::move(log));
  }

  double denom = 0.0;
  for (double l : run.rounds.front().loss) denom = std::max(denom, l);
  if (!(denom > 0.0)) denom = 1.0;
  for (auto& report : run.rounds) {
    for (int n = 0; n < grid.num_slices; ++n) report.norm_loss[n] = report.loss[n] / denom;
  }
  run.final_models = globals;
  return run;
}

RunObservations VariantRun::observations(const ExperimentConfig& cfg,
                                         double delta_estimate) const {
  RunObservations obs;
  obs.rounds = static_cast<int>(rounds.size());
  obs.r_lambda = cfg.r_lambda;
  obs.delta = delta_estimate;
  const int n_count = cfg.num_slices;
  obs.phi.assign(n_count, {});
  obs.final_tv.assign(n_count, 0.0);
  obs.b.assign(n_count, {});
  obs.d_sizes = client_sizes;
  for (int n = 0; n < n_count; ++n) {
    for (const auto& report : rounds) {
      obs.phi[n].push_back(cfg.gamma[n] - report.recall_train[n]);
    }
    obs.final_tv[n] = rounds.back().tv[n];
    obs.b[n].assign(cfg.num_bs, 0.0);
  }
  for (const auto& entry : logs) {
    double& b = obs.b[entry.slice][entry.bs];
    b = std::max(b, entry.log.b_max);
  }
  return obs;
}

double oracle_delta_estimate(int steps, double lr) {
  // Canonical convex instance: a [1,1] logistic model on 1-D separable
  // data (margin 0.5), measured against a dense (w, b) grid search.
  LocalDataset data;
  const int n = 200;
  for (int i = 0; i < n / 2; ++i) {
    const double m = 0.5 + i / (n / 2 - 1.0);
    data.features.push_back({m});
    data.labels.push_back(1);
    data.features.push_back({-m});
    data.labels.push_back(0);
  }
  Model start = Model::zeros({1, 1});
  Objective bce_only;
  const OracleResult res = oracle_minimize(start, bce_only, data, steps, lr);

  auto grid_bce = [&](double w, double b) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(w * data.features[i][0] + b)));
      s += bce_loss(data.labels[i], p);
    }
    return s / n;
  };
  double best = std::numeric_limits<double>::infinity();
  for (int wi = 0; wi <= 320; ++wi) {
    const double w = -8.0 + wi * 0.05;
    for (int bi = 0; bi <= 320; ++bi) {
      best = std::min(best, grid_bce(w, -8.0 + bi * 0.05));
    }
  }
  return std::max(0.0, res.final_value - best);
}

namespace {

std::string round_reports_csv(const VariantRun& run) {
  std::ostringstream os;
  os << "round,slice,loss,norm_loss,recall_train,recall_test,js,comprehensiveness,tv\n";
  for (const auto& r : run.rounds) {
    for (std::size_t n = 0; n < r.loss.size(); ++n) {
      os << r.round << ',' << n << ',' << format_double(r.loss[n]) << ','
         << format_double(r.norm_loss[n]) << ',' << format_double(r.recall_train[n]) << ','
         << format_double(r.recall_test[n]) << ',' << format_double(r.js[n]) << ','
         << format_double(r.comprehensiveness[n]) << ',' << format_double(r.tv[n]) << '\n';
    }
  }
  return os.str();
}

std::string trainlogs_jsonl(const VariantRun& run) {
  std::ostringstream os;
  for (const auto& entry : run.logs) {
    for (const auto& e : entry.log.epochs) {
      nlohmann::ordered_json j;
      j["round"] = entry.round;
      j["k"] = entry.bs;
      j["n"] = entry.slice;
      j["epoch"] = e.epoch;
      j["loss"] = e.loss;
      j["js"] = e.js;
      j["recall"] = e.recall;
      j["psi"] = e.psi;
      j["phi"] = e.phi;
      j["lambda0"] = e.lambda0;
      j["lambda1"] = e.lambda1;
      j["grad_norm_max"] = e.grad_norm_max;
      os << j.dump() << '\n';
    }
  }
  return os.str();
}

std::string metrics_json(const VariantRun& run, const ExperimentConfig& cfg,
                         double delta_estimate) {
  nlohmann::ordered_json j;
  j["variant"] = to_string(run.variant);
  j["delta_estimate"] = delta_estimate;
  const RoundReport& last = run.rounds.back();
  nlohmann::ordered_json final;
  final["loss"] = last.loss;
  final["norm_loss"] = last.norm_loss;
  final["recall_train"] = last.recall_train;
  final["recall_test"] = last.recall_test;
  final["js"] = last.js;
  final["comprehensiveness"] = last.comprehensiveness;
  final["tv"] = last.tv;
  j["final"] = final;
  std::vector<double> auc(cfg.num_slices, 0.0);
  for (const auto& r : run.rounds) {
    for (int n = 0; n < cfg.num_slices; ++n) auc[n] += r.norm_loss[n];
  }
  for (double& a : auc) a /= static_cast<double>(run.rounds.size());
  j["auc_norm_loss"] = auc;
  j["agg_weights"] = run.rounds.front().agg_weights;
  RunObservations obs = run.observations(cfg, delta_estimate);
  j["b_max"] = obs.b;
  return j.dump(2) + "\n";
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetGrid& grid) {
  cfg.validate();
  if (grid.num_bs != cfg.num_bs || grid.num_slices != cfg.num_slices) {
    throw ValidationError("config: K/N do not match the dataset grid (" +
                          std::to_string(grid.num_bs) + "x" + std::to_string(grid.num_slices) +
                          ")");
  }
  for (const auto& client : grid.clients) {
    if (static_cast<int>(client.size()) != cfg.dataset_size) {
      throw ValidationError("config: D does not match the dataset grid");
    }
  }
  ExperimentResult result;
  result.delta_estimate = oracle_delta_estimate(cfg.oracle_steps, cfg.oracle_lr);
  const std::vector<SplitDataset> splits = make_splits(grid, cfg);
  for (Variant v : cfg.variants) {
    result.runs.push_back(run_variant(grid, splits, cfg, v));
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetGrid& grid,
                                const std::filesystem::path& out_dir,
                                const std::string& data_dir_label) {
  ExperimentResult result = run_experiment(cfg, grid);

  std::map<std::string, std::string> hashes;
  auto emit = [&](const std::filesystem::path& rel, const std::string& content) {
    const auto path = out_dir / rel;
    std::filesystem::create_directories(path.parent_path());
    write_file(path, content);
    hashes[rel.generic_string()] = fnv1a_hex(content);
  };

  for (const VariantRun& run : result.runs) {
    const std::filesystem::path base = to_string(run.variant);
    emit(base / "round_reports.csv", round_reports_csv(run));
    emit(base / "trainlogs.jsonl", trainlogs_jsonl(run));
    emit(base / "metrics.json", metrics_json(run, cfg, result.delta_estimate));
    for (std::size_t t = 0; t < run.snapshots.size(); ++t) {
      for (std::size_t n = 0; n < run.snapshots[t].size(); ++n) {
        char name[48];
        std::snprintf(name, sizeof(name), "round%03zu_slice%zu.json", t, n);
        emit(base / "models" / name, run.snapshots[t][n].to_json() + "\n");
      }
    }
    for (std::size_t n = 0; n < run.final_models.size(); ++n) {
      emit(base / "models" / ("final_slice" + std::to_string(n) + ".json"),
           run.final_models[n].to_json() + "\n");
    }
  }

  nlohmann::ordered_json manifest;
  manifest["kind"] = "egfl-run";
  manifest["seed"] = cfg.seed;
  manifest["data_dir"] = data_dir_label;
  nlohmann::ordered_json config_echo;
  for (const auto& [key, value] : cfg.to_key_values()) config_echo[key] = value;
  manifest["config"] = config_echo;
  nlohmann::ordered_json sizes = nlohmann::ordered_json::array();
  for (int n = 0; n < grid.num_slices; ++n) {
    std::vector<double> row(grid.num_bs);
    for (int k = 0; k < grid.num_bs; ++k) row[k] = static_cast<double>(grid.at(k, n).size());
    sizes.push_back(row);
  }
  manifest["dataset_sizes"] = sizes;
  manifest["delta_estimate"] = result.delta_estimate;
  nlohmann::ordered_json files;
  for (const auto& [rel, hash] : hashes) files[rel] = hash;
  manifest["files"] = files;
  std::filesystem::create_directories(out_dir);
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

}  // namespace egfl
