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

#include "egfl/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "egfl/rng.hpp"

namespace egfl {

namespace {

void check_labels_probs(std::span<const int> labels, std::span<const double> probs,
                        const char* who) {
  if (labels.size() != probs.size()) {
    throw ShapeError(std::string(who) + ": label/prob length mismatch");
  }
  if (labels.empty()) throw ShapeError(std::string(who) + ": empty inputs");
}

std::size_t count_positives(std::span<const int> labels, const char* who) {
  std::size_t pos = 0;
  for (int y : labels) pos += (y == 1);
  if (pos == 0) throw UndefinedRecallError(std::string(who) + ": no positive labels");
  return pos;
}

void check_column_stochastic(const Matrix& A) {
  const std::size_t n = A.size();
  if (n == 0) throw ShapeError("matrix game: empty matrix");
  for (const auto& row : A) {
    if (row.size() != n) throw ShapeError("matrix game: matrix not square");
  }
  for (std::size_t c = 0; c < n; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (A[r][c] < 0.0) throw ValidationError("matrix game: negative entry");
      sum += A[r][c];
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("matrix game: column " + std::to_string(c) + " sums to " +
                            std::to_string(sum));
    }
  }
}

}  // namespace

double recall(std::span<const int> labels, std::span<const double> probs, double threshold) {
  check_labels_probs(labels, probs, "recall");
  const std::size_t pos = count_positives(labels, "recall");
  std::size_t tp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1 && probs[i] >= threshold) ++tp;
  }
  return static_cast<double>(tp) / static_cast<double>(pos);
}

SurrogateResult recall_surrogate(std::span<const int> labels, std::span<const double> probs,
                                 double gamma) {
  check_labels_probs(labels, probs, "recall_surrogate");
  const std::size_t pos = count_positives(labels, "recall_surrogate");
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) s += std::min(probs[i], 1.0);
  }
  s /= static_cast<double>(pos);
  return SurrogateResult{s, gamma - s};
}

double constraint_violation(std::span<const int> labels, std::span<const double> probs,
                            double gamma, double threshold) {
  return gamma - recall(labels, probs, threshold);
}

GameState GameState::init(int num_constraints, double r_lambda, double eta_lambda) {
  if (num_constraints < 1) throw ValidationError("game: need at least one constraint");
  GameState g;
  g.num_constraints = num_constraints;
  g.r_lambda = r_lambda;
  g.eta_lambda = eta_lambda;
  const int n = num_constraints + 1;
  g.A.assign(n, std::vector<double>(n, 1.0 / n));
  g.lambda = lambda_from_matrix(g.A);
  return g;
}

std::vector<double> lambda_from_matrix(const Matrix& A) {
  check_column_stochastic(A);
  const std::size_t n = A.size();
  std::vector<double> v(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  for (int it = 0; it < 10000; ++it) {
    for (std::size_t r = 0; r < n; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < n; ++c) s += A[r][c] * v[c];
      next[r] = s;
    }
    double total = 0.0;
    for (double x : next) total += x;
    double diff = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      next[r] /= total;
      diff = std::max(diff, std::abs(next[r] - v[r]));
    }
    v.swap(next);
    if (diff < 1e-12) break;
  }
  return v;
}

Matrix update_matrix(const Matrix& A, std::span<const double> grad_lambda, double eta) {
  check_column_stochastic(A);
  if (grad_lambda.size() != A.size()) {
    throw ShapeError("update_matrix: gradient length does not match matrix");
  }
  if (!(eta > 0.0)) throw ValidationError("update_matrix: eta must be > 0");
  const std::size_t n = A.size();
  Matrix out = A;
  for (std::size_t r = 0; r < n; ++r) {
    const double factor = std::exp(eta * grad_lambda[r]);
    if (!std::isfinite(factor)) throw NumericError("update_matrix: non-finite scale factor");
    for (std::size_t c = 0; c < n; ++c) out[r][c] *= factor;
  }
  for (std::size_t c = 0; c < n; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) sum += out[r][c];
    if (!(sum > 0.0) || !std::isfinite(sum)) {
      throw NumericError("update_matrix: degenerate column sum");
    }
    for (std::size_t r = 0; r < n; ++r) out[r][c] /= sum;
  }
  return out;
}

SplitDataset stratified_split(const LocalDataset& data, double test_fraction,
                              std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ValidationError("split: test_fraction outside [0,1)");
  }
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    (data.labels[i] == 1 ? pos : neg).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  // Keep at least one sample of each present class on the training side.
  auto test_count = [&](std::size_t n) -> std::size_t {
    if (n == 0) return 0;
    const auto want = static_cast<std::size_t>(std::llround(test_fraction * n));
    return std::min(want, n - 1);
  };
  const std::size_t tp = test_count(pos.size());
  const std::size_t tn = test_count(neg.size());

  SplitDataset out;
  auto emit = [&](const std::vector<std::size_t>& idx, std::size_t take_test) {
    for (std::size_t i = 0; i < idx.size(); ++i) {
      LocalDataset& dst = i < take_test ? out.test : out.train;
      dst.features.push_back(data.features[idx[i]]);
      dst.labels.push_back(data.labels[idx[i]]);
    }
  };
  emit(pos, tp);
  emit(neg, tn);
  return out;
}

std::string TrainLog::to_jsonl() const {
  std::ostringstream os;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j;
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
  return os.str();
}

LocalTrainResult local_train(const Model& start, const LocalDataset& data,
                             const LocalTrainConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("local_train: epochs must be >= 1");
  if (!(cfg.r_lambda >= 0.0)) throw ValidationError("local_train: r_lambda must be >= 0");

  SplitDataset split = stratified_split(data, cfg.test_fraction, cfg.split_seed);
  count_positives(split.train.labels, "local_train");
  // Degenerate splits fall back to explaining the training rows so the
  // tester path always has samples.
  const LocalDataset& probe = split.test.size() > 0 ? split.test : split.train;

  GameState game = GameState::init(1, cfg.r_lambda, cfg.eta_lambda);
  Model w = start;
  Model w_sum = Model::zeros(start.layer_dims(), start.output_activation(), start.mu());

  LocalTrainResult result{w, {}};
  TrainLog& log = result.log;
  log.epochs.reserve(cfg.epochs);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Tester / explainer path: attributions of the current model, one
    // lowest-|attribution| feature masked per sample, frozen for the epoch.
    const AttributionMatrix attr = attribution_matrix(w, probe.features, cfg.ig_steps);
    const MaskPlan plan = select_mask(attr, 1);
    const Matrix masked = apply_mask(probe.features, plan);

    game.lambda = lambda_from_matrix(game.A);
    const double mass = game.lambda[0] + game.lambda[1];
    const double lambda_eff = mass > 0.0 ? cfg.r_lambda * game.lambda[1] / mass : 0.0;

    Objective objective;
    objective.bce_coeff = 1.0;
    objective.gamma = cfg.gamma;
    objective.surrogate_coeff = lambda_eff;
    objective.divergence_kind = cfg.divergence;
    if (cfg.divergence != DivergenceKind::None && cfg.divergence_coeff != 0.0) {
      objective.divergence_coeff = cfg.divergence_coeff;
      objective.divergence_inputs = probe.features;
      objective.divergence_inputs_masked = masked;
    }

    OracleResult oracle = oracle_minimize(w, objective, split.train, cfg.oracle_steps,
                                          cfg.oracle_lr);
    w = std::move(oracle.model);
    for (std::size_t l = 0; l < w.num_layers(); ++l) {
      auto& sw = w_sum.weight(l);
      const auto& ww = w.weight(l);
      for (std::size_t i = 0; i < sw.size(); ++i) sw[i] += ww[i];
      auto& sb = w_sum.bias(l);
      const auto& wb = w.bias(l);
      for (std::size_t i = 0; i < sb.size(); ++i) sb[i] += wb[i];
    }

    // Post-oracle diagnostics on the epoch's frozen masks.
    const std::vector<double> p_train = w.forward_batch(split.train.features);
    const double rec = recall(split.train.labels, p_train, cfg.threshold);
    const SurrogateResult surr = recall_surrogate(split.train.labels, p_train, cfg.gamma);
    const double phi = cfg.gamma - rec;

    const std::vector<double> p_probe = w.forward_batch(probe.features);
    const std::vector<double> p_masked = w.forward_batch(masked);
    const double js = js_divergence(p_probe, p_masked);
    log.mean_tv = mean_total_variation(p_probe, p_masked);

    log.b_max = std::max(log.b_max, oracle.max_grad_norm);
    log.oracle_monotone_min = std::min(log.oracle_monotone_min, oracle.monotone_fraction);

    EpochRecord rec_entry;
    rec_entry.epoch = epoch;
    rec_entry.loss = oracle.final_value;
    rec_entry.js = js;
    rec_entry.recall = rec;
    rec_entry.psi = surr.violation;
    rec_entry.phi = phi;
    rec_entry.lambda0 = game.lambda[0];
    rec_entry.lambda1 = game.lambda[1];
    rec_entry.grad_norm_max = log.b_max;
    log.epochs.push_back(rec_entry);

    const std::vector<double> grad_lambda = {0.0, phi};
    game.A = update_matrix(game.A, grad_lambda, cfg.eta_lambda);
  }

  const double inv_l = 1.0 / static_cast<double>(cfg.epochs);
  for (std::size_t l = 0; l < w_sum.num_layers(); ++l) {
    for (double& v : w_sum.weight(l)) v *= inv_l;
    for (double& v : w_sum.bias(l)) v *= inv_l;
  }
  result.model = std::move(w_sum);
  return result;
}

}  // namespace egfl
