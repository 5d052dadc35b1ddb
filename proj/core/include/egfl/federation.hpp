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

#ifndef EGFL_FEDERATION_HPP_
#define EGFL_FEDERATION_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egfl/datagen.hpp"
#include "egfl/fairness.hpp"
#include "egfl/theory.hpp"

namespace egfl {

// The experiment grid of the comparison figures. Divergence kind and
// multiplier radius per variant:
//   EGFL-JS            JS,   R_lambda
//   EGFL-KL            KL,   R_lambda
//   EGFL-unconstrained JS,   0
//   FL-constrained     NONE, R_lambda
//   FL-vanilla         NONE, 0   (post-hoc attribution pass only)
enum class Variant { EgflJs, EgflKl, EgflUnconstrained, FlConstrained, FlVanilla };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct ExperimentConfig {
  int num_bs = 10;      // K
  int num_slices = 3;   // N
  int rounds = 15;      // T
  int local_epochs = 10;  // L
  int dataset_size = 500;  // D per client
  std::vector<double> gamma = {0.82, 0.85, 0.84};  // recall lower bound per slice
  double eta_lambda = 0.12;
  double r_lambda = 1e-5;
  double divergence_coeff = 1.0;
  int oracle_steps = 10;
  double oracle_lr = 0.12;
  int ig_steps = kIgStepsTraining;
  int ig_steps_report = kIgStepsReport;
  double threshold = 0.5;
  double test_fraction = 0.2;
  std::vector<int> hidden_dims = {16, 8};
  double mu = 1.0;
  std::uint64_t seed = 1;
  std::vector<Variant> variants = {Variant::EgflJs, Variant::EgflKl,
                                   Variant::EgflUnconstrained, Variant::FlConstrained,
                                   Variant::FlVanilla};
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;

  // Flat key=value text with the canonical parameter names (K, N, D, T, L,
  // R_lambda, eta_lambda, gamma, ...). Unknown keys are rejected.
  static ExperimentConfig from_key_values(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_key_values() const;

  std::vector<int> layer_dims() const;
  LocalTrainConfig local_config(Variant variant, int slice, int bs) const;
};

// Dataset-size weighted parameter mean (weights D_k / sum D).
Model aggregate(const std::vector<Model>& models, const std::vector<std::size_t>& sizes);

struct RoundReport {
  int round = 0;
  // All per slice:
  // loss: mean client training objective of the new global model (train-split
  // BCE plus the variant's divergence term on the masked probe pair).
  std::vector<double> loss;
  std::vector<double> norm_loss;  // loss / max slice loss of round 0
  std::vector<double> recall_train;
  std::vector<double> recall_test;  // NaN when a test split has no positives
  std::vector<double> js;
  std::vector<double> comprehensiveness;
  std::vector<double> tv;
  std::vector<std::vector<double>> agg_weights;  // [slice][client]
};

struct ClientRoundLog {
  int round = 0;
  int bs = 0;
  int slice = 0;
  TrainLog log;
};

struct VariantRun {
  Variant variant = Variant::EgflJs;
  std::vector<RoundReport> rounds;
  std::vector<std::vector<Model>> snapshots;  // [round][slice] global models
  std::vector<Model> final_models;            // per slice
  std::vector<ClientRoundLog> logs;           // ordered by (round, k, n)
  std::vector<std::vector<double>> client_sizes;  // [slice][client]

  RunObservations observations(const ExperimentConfig& cfg, double delta_estimate) const;
};

// One synchronous full-participation round: broadcast, parallel local
// training, per-slice aggregation, metrics pass with the new globals.
struct RoundOutput {
  std::vector<Model> globals;
  RoundReport report;
  std::vector<ClientRoundLog> logs;
};
RoundOutput run_round(const std::vector<Model>& globals, const DatasetGrid& grid,
                      const std::vector<SplitDataset>& splits, const ExperimentConfig& cfg,
                      Variant variant, int round);

VariantRun run_variant(const DatasetGrid& grid, const std::vector<SplitDataset>& splits,
                       const ExperimentConfig& cfg, Variant variant);

// Per-client train/test splits, fixed for a whole run; index k * N + n.
std::vector<SplitDataset> make_splits(const DatasetGrid& grid, const ExperimentConfig& cfg);

// Measured oracle suboptimality on a canonical convex instance (gradient
// descent vs dense grid search); recorded in run metrics.
double oracle_delta_estimate(int steps, double lr);

struct ExperimentResult {
  std::vector<VariantRun> runs;
  double delta_estimate = 0.0;
};

// Runs every requested variant on the identical datasets and writes the
// full artifact tree (round_reports.csv, trainlogs.jsonl, model snapshots,
// metrics.json per variant, manifest.json at the root) under out_dir.
// data_dir_label is echoed into the manifest verbatim.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetGrid& grid,
                                const std::filesystem::path& out_dir,
                                const std::string& data_dir_label);

// In-memory variant of run_experiment (no artifacts).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const DatasetGrid& grid);

}  // namespace egfl

#endif  // EGFL_FEDERATION_HPP_
