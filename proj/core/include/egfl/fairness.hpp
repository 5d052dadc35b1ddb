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

#ifndef EGFL_FAIRNESS_HPP_
#define EGFL_FAIRNESS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "egfl/egl.hpp"
#include "egfl/model.hpp"

namespace egfl {

// TP / (TP + FN) with prediction = 1 iff prob >= threshold. Throws
// UndefinedRecallError when no positive labels exist.
double recall(std::span<const int> labels, std::span<const double> probs, double threshold = 0.5);

struct SurrogateResult {
  double value = 0.0;      // s = sum_i y_i min(p_i, 1) / sum_i y_i
  double violation = 0.0;  // psi = gamma - s; positive <=> violated
};

// Smooth recall surrogate used by the weight player.
SurrogateResult recall_surrogate(std::span<const int> labels, std::span<const double> probs,
                                 double gamma);

// Original (non-smooth) violation phi = gamma - recall; feeds the
// multiplier player.
double constraint_violation(std::span<const int> labels, std::span<const double> probs,
                            double gamma, double threshold = 0.5);

// Proxy-Lagrangian matrix game state: A is (M+1)x(M+1) column-stochastic,
// lambda its stationary distribution. Row 0 weighs the objective, rows
// m >= 1 the constraints.
struct GameState {
  Matrix A;
  std::vector<double> lambda;
  double r_lambda = 0.0;
  double eta_lambda = 0.0;
  int num_constraints = 1;

  static GameState init(int num_constraints, double r_lambda, double eta_lambda);
};

// Stationary distribution of a column-stochastic nonnegative matrix: power
// iteration from the uniform vector, stopping below 1e-12 max-norm change
// or after 1e4 iterations.
std::vector<double> lambda_from_matrix(const Matrix& A);

// Exponentiated ascent step: row m of A scales by exp(eta * grad_lambda[m])
// (callers pass 0 for the objective row), then columns are renormalized.
Matrix update_matrix(const Matrix& A, std::span<const double> grad_lambda, double eta);

// One epoch entry of a client's training log. grad_norm_max is the running
// maximum of gradient norms, so it never decreases within a run.
struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // composite objective after the oracle step
  double js = 0.0;    // divergence between original and masked predictions
  double recall = 0.0;
  double psi = 0.0;  // surrogate violation gamma - s
  double phi = 0.0;  // original violation gamma - recall
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double grad_norm_max = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  double b_max = 0.0;                // max gradient norm over the run
  double oracle_monotone_min = 1.0;  // worst oracle monotone fraction seen
  double mean_tv = 0.0;              // |p_hat - p_masked| at the last epoch

  // One JSON object per epoch: {epoch, loss, js, recall, psi, phi,
  // lambda0, lambda1, grad_norm_max}.
  std::string to_jsonl() const;
};

struct LocalTrainConfig {
  int epochs = 1;  // L
  double gamma = 0.85;
  double eta_lambda = 0.12;
  double r_lambda = 1e-5;
  DivergenceKind divergence = DivergenceKind::JS;
  double divergence_coeff = 1.0;
  int oracle_steps = 10;
  double oracle_lr = 0.12;
  int ig_steps = kIgStepsTraining;
  double threshold = 0.5;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 0;
};

struct LocalTrainResult {
  Model model;  // average of the L epoch-end iterates
  TrainLog log;
};

// Train/test row split that keeps both classes on the training side.
struct SplitDataset {
  LocalDataset train;
  LocalDataset test;
};

SplitDataset stratified_split(const LocalDataset& data, double test_fraction,
                              std::uint64_t seed);

// The full per-client epoch loop: attribution, masking, divergence-guided
// constrained minimization, multiplier ascent. Returns the average of the
// epoch-end weight iterates plus the log.
LocalTrainResult local_train(const Model& start, const LocalDataset& data,
                             const LocalTrainConfig& cfg);

}  // namespace egfl

#endif  // EGFL_FAIRNESS_HPP_
