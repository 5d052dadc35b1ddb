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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <sstream>

#include "egfl/fairness.hpp"
#include "egfl/rng.hpp"
#include "test_support.hpp"

using namespace egfl;

namespace {

// Imbalanced, learnable synthetic client data-set (about 15% positives).
LocalDataset imbalanced_dataset(std::uint64_t seed, int rows) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> feat(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.35);
  LocalDataset data;
  data.features.assign(rows, std::vector<double>(3));
  data.labels.assign(rows, 0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < 3; ++j) data.features[i][j] = feat(rng);
    const double score =
        1.4 * data.features[i][0] - 1.0 * data.features[i][2] + noise(rng);
    data.labels[i] = score > 1.45 ? 1 : 0;
  }
  data.labels[0] = 1;
  data.labels[1] = 0;
  return data;
}

}  // namespace

TEST_CASE("recall: confusion-matrix anchors") {
  const std::vector<int> y = {1, 1, 0, 1};
  const std::vector<double> p = {0.9, 0.2, 0.1, 0.8};
  CHECK(recall(y, p) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(recall(y, std::vector<double>{1.0, 1.0, 0.0, 0.9}) == 1.0);
  CHECK(recall(y, std::vector<double>{0.1, 0.2, 0.1, 0.3}) == 0.0);
  CHECK_THROWS_AS((void)recall(std::vector<int>{0, 0}, std::vector<double>{0.4, 0.6}),
                  UndefinedRecallError);
  CHECK_THROWS_AS((void)recall(std::vector<int>{1}, std::vector<double>{0.4, 0.6}), ShapeError);
}

TEST_CASE("recall threshold boundary counts p == threshold as positive") {
  CHECK(recall(std::vector<int>{1}, std::vector<double>{0.5}, 0.5) == 1.0);
}

TEST_CASE("recall_surrogate anchors") {
  const std::vector<int> y = {1, 1, 0};
  const SurrogateResult r = recall_surrogate(y, std::vector<double>{0.9, 0.4, 0.8}, 0.85);
  CHECK(r.value == doctest::Approx(0.65).epsilon(1e-12));
  CHECK(r.violation == doctest::Approx(0.20).epsilon(1e-12));

  const SurrogateResult ceiling =
      recall_surrogate(std::vector<int>{1, 1}, std::vector<double>{1.0, 1.0}, 0.85);
  CHECK(ceiling.value == 1.0);
  CHECK(ceiling.violation == doctest::Approx(-0.15).epsilon(1e-12));

  const SurrogateResult boundary =
      recall_surrogate(std::vector<int>{1}, std::vector<double>{0.7}, 0.7);
  CHECK(boundary.violation == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("recall_surrogate: s <= 1 and equals recall on binary predictions") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> y(20);
    std::vector<double> p(20), binary(20);
    for (int i = 0; i < 20; ++i) {
      y[i] = u(rng) < 0.4 ? 1 : 0;
      p[i] = u(rng);
      binary[i] = u(rng) < 0.5 ? 0.0 : 1.0;
    }
    y[0] = 1;
    CHECK(recall_surrogate(y, p, 0.8).value <= 1.0);
    CHECK(recall_surrogate(y, binary, 0.8).value ==
          doctest::Approx(recall(y, binary, 0.5)).epsilon(1e-12));
  }
}

TEST_CASE("constraint_violation anchors") {
  const std::vector<int> y = {1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1};
  std::vector<double> p(11, 1.0);
  p[1] = 0.0;  // 9/10 recall
  CHECK(constraint_violation(y, p, 0.85) == doctest::Approx(-0.05).epsilon(1e-12));
  std::fill(p.begin(), p.end(), 0.0);
  for (int i = 0; i < 11; ++i) p[i] = (i % 2 == 0) ? 1.0 : 0.0;  // 5/10
  CHECK(constraint_violation(y, p, 0.85) == doctest::Approx(0.35).epsilon(1e-12));
}

TEST_CASE("lambda_from_matrix fixed points") {
  CHECK(lambda_from_matrix({{0.5, 0.5}, {0.5, 0.5}}) == std::vector<double>{0.5, 0.5});

  const std::vector<double> v =
      lambda_from_matrix({{0.25, 1.0 / 3.0}, {0.75, 2.0 / 3.0}});
  CHECK(v[0] == doctest::Approx(4.0 / 13.0).epsilon(1e-9));
  CHECK(v[1] == doctest::Approx(9.0 / 13.0).epsilon(1e-9));
  CHECK(v[0] + v[1] == doctest::Approx(1.0).epsilon(1e-12));

  // Degenerate eigenspace: the uniform start is already stationary.
  CHECK(lambda_from_matrix({{1.0, 0.0}, {0.0, 1.0}}) == std::vector<double>{0.5, 0.5});

  CHECK_THROWS_AS((void)lambda_from_matrix({{0.5, 0.7}, {0.5, 0.5}}), ValidationError);
  CHECK_THROWS_AS((void)lambda_from_matrix({{1.5, 0.5}, {-0.5, 0.5}}), ValidationError);
}

TEST_CASE("update_matrix: identity update leaves A unchanged") {
  const Matrix a = {{0.5, 0.5}, {0.5, 0.5}};
  CHECK(update_matrix(a, std::vector<double>{0.0, 0.0}, 0.12) == a);
}

TEST_CASE("update_matrix: positive violation grows the constraint row in every column") {
  const Matrix a = {{0.5, 0.5}, {0.5, 0.5}};
  const Matrix after = update_matrix(a, std::vector<double>{0.0, 0.3}, 0.12);
  for (int c = 0; c < 2; ++c) {
    CHECK(after[1][c] > a[1][c]);
    CHECK(after[0][c] + after[1][c] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("update_matrix: columns stay stochastic under random updates") {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_real_distribution<double> phi(-2.0, 2.0);
  Matrix a = {{0.5, 0.5}, {0.5, 0.5}};
  for (int step = 0; step < 500; ++step) {
    a = update_matrix(a, std::vector<double>{0.0, phi(rng)}, 0.12);
    for (int c = 0; c < 2; ++c) {
      double sum = 0.0;
      for (int r = 0; r < 2; ++r) {
        CHECK(a[r][c] >= 0.0);
        sum += a[r][c];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    const std::vector<double> lambda = lambda_from_matrix(a);
    CHECK(lambda[0] + lambda[1] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(lambda[0] >= 0.0);
    CHECK(lambda[1] >= 0.0);
  }
  (void)u;
}

TEST_CASE("update_matrix: satisfied constraint drains the constraint row") {
  Matrix a = {{0.4, 0.4}, {0.6, 0.6}};
  double prev_mass = a[1][0] + a[1][1];
  for (int epoch = 0; epoch < 10; ++epoch) {
    a = update_matrix(a, std::vector<double>{0.0, -0.25}, 0.12);
    const double mass = a[1][0] + a[1][1];
    CHECK(mass <= prev_mass + 1e-15);
    prev_mass = mass;
  }
}

TEST_CASE("GameState::init builds the uniform column-stochastic matrix") {
  const GameState g = GameState::init(1, 1e-5, 0.12);
  CHECK(g.A == Matrix{{0.5, 0.5}, {0.5, 0.5}});
  CHECK(g.lambda == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS((void)GameState::init(0, 1.0, 0.1), ValidationError);
}

TEST_CASE("stratified_split: deterministic, disjoint, class-preserving") {
  const LocalDataset data = imbalanced_dataset(1, 200);
  const SplitDataset a = stratified_split(data, 0.2, 99);
  const SplitDataset b = stratified_split(data, 0.2, 99);
  CHECK(a.train.features == b.train.features);
  CHECK(a.test.features == b.test.features);
  CHECK(a.train.size() + a.test.size() == data.size());
  CHECK(a.test.size() == doctest::Approx(40).epsilon(0.2));
  CHECK(a.train.positives() >= 1);
  CHECK(a.train.positives() + a.test.positives() == data.positives());

  // Multiset equality with the source rows.
  auto key = [](const std::vector<double>& row, int label) {
    std::ostringstream os;
    os << label;
    for (double v : row) os << ',' << v;
    return os.str();
  };
  std::multiset<std::string> original, split_rows;
  for (std::size_t i = 0; i < data.size(); ++i) original.insert(key(data.features[i], data.labels[i]));
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    split_rows.insert(key(a.train.features[i], a.train.labels[i]));
  }
  for (std::size_t i = 0; i < a.test.size(); ++i) {
    split_rows.insert(key(a.test.features[i], a.test.labels[i]));
  }
  CHECK(original == split_rows);
}

TEST_CASE("local_train with divergence NONE and zero radius is plain BCE descent") {
  const LocalDataset data = imbalanced_dataset(7, 240);
  const Model start({3, 16, 8, 1}, 11);

  LocalTrainConfig cfg;
  cfg.epochs = 4;
  cfg.gamma = 0.85;
  cfg.r_lambda = 0.0;
  cfg.divergence = DivergenceKind::None;
  cfg.oracle_steps = 6;
  cfg.oracle_lr = 0.12;
  cfg.ig_steps = 5;
  cfg.split_seed = derive_seed(3, {kStreamSplit, 0, 0});
  const LocalTrainResult result = local_train(start, data, cfg);

  // Independent replica: split, per-epoch BCE oracle, iterate average.
  const SplitDataset split = stratified_split(data, cfg.test_fraction, cfg.split_seed);
  Model w = start;
  Model w_sum = Model::zeros(start.layer_dims());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const OracleResult r =
        oracle_minimize(w, Objective{}, split.train, cfg.oracle_steps, cfg.oracle_lr);
    w = r.model;
    for (std::size_t l = 0; l < w.num_layers(); ++l) {
      for (std::size_t i = 0; i < w.weight(l).size(); ++i) w_sum.weight(l)[i] += w.weight(l)[i];
      for (std::size_t i = 0; i < w.bias(l).size(); ++i) w_sum.bias(l)[i] += w.bias(l)[i];
    }
  }
  for (std::size_t l = 0; l < w_sum.num_layers(); ++l) {
    for (double& v : w_sum.weight(l)) v /= cfg.epochs;
    for (double& v : w_sum.bias(l)) v /= cfg.epochs;
  }
  for (std::size_t l = 0; l < w_sum.num_layers(); ++l) {
    CHECK(result.model.weight(l) == w_sum.weight(l));  // bitwise
    CHECK(result.model.bias(l) == w_sum.bias(l));
  }
}

TEST_CASE("local_train with L=1 returns the single oracle iterate") {
  const LocalDataset data = imbalanced_dataset(13, 200);
  const Model start({3, 8, 1}, 5);

  LocalTrainConfig cfg;
  cfg.epochs = 1;
  cfg.gamma = 0.8;
  cfg.r_lambda = 0.5;
  cfg.divergence = DivergenceKind::JS;
  cfg.oracle_steps = 4;
  cfg.oracle_lr = 0.1;
  cfg.ig_steps = 8;
  cfg.split_seed = 4321;
  const LocalTrainResult result = local_train(start, data, cfg);

  // Orchestration replica of the one epoch.
  const SplitDataset split = stratified_split(data, cfg.test_fraction, cfg.split_seed);
  const AttributionMatrix attr = attribution_matrix(start, split.test.features, cfg.ig_steps);
  const MaskPlan plan = select_mask(attr, 1);
  Objective objective;
  objective.gamma = cfg.gamma;
  objective.surrogate_coeff = cfg.r_lambda * 0.5;  // uniform A => lambda = (0.5, 0.5)
  objective.divergence_kind = DivergenceKind::JS;
  objective.divergence_coeff = 1.0;
  objective.divergence_inputs = split.test.features;
  objective.divergence_inputs_masked = apply_mask(split.test.features, plan);
  const OracleResult oracle =
      oracle_minimize(start, objective, split.train, cfg.oracle_steps, cfg.oracle_lr);
  for (std::size_t l = 0; l < oracle.model.num_layers(); ++l) {
    CHECK(result.model.weight(l) == oracle.model.weight(l));
    CHECK(result.model.bias(l) == oracle.model.bias(l));
  }
}

TEST_CASE("local_train: constrained run lifts recall over the unconstrained one") {
  const LocalDataset data = imbalanced_dataset(20260809, 400);
  const Model start({3, 16, 8, 1}, 17);

  LocalTrainConfig constrained;
  constrained.epochs = 8;
  constrained.gamma = 0.85;
  constrained.r_lambda = 1.0;
  constrained.divergence = DivergenceKind::JS;
  constrained.oracle_steps = 10;
  constrained.oracle_lr = 0.12;
  constrained.ig_steps = 10;
  constrained.split_seed = 31;

  LocalTrainConfig unconstrained = constrained;
  unconstrained.r_lambda = 0.0;

  const LocalTrainResult con = local_train(start, data, constrained);
  const LocalTrainResult unc = local_train(start, data, unconstrained);
  const SplitDataset split = stratified_split(data, 0.2, 31);
  const double recall_con =
      recall(split.train.labels, con.model.forward_batch(split.train.features), 0.5);
  const double recall_unc =
      recall(split.train.labels, unc.model.forward_batch(split.train.features), 0.5);
  CHECK(recall_con >= recall_unc);
  CHECK(con.log.epochs.back().lambda1 > 0.0);
}

TEST_CASE("local_train: log invariants and error paths") {
  const LocalDataset data = imbalanced_dataset(3, 220);
  const Model start({3, 8, 1}, 23);
  LocalTrainConfig cfg;
  cfg.epochs = 5;
  cfg.gamma = 0.9;
  cfg.r_lambda = 0.3;
  cfg.divergence = DivergenceKind::JS;
  cfg.oracle_steps = 5;
  cfg.oracle_lr = 0.1;
  cfg.ig_steps = 6;
  cfg.split_seed = 8;
  const LocalTrainResult result = local_train(start, data, cfg);
  REQUIRE(result.log.epochs.size() == 5);
  double prev_b = 0.0;
  for (const auto& e : result.log.epochs) {
    CHECK(e.grad_norm_max >= prev_b);  // B never decreases within a run
    prev_b = e.grad_norm_max;
    CHECK(e.lambda0 + e.lambda1 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(e.lambda0 >= 0.0);
    CHECK(e.lambda1 >= 0.0);
    CHECK(std::isfinite(e.loss));
    CHECK(e.js >= 0.0);
    CHECK(e.phi == doctest::Approx(cfg.gamma - e.recall).epsilon(1e-12));
  }
  CHECK(result.log.b_max == result.log.epochs.back().grad_norm_max);

  // The JSONL export has the documented nine keys per epoch line.
  std::istringstream lines(result.log.to_jsonl());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key :
         {"epoch", "loss", "js", "recall", "psi", "phi", "lambda0", "lambda1",
          "grad_norm_max"}) {
      CHECK(j.contains(key));
    }
    ++count;
  }
  CHECK(count == 5);

  LocalDataset no_pos = data;
  std::fill(no_pos.labels.begin(), no_pos.labels.end(), 0);
  CHECK_THROWS_AS((void)local_train(start, no_pos, cfg), UndefinedRecallError);

  LocalTrainConfig bad = cfg;
  bad.epochs = 0;
  CHECK_THROWS_AS((void)local_train(start, data, bad), ValidationError);
}
