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

#include <random>

#include "egfl/explain.hpp"
#include "test_support.hpp"

using namespace egfl;

namespace {

Model linear_identity(const std::vector<double>& w) {
  Model m = Model::zeros({static_cast<int>(w.size()), 1}, OutputActivation::Identity);
  m.weight(0) = w;
  return m;
}

}  // namespace

TEST_CASE("integrated gradients are exact on linear models for any step count") {
  const Model m = linear_identity({1.0, 2.0, 3.0});
  const std::vector<double> x = {1.0, 1.0, 1.0};
  const std::vector<double> baseline = {0.0, 0.0, 0.0};
  for (int steps : {1, 2, 7, 50}) {
    const std::vector<double> a = integrated_gradients(m, x, baseline, steps);
    CHECK(a[0] == 1.0);
    CHECK(a[1] == 2.0);
    CHECK(a[2] == 3.0);
  }
}

TEST_CASE("integrated gradients vanish when x equals the baseline") {
  const Model m({3, 16, 8, 1}, 5);
  const std::vector<double> x = {0.42, -0.17, 0.9};
  const std::vector<double> a = integrated_gradients(m, x, x, 25);
  for (double v : a) CHECK(v == 0.0);
}

TEST_CASE("completeness: attributions sum to the prediction delta") {
  const std::vector<double> baseline = {0.0, 0.0, 0.0};
  std::mt19937_64 rng(20260809);
  std::normal_distribution<double> feat(0.0, 1.0);

  SUBCASE("logistic-linear model at m=200") {
    Model m = Model::zeros({3, 1});
    m.weight(0) = {0.8, -1.3, 0.5};
    m.bias(0) = {0.2};
    const std::vector<double> x = {1.1, 0.4, -0.9};
    const std::vector<double> a = integrated_gradients(m, x, baseline, 200);
    const double total = a[0] + a[1] + a[2];
    CHECK(std::abs(total - (m.forward(x) - m.forward(baseline))) <= 1e-3);
  }

  SUBCASE("default architecture, 100 random samples at m=200") {
    const Model m({3, 16, 8, 1}, 31337);
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> x = {feat(rng), feat(rng), feat(rng)};
      const std::vector<double> a = integrated_gradients(m, x, baseline, 200);
      const double total = a[0] + a[1] + a[2];
      CAPTURE(i);
      CHECK(std::abs(total - (m.forward(x) - m.forward(baseline))) <= 1e-3);
    }
  }
}

TEST_CASE("a provably ignored feature gets exactly zero attribution") {
  Model m({3, 8, 1}, 77);
  // Zero the first layer's column for feature 1.
  const int in = 3;
  for (int o = 0; o < 8; ++o) m.weight(0)[o * in + 1] = 0.0;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> feat(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> x = {feat(rng), feat(rng), feat(rng)};
    const std::vector<double> a =
        integrated_gradients(m, x, std::vector<double>{0.0, 0.0, 0.0}, 30);
    CHECK(a[1] == 0.0);
  }
}

TEST_CASE("attribution_matrix applies rows consistently") {
  const Model m({3, 5, 1}, 9);
  const Matrix batch = {{0.4, -0.2, 0.7}};
  const std::vector<double> baseline = {0.0, 0.0, 0.0};
  const AttributionMatrix matrix = attribution_matrix(m, batch, baseline, 40);
  const std::vector<double> single = integrated_gradients(m, batch[0], baseline, 40);
  REQUIRE(matrix.values.size() == 1);
  CHECK(matrix.values[0] == single);
  CHECK(matrix.steps == 40);
  CHECK(matrix.baseline == baseline);
}

TEST_CASE("duplicated rows get identical attributions") {
  const Model m({3, 16, 8, 1}, 21);
  const Matrix batch = {{0.3, 0.9, -1.2}, {0.3, 0.9, -1.2}, {0.3, 0.9, -1.2}};
  const AttributionMatrix matrix = attribution_matrix(m, batch, 35);
  CHECK(matrix.values[0] == matrix.values[1]);
  CHECK(matrix.values[1] == matrix.values[2]);
}

TEST_CASE("per-row completeness on a random batch at m=200") {
  const Model m({3, 16, 8, 1}, 55);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> feat(0.0, 1.0);
  Matrix batch;
  for (int i = 0; i < 20; ++i) batch.push_back({feat(rng), feat(rng), feat(rng)});
  const AttributionMatrix matrix = attribution_matrix(m, batch, 200);
  const double f0 = m.forward(std::vector<double>{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double total = matrix.values[i][0] + matrix.values[i][1] + matrix.values[i][2];
    CHECK(std::abs(total - (m.forward(batch[i]) - f0)) <= 1e-3);
  }
}

TEST_CASE("contract violations") {
  const Model m({3, 5, 1}, 2);
  const std::vector<double> x = {1.0, 2.0, 3.0};
  const std::vector<double> baseline = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS((void)integrated_gradients(m, x, baseline, 0), ValidationError);
  CHECK_THROWS_AS(
      (void)integrated_gradients(m, x, std::vector<double>{0.0, 0.0}, 10), ShapeError);
  CHECK_THROWS_AS((void)attribution_matrix(m, Matrix{}, 10), ValidationError);
}

TEST_CASE("attribution csv export") {
  AttributionMatrix matrix;
  matrix.values = {{0.5, -0.25, 0.125}};
  matrix.baseline = {0.0, 0.0, 0.0};
  matrix.steps = 10;
  const std::string csv = matrix.to_csv({"prb", "latency_ms", "channel_quality_db"});
  CHECK(csv == "prb,latency_ms,channel_quality_db\n0.5,-0.25,0.125\n");
  CHECK_THROWS_AS((void)matrix.to_csv({"a", "b"}), ShapeError);
}
