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

#include <benchmark/benchmark.h>

#include <random>

#include "egfl/explain.hpp"
#include "egfl/fairness.hpp"
#include "egfl/model.hpp"

namespace {

using namespace egfl;

LocalDataset make_batch(int rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> feat(0.0, 1.0);
  LocalDataset data;
  data.features.assign(rows, std::vector<double>(3));
  data.labels.assign(rows, 0);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < 3; ++j) data.features[i][j] = feat(rng);
    data.labels[i] = (i % 5 == 0) ? 1 : 0;
  }
  return data;
}

void BM_Forward(benchmark::State& state) {
  const Model m({3, 16, 8, 1}, 1);
  const std::vector<double> x = {0.4, -0.3, 1.1};
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(x));
}
BENCHMARK(BM_Forward);

void BM_GradWeights(benchmark::State& state) {
  const Model m({3, 16, 8, 1}, 1);
  const LocalDataset batch = make_batch(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(grad_weights(m, Objective{}, batch));
}
BENCHMARK(BM_GradWeights)->Arg(100)->Arg(400);

void BM_IntegratedGradients(benchmark::State& state) {
  const Model m({3, 16, 8, 1}, 1);
  const std::vector<double> x = {0.4, -0.3, 1.1};
  const std::vector<double> baseline(3, 0.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        integrated_gradients(m, x, baseline, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_IntegratedGradients)->Arg(25)->Arg(50)->Arg(200);

void BM_JsDivergence(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> p(1000), q(1000);
  for (int i = 0; i < 1000; ++i) {
    p[i] = u(rng);
    q[i] = u(rng);
  }
  for (auto _ : state) benchmark::DoNotOptimize(js_divergence(p, q));
}
BENCHMARK(BM_JsDivergence);

void BM_LocalTrainEpoch(benchmark::State& state) {
  const Model m({3, 16, 8, 1}, 1);
  const LocalDataset data = make_batch(500, 4);
  LocalTrainConfig cfg;
  cfg.epochs = 1;
  cfg.oracle_steps = 10;
  cfg.ig_steps = 25;
  for (auto _ : state) benchmark::DoNotOptimize(local_train(m, data, cfg));
}
BENCHMARK(BM_LocalTrainEpoch);

}  // namespace

BENCHMARK_MAIN();
