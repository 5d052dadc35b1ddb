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

#include <algorithm>
#include <filesystem>
#include <random>

#include "egfl/federation.hpp"
#include "egfl/io.hpp"
#include "egfl/report.hpp"
#include "egfl/rng.hpp"

using namespace egfl;
namespace fs = std::filesystem;

namespace {

Model single_weight_model(double w) {
  Model m = Model::zeros({1, 1});
  m.weight(0) = {w};
  return m;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.num_bs = 3;
  cfg.num_slices = 2;
  cfg.rounds = 2;
  cfg.local_epochs = 2;
  cfg.dataset_size = 120;
  cfg.gamma = {0.8, 0.85};
  cfg.r_lambda = 0.5;
  cfg.oracle_steps = 4;
  cfg.ig_steps = 5;
  cfg.hidden_dims = {6};
  cfg.seed = 99;
  cfg.threads = 1;
  return cfg;
}

bool models_equal(const Model& a, const Model& b) {
  for (std::size_t l = 0; l < a.num_layers(); ++l) {
    if (a.weight(l) != b.weight(l) || a.bias(l) != b.bias(l)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("aggregate: weighted mean anchors") {
  SUBCASE("identical models aggregate to themselves") {
    const Model m({3, 4, 1}, 5);
    const Model out = aggregate({m, m, m}, {100, 250, 50});
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
      for (std::size_t i = 0; i < m.weight(l).size(); ++i) {
        CHECK(out.weight(l)[i] == doctest::Approx(m.weight(l)[i]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("two single-weight models") {
    const Model out = aggregate({single_weight_model(1.0), single_weight_model(2.0)},
                                {100, 300});
    CHECK(out.weight(0)[0] == doctest::Approx(1.75).epsilon(1e-12));
  }
  SUBCASE("K=5 random models match the elementwise brute force") {
    std::mt19937_64 rng(7);
    std::vector<Model> models;
    std::vector<std::size_t> sizes;
    for (int k = 0; k < 5; ++k) {
      models.emplace_back(std::vector<int>{3, 5, 1}, rng());
      sizes.push_back(100 + static_cast<std::size_t>(rng() % 900));
    }
    const Model out = aggregate(models, sizes);
    double total = 0.0;
    for (auto s : sizes) total += static_cast<double>(s);
    for (std::size_t l = 0; l < out.num_layers(); ++l) {
      for (std::size_t i = 0; i < out.weight(l).size(); ++i) {
        double expected = 0.0;
        for (int k = 0; k < 5; ++k) {
          expected += static_cast<double>(sizes[k]) / total * models[k].weight(l)[i];
        }
        CHECK(std::abs(out.weight(l)[i] - expected) <= 1e-12);
      }
    }
  }
  SUBCASE("permutation invariance") {
    std::mt19937_64 rng(8);
    std::vector<Model> models;
    std::vector<std::size_t> sizes;
    for (int k = 0; k < 6; ++k) {
      models.emplace_back(std::vector<int>{3, 4, 1}, rng());
      sizes.push_back(50 + static_cast<std::size_t>(rng() % 500));
    }
    const Model a = aggregate(models, sizes);
    std::vector<int> order = {5, 2, 0, 4, 1, 3};
    std::vector<Model> shuffled;
    std::vector<std::size_t> shuffled_sizes;
    for (int idx : order) {
      shuffled.push_back(models[idx]);
      shuffled_sizes.push_back(sizes[idx]);
    }
    const Model b = aggregate(shuffled, shuffled_sizes);
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
      for (std::size_t i = 0; i < a.weight(l).size(); ++i) {
        CHECK(std::abs(a.weight(l)[i] - b.weight(l)[i]) <= 1e-12);
      }
    }
  }
  SUBCASE("contract violations") {
    CHECK_THROWS_AS((void)aggregate({}, {}), ValidationError);
    CHECK_THROWS_AS((void)aggregate({single_weight_model(1.0)}, {0}), ValidationError);
    CHECK_THROWS_AS(
        (void)aggregate({single_weight_model(1.0), Model({1, 2, 1}, 3)}, {10, 10}),
        ShapeError);
  }
}

TEST_CASE("aggregation weights sum to one per slice") {
  const ExperimentConfig cfg = small_config();
  const DatasetGrid grid = generate(cfg.seed, cfg.num_bs, cfg.num_slices, cfg.dataset_size);
  const auto splits = make_splits(grid, cfg);
  const VariantRun run = run_variant(grid, splits, cfg, Variant::FlVanilla);
  for (const auto& report : run.rounds) {
    for (const auto& weights : report.agg_weights) {
      double sum = 0.0;
      for (double w : weights) sum += w;
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("run_round with K=1 returns the single client's local model") {
  ExperimentConfig cfg = small_config();
  cfg.num_bs = 1;
  cfg.num_slices = 1;
  cfg.gamma = {0.8};
  const DatasetGrid grid = generate(11, 1, 1, cfg.dataset_size);
  const auto splits = make_splits(grid, cfg);
  std::vector<Model> globals;
  globals.emplace_back(cfg.layer_dims(), derive_seed(cfg.seed, {kStreamInit, 0}),
                       OutputActivation::Logistic, cfg.mu);
  const RoundOutput out = run_round(globals, grid, splits, cfg, Variant::EgflJs, 0);

  const LocalTrainResult direct =
      local_train(globals[0], grid.at(0, 0), cfg.local_config(Variant::EgflJs, 0, 0));
  CHECK(models_equal(out.globals[0], direct.model));
}

TEST_CASE("round-0 aggregate equals hand-chained local_train + aggregate") {
  const ExperimentConfig cfg = small_config();
  const DatasetGrid grid = generate(cfg.seed, cfg.num_bs, cfg.num_slices, cfg.dataset_size);
  const auto splits = make_splits(grid, cfg);
  std::vector<Model> globals;
  for (int n = 0; n < cfg.num_slices; ++n) {
    globals.emplace_back(cfg.layer_dims(),
                         derive_seed(cfg.seed, {kStreamInit, static_cast<std::uint64_t>(n)}),
                         OutputActivation::Logistic, cfg.mu);
  }
  const RoundOutput out = run_round(globals, grid, splits, cfg, Variant::EgflKl, 0);
  for (int n = 0; n < cfg.num_slices; ++n) {
    std::vector<Model> locals;
    std::vector<std::size_t> sizes;
    for (int k = 0; k < cfg.num_bs; ++k) {
      locals.push_back(
          local_train(globals[n], grid.at(k, n), cfg.local_config(Variant::EgflKl, n, k))
              .model);
      sizes.push_back(grid.at(k, n).size());
    }
    CHECK(models_equal(out.globals[n], aggregate(locals, sizes)));
  }
}

TEST_CASE("runs are deterministic and thread-count independent") {
  ExperimentConfig cfg = small_config();
  const DatasetGrid grid = generate(cfg.seed, cfg.num_bs, cfg.num_slices, cfg.dataset_size);
  const auto splits = make_splits(grid, cfg);
  cfg.threads = 1;
  const VariantRun a = run_variant(grid, splits, cfg, Variant::EgflJs);
  cfg.threads = 2;
  const VariantRun b = run_variant(grid, splits, cfg, Variant::EgflJs);
  REQUIRE(a.rounds.size() == b.rounds.size());
  for (std::size_t t = 0; t < a.rounds.size(); ++t) {
    CHECK(a.rounds[t].loss == b.rounds[t].loss);
    CHECK(a.rounds[t].recall_train == b.rounds[t].recall_train);
    CHECK(a.rounds[t].js == b.rounds[t].js);
  }
  for (int n = 0; n < cfg.num_slices; ++n) {
    CHECK(models_equal(a.final_models[n], b.final_models[n]));
  }
  REQUIRE(a.logs.size() == b.logs.size());
  for (std::size_t i = 0; i < a.logs.size(); ++i) {
    CHECK(a.logs[i].round == b.logs[i].round);
    CHECK(a.logs[i].bs == b.logs[i].bs);
    CHECK(a.logs[i].slice == b.logs[i].slice);
    CHECK(a.logs[i].log.b_max == b.logs[i].log.b_max);
  }
}

TEST_CASE("FL-constrained with zero radius reproduces FL-vanilla bit-identically") {
  ExperimentConfig cfg = small_config();
  cfg.r_lambda = 0.0;
  const DatasetGrid grid = generate(cfg.seed, cfg.num_bs, cfg.num_slices, cfg.dataset_size);
  const auto splits = make_splits(grid, cfg);
  const VariantRun constrained = run_variant(grid, splits, cfg, Variant::FlConstrained);
  const VariantRun vanilla = run_variant(grid, splits, cfg, Variant::FlVanilla);
  for (int n = 0; n < cfg.num_slices; ++n) {
    CHECK(models_equal(constrained.final_models[n], vanilla.final_models[n]));
  }
  for (std::size_t t = 0; t < constrained.rounds.size(); ++t) {
    CHECK(constrained.rounds[t].loss == vanilla.rounds[t].loss);
    CHECK(constrained.rounds[t].recall_train == vanilla.rounds[t].recall_train);
  }
}

TEST_CASE("normalized loss is anchored to the first round") {
  const ExperimentConfig cfg = small_config();
  const DatasetGrid grid = generate(cfg.seed, cfg.num_bs, cfg.num_slices, cfg.dataset_size);
  const auto splits = make_splits(grid, cfg);
  const VariantRun run = run_variant(grid, splits, cfg, Variant::EgflJs);
  double round0_max = 0.0;
  for (int n = 0; n < cfg.num_slices; ++n) {
    round0_max = std::max(round0_max, run.rounds.front().norm_loss[n]);
  }
  CHECK(round0_max == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& report : run.rounds) {
    for (double v : report.norm_loss) CHECK(v >= 0.0);
  }
}

TEST_CASE("run_experiment writes the full artifact tree") {
  ExperimentConfig cfg = small_config();
  cfg.variants = {Variant::EgflJs, Variant::FlVanilla};
  const DatasetGrid grid = generate(cfg.seed, cfg.num_bs, cfg.num_slices, cfg.dataset_size);
  const fs::path out = fs::temp_directory_path() / "egfl_run_artifacts";
  fs::remove_all(out);
  const ExperimentResult result = run_experiment(cfg, grid, out, "dataset-label");
  CHECK(result.runs.size() == 2);
  CHECK(result.delta_estimate >= 0.0);

  CHECK(fs::exists(out / "manifest.json"));
  for (const char* variant : {"EGFL-JS", "FL-vanilla"}) {
    CHECK(fs::exists(out / variant / "round_reports.csv"));
    CHECK(fs::exists(out / variant / "trainlogs.jsonl"));
    CHECK(fs::exists(out / variant / "metrics.json"));
    CHECK(fs::exists(out / variant / "models" / "final_slice0.json"));
    CHECK(fs::exists(out / variant / "models" / "round001_slice1.json"));
  }

  // Reload through the report path and cross-check against memory.
  const LoadedRun loaded = load_run(out);
  CHECK(loaded.config.num_bs == cfg.num_bs);
  CHECK(loaded.data_dir == "dataset-label");
  CHECK(loaded.variants.size() == 2);
  const auto& js_run = loaded.find(Variant::EgflJs);
  REQUIRE(js_run.rounds.size() == result.runs[0].rounds.size());
  for (std::size_t t = 0; t < js_run.rounds.size(); ++t) {
    for (int n = 0; n < cfg.num_slices; ++n) {
      CHECK(js_run.rounds[t].loss[n] == result.runs[0].rounds[t].loss[n]);
      CHECK(js_run.rounds[t].recall_train[n] == result.runs[0].rounds[t].recall_train[n]);
    }
  }
  const RunObservations from_disk = loaded.observations(Variant::EgflJs);
  const RunObservations from_memory = result.runs[0].observations(cfg, result.delta_estimate);
  CHECK(from_disk.phi == from_memory.phi);
  CHECK(from_disk.b == from_memory.b);
  CHECK(from_disk.final_tv == from_memory.final_tv);
  fs::remove_all(out);
}

TEST_CASE("config parsing: canonical keys, defaults, and rejection") {
  const auto kv = parse_key_value(
      "# settings\nK = 4\nN = 2\nD = 100\nT = 3\nL = 2\ngamma = 0.8,0.85\n"
      "R_lambda = 1e-5\neta_lambda = 0.12\nseed = 5\nvariants = EGFL-JS,FL-vanilla\n");
  const ExperimentConfig cfg = ExperimentConfig::from_key_values(kv);
  CHECK(cfg.num_bs == 4);
  CHECK(cfg.rounds == 3);
  CHECK(cfg.gamma == std::vector<double>{0.8, 0.85});
  CHECK(cfg.r_lambda == 1e-5);
  CHECK(cfg.variants == std::vector<Variant>{Variant::EgflJs, Variant::FlVanilla});
  CHECK(cfg.oracle_lr == 0.12);  // default

  auto bad_gamma = kv;
  bad_gamma["gamma"] = "0.8,1.5";
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::from_key_values(bad_gamma),
                       doctest::Contains("gamma"), ValidationError);
  auto unknown = kv;
  unknown["mystery_knob"] = "1";
  CHECK_THROWS_WITH_AS((void)ExperimentConfig::from_key_values(unknown),
                       doctest::Contains("mystery_knob"), ValidationError);
  auto bad_variant = kv;
  bad_variant["variants"] = "EGFL-JS,EGFL-XXL";
  CHECK_THROWS_AS((void)ExperimentConfig::from_key_values(bad_variant), ValidationError);

  // Round trip through the echo form.
  const ExperimentConfig echoed = ExperimentConfig::from_key_values(cfg.to_key_values());
  CHECK(echoed.num_bs == cfg.num_bs);
  CHECK(echoed.gamma == cfg.gamma);
  CHECK(echoed.variants == cfg.variants);
  CHECK(echoed.seed == cfg.seed);
}

TEST_CASE("run_experiment validates the grid against the config") {
  ExperimentConfig cfg = small_config();
  const DatasetGrid grid = generate(1, 2, 2, cfg.dataset_size);  // wrong K
  CHECK_THROWS_AS((void)run_experiment(cfg, grid), ValidationError);
}

TEST_CASE("oracle delta estimate is small on the canonical convex instance") {
  const double delta = oracle_delta_estimate(500, 0.12);
  CHECK(delta >= 0.0);
  CHECK(delta <= 0.05);
}
