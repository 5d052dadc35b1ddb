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
//
// Command-line driver: gen-data | train | report | bound.
// Exit codes: 0 success, 1 internal numeric failure, 2 usage/IO error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "egfl/datagen.hpp"
#include "egfl/federation.hpp"
#include "egfl/io.hpp"
#include "egfl/report.hpp"

namespace {

namespace fs = std::filesystem;

std::uint64_t seed_fallback(std::uint64_t fallback) {
  if (const char* env = std::getenv("EGFL_SEED")) {
    return static_cast<std::uint64_t>(egfl::parse_long(env));
  }
  return fallback;
}

int cmd_gen_data(std::optional<std::uint64_t> seed, int k, int n, int d,
                 const std::string& out) {
  const std::uint64_t s = seed.has_value() ? *seed : seed_fallback(1);
  const egfl::DatasetGrid grid = egfl::generate(s, k, n, d);
  egfl::export_grid(grid, out);
  std::cout << "wrote " << k * n << " client files under " << out << " (seed " << s << ")\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data, const std::string& out,
              int threads) {
  auto kv = egfl::parse_key_value(egfl::read_file(config_path));
  if (kv.find("seed") == kv.end()) {
    if (const char* env = std::getenv("EGFL_SEED")) kv["seed"] = env;
  }
  const egfl::DatasetGrid grid = egfl::import_grid(data);
  // Grid geometry keys may be omitted from the config; the dataset is then
  // authoritative. Explicit keys must match (run_experiment checks).
  if (kv.find("K") == kv.end()) kv["K"] = std::to_string(grid.num_bs);
  if (kv.find("N") == kv.end()) kv["N"] = std::to_string(grid.num_slices);
  if (kv.find("D") == kv.end()) kv["D"] = std::to_string(grid.samples);
  egfl::ExperimentConfig cfg = egfl::ExperimentConfig::from_key_values(kv);
  if (threads >= 0) cfg.threads = threads;
  egfl::run_experiment(cfg, grid, out, data);
  std::cout << "run complete: " << cfg.variants.size() << " variant(s), T=" << cfg.rounds
            << ", artifacts under " << out << "\n";
  return 0;
}

int cmd_report(const std::string& run_dir, const std::string& figure,
               const std::string& data_override) {
  const egfl::LoadedRun run = egfl::load_run(run_dir);
  const fs::path data = data_override.empty() ? fs::path(run.data_dir) : fs::path(data_override);
  const auto hashes = egfl::emit_figure(run, run_dir, data, figure);
  nlohmann::ordered_json manifest;
  manifest["kind"] = "egfl-figure";
  manifest["figure"] = figure;
  manifest["seed"] = run.config.seed;
  nlohmann::ordered_json files;
  for (const auto& [rel, hash] : hashes) files[rel] = hash;
  manifest["files"] = files;
  egfl::write_file(fs::path(run_dir) / "figures" / (figure + ".manifest.json"),
                   manifest.dump(2) + "\n");
  for (const auto& [rel, hash] : hashes) std::cout << rel << '\n';
  return 0;
}

std::vector<double> parse_epsilon_grid(const std::string& text) {
  const auto c1 = text.find(':');
  if (c1 == std::string::npos) {
    return {egfl::parse_double(text)};
  }
  const auto c2 = text.find(':', c1 + 1);
  if (c2 == std::string::npos) {
    throw egfl::ValidationError("--epsilon-grid expects start:stop:count or a single value");
  }
  const double start = egfl::parse_double(text.substr(0, c1));
  const double stop = egfl::parse_double(text.substr(c1 + 1, c2 - c1 - 1));
  const long count = egfl::parse_long(text.substr(c2 + 1));
  if (count < 1 || stop < start) {
    throw egfl::ValidationError("--epsilon-grid: need stop >= start and count >= 1");
  }
  std::vector<double> grid;
  for (long i = 0; i < count; ++i) {
    grid.push_back(count == 1 ? start
                              : start + (stop - start) * static_cast<double>(i) /
                                    static_cast<double>(count - 1));
  }
  return grid;
}

int cmd_bound(const std::string& run_dir, const std::string& grid_text,
              const std::string& variant_name, std::optional<double> delta) {
  egfl::LoadedRun run = egfl::load_run(run_dir);
  egfl::Variant variant = run.config.variants.front();
  if (!variant_name.empty()) {
    variant = egfl::variant_from_string(variant_name);
  } else {
    for (egfl::Variant v : run.config.variants) {
      if (v == egfl::Variant::EgflJs) variant = v;
    }
  }
  if (delta.has_value()) run.delta_estimate = *delta;
  const std::string csv = egfl::bound_report_csv(run, variant, parse_epsilon_grid(grid_text));
  egfl::write_file(fs::path(run_dir) / "bound_report.csv", csv);
  nlohmann::ordered_json manifest;
  manifest["kind"] = "egfl-bound";
  manifest["variant"] = egfl::to_string(variant);
  manifest["seed"] = run.config.seed;
  manifest["files"] = {{"bound_report.csv", egfl::fnv1a_hex(csv)}};
  egfl::write_file(fs::path(run_dir) / "bound_manifest.json", manifest.dump(2) + "\n");
  std::cout << "bound_report.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explanation-guided fair federated learning lab for per-slice "
               "RAN traffic-drop prediction"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset grid");
  std::optional<std::uint64_t> gen_seed;
  int gen_k = 50, gen_n = 3, gen_d = 1500;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Seed (fallback: EGFL_SEED, then 1)");
  gen->add_option("--k", gen_k, "Base stations")->check(CLI::PositiveNumber);
  gen->add_option("--n", gen_n, "Slices")->check(CLI::PositiveNumber);
  gen->add_option("--d", gen_d, "Samples per client")->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Run the federated experiment variants");
  std::string train_config, train_data, train_out;
  int train_threads = -1;
  train->add_option("--config", train_config, "key=value config file")->required();
  train->add_option("--data", train_data, "Dataset directory from gen-data")->required();
  train->add_option("--out", train_out, "Run output directory")->required();
  train->add_option("--threads", train_threads, "Client concurrency cap (0 = serial scan)");

  auto* report = app.add_subcommand("report", "Emit tabular figure data for a finished run");
  std::string rep_run, rep_figure, rep_data;
  report->add_option("--run", rep_run, "Run directory")->required();
  report->add_option("--figure", rep_figure, "One of loss|recall|comprehensiveness|sweep|attributions|correlation")
      ->required();
  report->add_option("--data", rep_data, "Dataset directory override");

  auto* bound = app.add_subcommand("bound", "Evaluate the convergence-probability bound");
  std::string bound_run, bound_grid = "0:1:100", bound_variant;
  std::optional<double> bound_delta;
  bound->add_option("--run", bound_run, "Run directory")->required();
  bound->add_option("--epsilon-grid", bound_grid, "start:stop:count or a single epsilon");
  bound->add_option("--variant", bound_variant, "Variant to evaluate (default EGFL-JS)");
  bound->add_option("--delta", bound_delta, "Override the measured oracle error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_seed, gen_k, gen_n, gen_d, gen_out);
    if (train->parsed()) return cmd_train(train_config, train_data, train_out, train_threads);
    if (report->parsed()) return cmd_report(rep_run, rep_figure, rep_data);
    if (bound->parsed()) return cmd_bound(bound_run, bound_grid, bound_variant, bound_delta);
  } catch (const egfl::NumericError& e) {
    std::cerr << "egfl: numeric error: " << e.what() << '\n';
    return 1;
  } catch (const egfl::UndefinedRecallError& e) {
    std::cerr << "egfl: numeric error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "egfl: error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
