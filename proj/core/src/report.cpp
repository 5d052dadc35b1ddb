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

#include "egfl/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "egfl/io.hpp"
#include "egfl/rng.hpp"

namespace egfl {

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("pearson_correlation: length mismatch or empty");
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

const LoadedRun::VariantReports& LoadedRun::find(Variant v) const {
  for (const auto& vr : variants) {
    if (vr.variant == v) return vr;
  }
  throw ValidationError("run does not contain variant " + to_string(v));
}

RunObservations LoadedRun::observations(Variant v) const {
  const VariantReports& vr = find(v);
  RunObservations obs;
  obs.rounds = static_cast<int>(vr.rounds.size());
  obs.r_lambda = config.r_lambda;
  obs.delta = delta_estimate;
  const int n_count = config.num_slices;
  obs.phi.assign(n_count, {});
  obs.final_tv.assign(n_count, 0.0);
  obs.b = vr.b_max;
  obs.d_sizes = dataset_sizes;
  for (int n = 0; n < n_count; ++n) {
    for (const auto& round : vr.rounds) {
      obs.phi[n].push_back(config.gamma[n] - round.recall_train[n]);
    }
    obs.final_tv[n] = vr.rounds.back().tv[n];
  }
  return obs;
}

namespace {

std::vector<RoundReport> parse_round_reports(const std::string& csv, int num_slices,
                                             const std::string& where) {
  std::istringstream is(csv);
  std::string line;
  int lineno = 0;
  std::vector<RoundReport> rounds;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (lineno == 1) {
      if (line != "round,slice,loss,norm_loss,recall_train,recall_test,js,comprehensiveness,tv") {
        throw ParseError(where + ": unexpected header", lineno);
      }
      continue;
    }
    const auto cells = split_csv_line(line);
    if (cells.size() != 9) throw ParseError(where + ": expected 9 columns", lineno);
    const int round = static_cast<int>(parse_long(cells[0], lineno));
    const int slice = static_cast<int>(parse_long(cells[1], lineno));
    if (round == static_cast<int>(rounds.size())) {
      rounds.emplace_back();
      rounds.back().round = round;
    }
    if (round != static_cast<int>(rounds.size()) - 1 ||
        slice != static_cast<int>(rounds.back().loss.size())) {
      throw ParseError(where + ": rows out of order", lineno);
    }
    RoundReport& r = rounds.back();
    r.loss.push_back(parse_double(cells[2], lineno));
    r.norm_loss.push_back(parse_double(cells[3], lineno));
    r.recall_train.push_back(parse_double(cells[4], lineno));
    r.recall_test.push_back(parse_double(cells[5], lineno));
    r.js.push_back(parse_double(cells[6], lineno));
    r.comprehensiveness.push_back(parse_double(cells[7], lineno));
    r.tv.push_back(parse_double(cells[8], lineno));
  }
  if (rounds.empty()) throw ParseError(where + ": empty report");
  for (const auto& r : rounds) {
    if (static_cast<int>(r.loss.size()) != num_slices) {
      throw ParseError(where + ": slice rows missing for round " + std::to_string(r.round));
    }
  }
  return rounds;
}

}  // namespace

LoadedRun load_run(const std::filesystem::path& run_dir) {
  const auto manifest_path = run_dir / "manifest.json";
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  LoadedRun run;
  try {
    if (manifest.at("kind").get<std::string>() != "egfl-run") {
      throw ParseError(manifest_path.string() + ": not a run manifest");
    }
    std::map<std::string, std::string> kv;
    for (const auto& [key, value] : manifest.at("config").items()) {
      kv[key] = value.get<std::string>();
    }
    run.config = ExperimentConfig::from_key_values(kv);
    run.data_dir = manifest.at("data_dir").get<std::string>();
    run.delta_estimate = manifest.at("delta_estimate").get<double>();
    run.dataset_sizes = manifest.at("dataset_sizes").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }

  for (Variant v : run.config.variants) {
    LoadedRun::VariantReports vr;
    vr.variant = v;
    const auto base = run_dir / to_string(v);
    vr.rounds = parse_round_reports(read_file(base / "round_reports.csv"),
                                    run.config.num_slices, to_string(v) + "/round_reports.csv");
    nlohmann::json metrics;
    try {
      metrics = nlohmann::json::parse(read_file(base / "metrics.json"));
      vr.b_max = metrics.at("b_max").get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError((base / "metrics.json").string() + ": " + e.what());
    }
    run.variants.push_back(std::move(vr));
  }
  return run;
}

namespace {

Model load_final_model(const std::filesystem::path& run_dir, Variant v, int slice) {
  return Model::from_json(
      read_file(run_dir / to_string(v) / "models" / ("final_slice" + std::to_string(slice) +
                                                     ".json")));
}

// Pooled test-split rows of one slice, in (k, row) order.
Matrix pooled_test_features(const DatasetGrid& grid, const ExperimentConfig& cfg, int slice) {
  Matrix pooled;
  for (int k = 0; k < grid.num_bs; ++k) {
    const auto seed = derive_seed(cfg.seed, {kStreamSplit, static_cast<std::uint64_t>(k),
                                             static_cast<std::uint64_t>(slice)});
    SplitDataset split = stratified_split(grid.at(k, slice), cfg.test_fraction, seed);
    const LocalDataset& probe = split.test.size() > 0 ? split.test : split.train;
    for (const auto& row : probe.features) pooled.push_back(row);
  }
  return pooled;
}

}  // namespace

std::map<std::string, std::string> emit_figure(const LoadedRun& run,
                                               const std::filesystem::path& run_dir,
                                               const std::filesystem::path& data_dir,
                                               const std::string& figure) {
  if (std::find(kFigureNames.begin(), kFigureNames.end(), figure) == kFigureNames.end()) {
    throw ValidationError("unknown figure name: " + figure);
  }
  const ExperimentConfig& cfg = run.config;
  std::map<std::string, std::string> outputs;  // relative path -> content

  if (figure == "loss") {
    std::ostringstream os;
    os << "variant,slice,round,norm_loss,loss\n";
    for (const auto& vr : run.variants) {
      for (const auto& r : vr.rounds) {
        for (int n = 0; n < cfg.num_slices; ++n) {
          os << to_string(vr.variant) << ',' << n << ',' << r.round << ','
             << format_double(r.norm_loss[n]) << ',' << format_double(r.loss[n]) << '\n';
        }
      }
    }
    outputs["figures/loss.csv"] = os.str();
  } else if (figure == "recall") {
    std::ostringstream os;
    os << "variant,slice,round,recall_train,recall_test\n";
    for (const auto& vr : run.variants) {
      for (const auto& r : vr.rounds) {
        for (int n = 0; n < cfg.num_slices; ++n) {
          os << to_string(vr.variant) << ',' << n << ',' << r.round << ','
             << format_double(r.recall_train[n]) << ',' << format_double(r.recall_test[n])
             << '\n';
        }
      }
    }
    outputs["figures/recall.csv"] = os.str();
  } else if (figure == "comprehensiveness") {
    std::ostringstream os;
    os << "variant,slice,comprehensiveness,js,tv\n";
    for (const auto& vr : run.variants) {
      const RoundReport& last = vr.rounds.back();
      for (int n = 0; n < cfg.num_slices; ++n) {
        os << to_string(vr.variant) << ',' << n << ','
           << format_double(last.comprehensiveness[n]) << ',' << format_double(last.js[n])
           << ',' << format_double(last.tv[n]) << '\n';
      }
    }
    outputs["figures/comprehensiveness.csv"] = os.str();
  } else {
    // Attribution-backed figures recompute IG with the final models.
    const DatasetGrid grid = import_grid(data_dir);
    if (grid.num_bs != cfg.num_bs || grid.num_slices != cfg.num_slices) {
      throw ValidationError("report: dataset grid does not match the run config");
    }
    if (figure == "sweep") {
      // Comprehensiveness versus the masked lowest-p% of features.
      std::ostringstream os;
      os << "slice,variant,p_percent,comprehensiveness\n";
      const int q = 3;
      for (int n = 0; n < cfg.num_slices; ++n) {
        const Matrix pooled = pooled_test_features(grid, cfg, n);
        for (const auto& vr : run.variants) {
          const Model model = load_final_model(run_dir, vr.variant, n);
          const AttributionMatrix attr = attribution_matrix(model, pooled, cfg.ig_steps_report);
          const std::vector<double> p_hat = model.forward_batch(pooled);
          for (int count = 1; count < q; ++count) {
            const double p_fraction = static_cast<double>(count) / q;
            const MaskPlan plan = select_mask(attr, count);
            const std::vector<double> p_masked =
                model.forward_batch(apply_mask(pooled, plan));
            char pct[16];
            std::snprintf(pct, sizeof(pct), "%.1f", 100.0 * p_fraction);
            os << n << ',' << to_string(vr.variant) << ',' << pct << ','
               << format_double(comprehensiveness(p_hat, p_masked)) << '\n';
          }
        }
      }
      outputs["figures/sweep.csv"] = os.str();
    } else if (figure == "attributions") {
      for (const auto& vr : run.variants) {
        for (int n = 0; n < cfg.num_slices; ++n) {
          const Matrix pooled = pooled_test_features(grid, cfg, n);
          const Model model = load_final_model(run_dir, vr.variant, n);
          const AttributionMatrix attr = attribution_matrix(model, pooled, cfg.ig_steps_report);
          outputs["figures/attributions_" + to_string(vr.variant) + "_slice" +
                  std::to_string(n) + ".csv"] = attr.to_csv(kFeatureNames);
        }
      }
    } else {  // correlation
      std::ostringstream os;
      os << "variant,slice,feature,pearson_r\n";
      for (const auto& vr : run.variants) {
        for (int n = 0; n < cfg.num_slices; ++n) {
          const Matrix pooled = pooled_test_features(grid, cfg, n);
          const Model model = load_final_model(run_dir, vr.variant, n);
          const AttributionMatrix attr = attribution_matrix(model, pooled, cfg.ig_steps_report);
          const std::vector<double> p_hat = model.forward_batch(pooled);
          for (std::size_t j = 0; j < kFeatureNames.size(); ++j) {
            std::vector<double> column;
            column.reserve(attr.values.size());
            for (const auto& row : attr.values) column.push_back(row[j]);
            os << to_string(vr.variant) << ',' << n << ',' << kFeatureNames[j] << ','
               << format_double(pearson_correlation(column, p_hat)) << '\n';
          }
        }
      }
      outputs["figures/correlation.csv"] = os.str();
    }
  }

  std::map<std::string, std::string> hashes;
  for (const auto& [rel, content] : outputs) {
    const auto path = run_dir / rel;
    std::filesystem::create_directories(path.parent_path());
    write_file(path, content);
    hashes[rel] = fnv1a_hex(content);
  }
  return hashes;
}

std::string bound_report_csv(const LoadedRun& run, Variant variant,
                             const std::vector<double>& epsilon_grid) {
  if (epsilon_grid.empty()) throw ValidationError("bound: empty epsilon grid");
  const RunObservations obs = run.observations(variant);
  std::ostringstream os;
  os << "slice,epsilon,delta_printed,delta_alt_sign,nu,V,B_max\n";
  for (int n = 0; n < run.config.num_slices; ++n) {
    BoundInputs in = empirical_estimates(obs, n);
    double b_max = 0.0;
    for (double b : in.b) b_max = std::max(b_max, b);
    for (double eps : epsilon_grid) {
      in.epsilon = eps;
      in.alpha_printed_sign = true;
      const double printed = convergence_probability(in);
      in.alpha_printed_sign = false;
      const double alt = convergence_probability(in);
      os << n << ',' << format_double(eps) << ',' << format_double(printed) << ','
         << format_double(alt) << ',' << format_double(in.nu) << ',' << format_double(in.v)
         << ',' << format_double(b_max) << '\n';
    }
  }
  return os.str();
}

}  // namespace egfl
