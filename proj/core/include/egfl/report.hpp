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

#ifndef EGFL_REPORT_HPP_
#define EGFL_REPORT_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egfl/federation.hpp"

namespace egfl {

// Pearson correlation; 0 by convention when either side has zero variance
// (e.g. an attribution column of a feature the model ignores).
double pearson_correlation(std::span<const double> a, std::span<const double> b);

// A finished training run reloaded from disk.
struct LoadedRun {
  ExperimentConfig config;
  std::string data_dir;  // as recorded in the manifest
  double delta_estimate = 0.0;
  std::vector<std::vector<double>> dataset_sizes;  // [slice][client]
  // Per variant, per (round, slice) rows of round_reports.csv.
  struct VariantReports {
    Variant variant;
    std::vector<RoundReport> rounds;
    std::vector<std::vector<double>> b_max;  // [slice][client], from metrics.json
  };
  std::vector<VariantReports> variants;

  const VariantReports& find(Variant v) const;
  RunObservations observations(Variant v) const;
};

LoadedRun load_run(const std::filesystem::path& run_dir);

// Figure names accepted by the report command.
inline const std::vector<std::string> kFigureNames = {
    "loss", "recall", "comprehensiveness", "sweep", "attributions", "correlation"};

// Emits the tabular data behind one figure into run_dir/figures/ and
// returns relative path -> content hash for the written files. Figures
// that need attributions reload the dataset from data_dir.
std::map<std::string, std::string> emit_figure(const LoadedRun& run,
                                               const std::filesystem::path& run_dir,
                                               const std::filesystem::path& data_dir,
                                               const std::string& figure);

// bound_report.csv rows over an epsilon grid, one block per slice:
// slice,epsilon,delta_printed,delta_alt_sign,nu,V,B_max
std::string bound_report_csv(const LoadedRun& run, Variant variant,
                             const std::vector<double>& epsilon_grid);

}  // namespace egfl

#endif  // EGFL_REPORT_HPP_
