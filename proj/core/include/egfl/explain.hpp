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

#ifndef EGFL_EXPLAIN_HPP_
#define EGFL_EXPLAIN_HPP_

#include <span>
#include <string>
#include <vector>

#include "egfl/model.hpp"

namespace egfl {

// Per-sample integrated-gradients attributions of a batch; row i explains
// sample i. Baseline and step count are kept for reproducibility.
struct AttributionMatrix {
  Matrix values;  // D x Q
  std::vector<double> baseline;
  int steps = 0;

  // One row per sample, header = feature names.
  std::string to_csv(const std::vector<std::string>& feature_names) const;
};

// Right-Riemann path integral of grad_input from baseline to x in m steps:
//   a_j = (x_j - baseline_j) * (1/m) * sum_{s=1..m} grad_input(baseline + (s/m)(x-baseline))_j
std::vector<double> integrated_gradients(const Model& model, std::span<const double> x,
                                         std::span<const double> baseline, int steps);

// Row-wise integrated_gradients with a shared baseline and step count.
AttributionMatrix attribution_matrix(const Model& model, const Matrix& batch,
                                     std::span<const double> baseline, int steps);

// Convenience overload: all-zeros baseline (the feature mean, since inputs
// are standardized before training).
AttributionMatrix attribution_matrix(const Model& model, const Matrix& batch, int steps);

inline constexpr int kIgStepsTraining = 50;
inline constexpr int kIgStepsReport = 200;

}  // namespace egfl

#endif  // EGFL_EXPLAIN_HPP_
