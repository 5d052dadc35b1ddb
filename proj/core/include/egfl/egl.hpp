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

#ifndef EGFL_EGL_HPP_
#define EGFL_EGL_HPP_

#include <span>
#include <vector>

#include "egfl/explain.hpp"
#include "egfl/model.hpp"

namespace egfl {

// Which features to zero-pad for each sample of a batch.
struct MaskPlan {
  std::vector<std::vector<int>> masked_indices;  // per sample, unique, ascending
  double fraction = 0.0;                         // 0 when count-driven
};

// Per sample, the `count` features with the smallest |attribution|; ties go
// to the lower feature index. count must stay below the feature count.
MaskPlan select_mask(const AttributionMatrix& attr, int count);
// count = max(1, ceil(p * Q)).
MaskPlan select_mask_fraction(const AttributionMatrix& attr, double p);

// Zero-pads the planned entries; everything else is copied unchanged.
Matrix apply_mask(const Matrix& batch, const MaskPlan& plan);

std::vector<double> masked_predictions(const Model& model, const Matrix& masked_batch);

// Mean over samples of the Bernoulli Jensen-Shannon divergence between
// paired predictions; bounded by ln 2, natural log.
double js_divergence(std::span<const double> p, std::span<const double> q);

// Mean per-sample KL(B(p_i) || B(q_i)); the EGFL-KL guidance term.
double kl_divergence(std::span<const double> p, std::span<const double> q);

// Mean over samples of (p_hat_i - p_masked_i); may be negative.
double comprehensiveness(std::span<const double> p_hat, std::span<const double> p_masked);

// Mean per-sample |p_i - q_i|: the total-variation distance between paired
// Bernoulli predictions, feeding the convergence bound.
double mean_total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace egfl

#endif  // EGFL_EGL_HPP_
