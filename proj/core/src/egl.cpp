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

#include "egfl/egl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace egfl {

namespace {

void check_pair(std::span<const double> p, std::span<const double> q, const char* who) {
  if (p.size() != q.size()) {
    throw ShapeError(std::string(who) + ": length mismatch (" + std::to_string(p.size()) +
                     " vs " + std::to_string(q.size()) + ")");
  }
  if (p.empty()) throw ShapeError(std::string(who) + ": empty vectors");
}

}  // namespace

MaskPlan select_mask(const AttributionMatrix& attr, int count) {
  if (attr.values.empty()) throw ValidationError("select_mask: empty attribution matrix");
  const int q = static_cast<int>(attr.values.front().size());
  if (count < 1) throw ValidationError("select_mask: count must be >= 1");
  if (count >= q) {
    throw ValidationError("select_mask: cannot mask all " + std::to_string(q) + " features");
  }
  MaskPlan plan;
  plan.masked_indices.reserve(attr.values.size());
  std::vector<int> order(q);
  for (const auto& row : attr.values) {
    if (static_cast<int>(row.size()) != q) throw ShapeError("select_mask: ragged attributions");
    std::iota(order.begin(), order.end(), 0);
    // Importance is |attribution|; stable ordering resolves ties by index.
    std::stable_sort(order.begin(), order.end(), [&row](int a, int b) {
      return std::abs(row[a]) < std::abs(row[b]);
    });
    std::vector<int> chosen(order.begin(), order.begin() + count);
    std::sort(chosen.begin(), chosen.end());
    plan.masked_indices.push_back(std::move(chosen));
  }
  return plan;
}

MaskPlan select_mask_fraction(const AttributionMatrix& attr, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("select_mask: fraction outside [0,1]");
  const int q = attr.values.empty() ? 0 : static_cast<int>(attr.values.front().size());
  const int count = std::max(1, static_cast<int>(std::ceil(p * q)));
  MaskPlan plan = select_mask(attr, count);
  plan.fraction = p;
  return plan;
}

Matrix apply_mask(const Matrix& batch, const MaskPlan& plan) {
  if (batch.size() != plan.masked_indices.size()) {
    throw ShapeError("apply_mask: plan covers " + std::to_string(plan.masked_indices.size()) +
                     " samples, batch has " + std::to_string(batch.size()));
  }
  Matrix masked = batch;
  for (std::size_t i = 0; i < masked.size(); ++i) {
    for (int j : plan.masked_indices[i]) {
      if (j < 0 || j >= static_cast<int>(masked[i].size())) {
        throw ShapeError("apply_mask: feature index out of range");
      }
      masked[i][j] = 0.0;
    }
  }
  return masked;
}

std::vector<double> masked_predictions(const Model& model, const Matrix& masked_batch) {
  return model.forward_batch(masked_batch);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q, "js_divergence");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += bernoulli_js(p[i], q[i]);
  return s / static_cast<double>(p.size());
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q, "kl_divergence");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += bernoulli_kl(p[i], q[i]);
  return s / static_cast<double>(p.size());
}

double comprehensiveness(std::span<const double> p_hat, std::span<const double> p_masked) {
  check_pair(p_hat, p_masked, "comprehensiveness");
  double s = 0.0;
  for (std::size_t i = 0; i < p_hat.size(); ++i) s += p_hat[i] - p_masked[i];
  return s / static_cast<double>(p_hat.size());
}

double mean_total_variation(std::span<const double> p, std::span<const double> q) {
  check_pair(p, q, "mean_total_variation");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return s / static_cast<double>(p.size());
}

}  // namespace egfl
