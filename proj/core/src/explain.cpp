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

#include "egfl/explain.hpp"

#include <cmath>
#include <sstream>

#include "egfl/io.hpp"

namespace egfl {

namespace {

void check_ig_args(const Model& model, std::span<const double> x,
                   std::span<const double> baseline, int steps) {
  if (steps < 1) throw ValidationError("integrated_gradients: steps must be >= 1");
  if (x.size() != baseline.size()) {
    throw ShapeError("integrated_gradients: x and baseline sizes differ");
  }
  if (static_cast<int>(x.size()) != model.num_inputs()) {
    throw ShapeError("integrated_gradients: arity does not match the model");
  }
  for (double v : baseline) {
    if (!std::isfinite(v)) throw ShapeError("integrated_gradients: non-finite baseline");
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw ShapeError("integrated_gradients: non-finite input");
  }
}

// Shared inner loop; every buffer is caller-owned so batch sweeps allocate
// nothing per step.
void ig_row(InputGradientEngine& engine, std::span<const double> x,
            std::span<const double> baseline, int steps, std::vector<double>& point,
            std::vector<double>& grad, std::span<double> attribution) {
  const std::size_t q = x.size();
  std::fill(attribution.begin(), attribution.end(), 0.0);
  for (int s = 1; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    for (std::size_t j = 0; j < q; ++j) point[j] = baseline[j] + t * (x[j] - baseline[j]);
    engine.grad_into(point, grad);
    for (std::size_t j = 0; j < q; ++j) attribution[j] += grad[j];
  }
  for (std::size_t j = 0; j < q; ++j) {
    attribution[j] *= (x[j] - baseline[j]) / static_cast<double>(steps);
  }
}

}  // namespace

std::vector<double> integrated_gradients(const Model& model, std::span<const double> x,
                                         std::span<const double> baseline, int steps) {
  check_ig_args(model, x, baseline, steps);
  const std::size_t q = x.size();
  InputGradientEngine engine(model);
  std::vector<double> point(q), grad(q), attribution(q);
  ig_row(engine, x, baseline, steps, point, grad, attribution);
  return attribution;
}

AttributionMatrix attribution_matrix(const Model& model, const Matrix& batch,
                                     std::span<const double> baseline, int steps) {
  if (batch.empty()) throw ValidationError("attribution_matrix: empty batch");
  AttributionMatrix out;
  out.baseline.assign(baseline.begin(), baseline.end());
  out.steps = steps;
  const std::size_t q = baseline.size();
  out.values.assign(batch.size(), std::vector<double>(q));
  InputGradientEngine engine(model);
  std::vector<double> point(q), grad(q);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    check_ig_args(model, batch[i], baseline, steps);
    ig_row(engine, batch[i], baseline, steps, point, grad, out.values[i]);
  }
  return out;
}

AttributionMatrix attribution_matrix(const Model& model, const Matrix& batch, int steps) {
  const std::vector<double> baseline(batch.empty() ? 0 : batch.front().size(), 0.0);
  return attribution_matrix(model, batch, baseline, steps);
}

std::string AttributionMatrix::to_csv(const std::vector<std::string>& feature_names) const {
  std::ostringstream os;
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    if (j > 0) os << ',';
    os << feature_names[j];
  }
  os << '\n';
  for (const auto& row : values) {
    if (row.size() != feature_names.size()) {
      throw ShapeError("attribution csv: header width does not match rows");
    }
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) os << ',';
      os << format_double(row[j]);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace egfl
