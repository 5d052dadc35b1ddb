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

#ifndef EGFL_MODEL_HPP_
#define EGFL_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "egfl/divergence.hpp"
#include "egfl/errors.hpp"

namespace egfl {

using Matrix = std::vector<std::vector<double>>;

// One client's feature matrix (D rows x Q columns) with binary drop labels.
struct LocalDataset {
  Matrix features;
  std::vector<int> labels;  // 1 = traffic-drop event

  std::size_t size() const { return features.size(); }
  std::size_t num_features() const { return features.empty() ? 0 : features.front().size(); }
  std::size_t positives() const;
  // Checks finiteness, label values, rectangular shape and that both
  // classes are present. Throws ShapeError / ValidationError.
  void validate() const;
};

enum class OutputActivation { Logistic, Identity };

// Shallow feedforward binary classifier. Hidden layers are rectified, the
// output unit is a logistic with steepness mu (Identity exists for linear
// diagnostics; the (0,1) output guarantee applies to the logistic mode).
// layer_dims is frozen at construction; parameters are mutable in place so
// training and aggregation can rewrite them without reallocating.
class Model {
 public:
  // Weights uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the given
  // seed; biases start at zero.
  Model(std::vector<int> layer_dims, std::uint64_t seed,
        OutputActivation output_activation = OutputActivation::Logistic, double mu = 1.0);

  static Model zeros(std::vector<int> layer_dims,
                     OutputActivation output_activation = OutputActivation::Logistic,
                     double mu = 1.0);

  const std::vector<int>& layer_dims() const { return layer_dims_; }
  int num_inputs() const { return layer_dims_.front(); }
  std::size_t num_layers() const { return weights_.size(); }
  std::size_t num_parameters() const;

  // Layer l maps activations of width layer_dims[l] to layer_dims[l+1];
  // weight(l) is row-major (out x in).
  std::vector<double>& weight(std::size_t l) { return weights_[l]; }
  const std::vector<double>& weight(std::size_t l) const { return weights_[l]; }
  std::vector<double>& bias(std::size_t l) { return biases_[l]; }
  const std::vector<double>& bias(std::size_t l) const { return biases_[l]; }

  OutputActivation output_activation() const { return output_activation_; }
  double mu() const { return mu_; }

  double forward(std::span<const double> x) const;
  std::vector<double> forward_batch(const Matrix& xs) const;

  // d forward / dx at x.
  std::vector<double> grad_input(std::span<const double> x) const;

  bool congruent_with(const Model& other) const;

  // Flat JSON document {layer_dims, weights row-major, biases, ...};
  // round-trips finite doubles bit-exactly.
  std::string to_json() const;
  static Model from_json(const std::string& text);

 private:
  Model() = default;

  friend class InputGradientEngine;

  std::vector<int> layer_dims_;
  std::vector<std::vector<double>> weights_;  // per layer, row-major out x in
  std::vector<std::vector<double>> biases_;   // per layer
  OutputActivation output_activation_ = OutputActivation::Logistic;
  double mu_ = 1.0;

  friend struct ForwardWorkspace;
};

// Parameter-shaped gradient.
struct Gradient {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  double euclidean_norm = 0.0;

  static Gradient zeros_like(const Model& m);
  double recompute_norm() const;
};

// Composite loss specification: a data-fit term, an optional divergence
// term between predictions on an original/masked input pair (mask indices
// frozen by the caller), and an optional recall-surrogate term in violation
// form, weight * (gamma - s(W)). Gradients flow through every forward pass
// the enabled terms touch.
struct Objective {
  double bce_coeff = 1.0;

  DivergenceKind divergence_kind = DivergenceKind::None;
  double divergence_coeff = 0.0;
  Matrix divergence_inputs;         // originals for the divergence pair
  Matrix divergence_inputs_masked;  // zero-padded copies, same shape

  double surrogate_coeff = 0.0;  // effective multiplier on (gamma - s)
  double gamma = 0.0;
};

// -[y ln p + (1-y) ln(1-p)] with p clamped to [kProbClamp, 1-kProbClamp].
double bce_loss(int y, double p);

double objective_value(const Model& model, const Objective& objective,
                       const LocalDataset& batch);

// Analytic gradient of the full composite objective w.r.t. every parameter.
Gradient grad_weights(const Model& model, const Objective& objective,
                      const LocalDataset& batch);

struct OracleResult {
  Model model;
  double final_value = 0.0;
  double max_grad_norm = 0.0;
  // Fraction of steps whose objective did not increase; logged by callers,
  // never asserted fatally.
  double monotone_fraction = 0.0;
};

// Plain gradient descent with fixed step size: the delta-approximate
// minimization oracle driving each local epoch. Throws
// OracleDivergenceError once the objective exceeds 1e6.
OracleResult oracle_minimize(const Model& start, const Objective& objective,
                             const LocalDataset& batch, int steps, double lr);

struct ForwardWorkspace;

// Buffer-reusing d forward / dx evaluator for tight loops (the path
// integral of the explainer); semantics identical to Model::grad_input.
class InputGradientEngine {
 public:
  explicit InputGradientEngine(const Model& model);
  ~InputGradientEngine();
  InputGradientEngine(const InputGradientEngine&) = delete;
  InputGradientEngine& operator=(const InputGradientEngine&) = delete;

  // Overwrites out (size Q) with d forward / dx at x. No validation.
  void grad_into(std::span<const double> x, std::span<double> out);

 private:
  const Model& model_;
  std::unique_ptr<ForwardWorkspace> ws_;
};

}  // namespace egfl

#endif  // EGFL_MODEL_HPP_
