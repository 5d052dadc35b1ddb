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

#include "egfl/model.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

namespace egfl {

namespace {

double logistic(double z, double mu) { return 1.0 / (1.0 + std::exp(-mu * z)); }

void check_input(const Model& m, std::span<const double> x) {
  if (static_cast<int>(x.size()) != m.num_inputs()) {
    throw ShapeError("forward: expected " + std::to_string(m.num_inputs()) +
                     " features, got " + std::to_string(x.size()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw ShapeError("forward: non-finite feature value");
  }
}

}  // namespace

std::size_t LocalDataset::positives() const {
  std::size_t c = 0;
  for (int y : labels) c += (y == 1);
  return c;
}

void LocalDataset::validate() const {
  if (features.size() != labels.size()) {
    throw ShapeError("dataset: " + std::to_string(features.size()) + " feature rows vs " +
                     std::to_string(labels.size()) + " labels");
  }
  if (features.empty()) throw ValidationError("dataset: empty");
  const std::size_t q = features.front().size();
  for (const auto& row : features) {
    if (row.size() != q) throw ShapeError("dataset: ragged feature matrix");
    for (double v : row) {
      if (!std::isfinite(v)) throw ValidationError("dataset: non-finite feature");
    }
  }
  bool has_pos = false, has_neg = false;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("dataset: label outside {0,1}");
    (y == 1 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw ValidationError("dataset: single-class labels");
}

Model::Model(std::vector<int> layer_dims, std::uint64_t seed,
             OutputActivation output_activation, double mu)
    : layer_dims_(std::move(layer_dims)), output_activation_(output_activation), mu_(mu) {
  if (layer_dims_.size() < 2) throw ValidationError("model: need at least input and output dims");
  for (int d : layer_dims_) {
    if (d < 1) throw ValidationError("model: non-positive layer width");
  }
  if (layer_dims_.back() != 1) throw ValidationError("model: output layer width must be 1");
  std::mt19937_64 rng(seed);
  weights_.resize(layer_dims_.size() - 1);
  biases_.resize(layer_dims_.size() - 1);
  for (std::size_t l = 0; l + 1 < layer_dims_.size(); ++l) {
    const int in = layer_dims_[l];
    const int out = layer_dims_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    weights_[l].resize(static_cast<std::size_t>(in) * out);
    for (double& w : weights_[l]) w = dist(rng);
    biases_[l].assign(out, 0.0);
  }
}

Model Model::zeros(std::vector<int> layer_dims, OutputActivation output_activation, double mu) {
  Model m(std::move(layer_dims), 0, output_activation, mu);
  for (auto& w : m.weights_) std::fill(w.begin(), w.end(), 0.0);
  return m;
}

std::size_t Model::num_parameters() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

bool Model::congruent_with(const Model& other) const {
  return layer_dims_ == other.layer_dims_ && output_activation_ == other.output_activation_ &&
         mu_ == other.mu_;
}

// Per-sample forward cache reused across a batch: activations a[0..P] and
// pre-activations z[1..P] (stored as z[l] for layer l = 0..P-1).
struct ForwardWorkspace {
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> z;
  std::vector<double> delta;
  std::vector<double> delta_prev;

  void resize(const Model& m) {
    const auto& dims = m.layer_dims_;
    a.resize(dims.size());
    z.resize(dims.size() - 1);
    for (std::size_t i = 0; i < dims.size(); ++i) a[i].resize(dims[i]);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) z[l].resize(dims[l + 1]);
    std::size_t widest = 0;
    for (int d : dims) widest = std::max<std::size_t>(widest, d);
    delta.resize(widest);
    delta_prev.resize(widest);
  }
};

namespace {

// Unchecked forward pass caching everything backward needs. When
// check_finite is set, a non-finite pre-activation raises NumericError
// naming the layer.
double forward_cached(const Model& m, std::span<const double> x, ForwardWorkspace& ws,
                      bool check_finite) {
  const auto& dims = m.layer_dims();
  std::copy(x.begin(), x.end(), ws.a[0].begin());
  const std::size_t layers = m.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const int in = dims[l];
    const int out = dims[l + 1];
    const auto& w = m.weight(l);
    const auto& b = m.bias(l);
    const auto& prev = ws.a[l];
    auto& zl = ws.z[l];
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      const double* wr = w.data() + static_cast<std::size_t>(o) * in;
      for (int j = 0; j < in; ++j) s += wr[j] * prev[j];
      zl[o] = s;
    }
    if (check_finite) {
      for (int o = 0; o < out; ++o) {
        if (!std::isfinite(zl[o])) {
          throw NumericError("non-finite pre-activation in layer " + std::to_string(l));
        }
      }
    }
    auto& al = ws.a[l + 1];
    if (l + 1 < layers) {
      for (int o = 0; o < out; ++o) al[o] = zl[o] > 0.0 ? zl[o] : 0.0;
    } else {
      al[0] = m.output_activation() == OutputActivation::Logistic ? logistic(zl[0], m.mu())
                                                                  : zl[0];
    }
  }
  return ws.a[layers][0];
}

// Backpropagates seed = dL/dp through the cached pass, accumulating into
// grad (when non-null) and/or writing dL/dx (when non-null).
void backward_accumulate(const Model& m, ForwardWorkspace& ws, double seed, Gradient* grad,
                         double* dx) {
  const auto& dims = m.layer_dims();
  const std::size_t layers = m.num_layers();
  const double p = ws.a[layers][0];
  double d = seed;
  if (m.output_activation() == OutputActivation::Logistic) d *= m.mu() * p * (1.0 - p);
  ws.delta[0] = d;
  for (std::size_t l = layers; l-- > 0;) {
    const int in = dims[l];
    const int out = dims[l + 1];
    const auto& w = m.weight(l);
    const auto& prev = ws.a[l];
    if (grad != nullptr) {
      auto& gw = grad->weights[l];
      auto& gb = grad->biases[l];
      for (int o = 0; o < out; ++o) {
        const double dv = ws.delta[o];
        gb[o] += dv;
        double* gr = gw.data() + static_cast<std::size_t>(o) * in;
        for (int j = 0; j < in; ++j) gr[j] += dv * prev[j];
      }
    }
    if (l == 0) {
      if (dx != nullptr) {
        for (int j = 0; j < in; ++j) {
          double s = 0.0;
          for (int o = 0; o < out; ++o) s += ws.delta[o] * w[static_cast<std::size_t>(o) * in + j];
          dx[j] += s;
        }
      }
      break;
    }
    const auto& zprev = ws.z[l - 1];
    for (int j = 0; j < in; ++j) {
      double s = 0.0;
      for (int o = 0; o < out; ++o) s += ws.delta[o] * w[static_cast<std::size_t>(o) * in + j];
      ws.delta_prev[j] = zprev[j] > 0.0 ? s : 0.0;
    }
    std::swap(ws.delta, ws.delta_prev);
  }
}

void check_divergence_pair(const Objective& o) {
  if (o.divergence_inputs.size() != o.divergence_inputs_masked.size()) {
    throw ShapeError("objective: divergence input/masked row counts differ");
  }
  for (std::size_t i = 0; i < o.divergence_inputs.size(); ++i) {
    if (o.divergence_inputs[i].size() != o.divergence_inputs_masked[i].size()) {
      throw ShapeError("objective: divergence input/masked row widths differ");
    }
  }
}

bool divergence_active(const Objective& o) {
  return o.divergence_kind != DivergenceKind::None && o.divergence_coeff != 0.0 &&
         !o.divergence_inputs.empty();
}

// Fused objective value + gradient; the per-sample caches are reused so the
// hot loop allocates nothing.
double objective_grad(const Model& model, const Objective& objective, const LocalDataset& batch,
                      Gradient* grad) {
  if (batch.features.size() != batch.labels.size()) {
    throw ShapeError("objective: feature/label count mismatch");
  }
  check_divergence_pair(objective);
  const std::size_t n = batch.size();
  double value = 0.0;

  ForwardWorkspace ws;
  ws.resize(model);

  double pos_total = 0.0;
  if (objective.surrogate_coeff != 0.0) {
    for (int y : batch.labels) pos_total += y;
    if (pos_total == 0.0) {
      throw UndefinedRecallError("recall surrogate: batch has no positive labels");
    }
  }

  double bce_sum = 0.0;
  double surrogate_sum = 0.0;
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  if ((objective.bce_coeff != 0.0 || objective.surrogate_coeff != 0.0) && n > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& x = batch.features[i];
      if (static_cast<int>(x.size()) != model.num_inputs()) {
        throw ShapeError("objective: batch row width mismatch");
      }
      const double p = forward_cached(model, x, ws, grad != nullptr);
      const int y = batch.labels[i];
      double seed = 0.0;
      if (objective.bce_coeff != 0.0) {
        const double pc = clamp_prob(p);
        bce_sum += -(y * std::log(pc) + (1 - y) * std::log(1.0 - pc));
        if (!prob_clamped(p)) {
          seed += objective.bce_coeff * inv_n * (-y / p + (1 - y) / (1.0 - p));
        }
      }
      if (objective.surrogate_coeff != 0.0 && y == 1) {
        surrogate_sum += std::min(p, 1.0);
        // d/dp of coeff * (gamma - sum y min(p,1)/sum y)
        if (p < 1.0) seed += objective.surrogate_coeff * (-1.0 / pos_total);
      }
      if (grad != nullptr && seed != 0.0) backward_accumulate(model, ws, seed, grad, nullptr);
    }
  }
  if (objective.bce_coeff != 0.0 && n > 0) value += objective.bce_coeff * bce_sum * inv_n;
  if (objective.surrogate_coeff != 0.0) {
    value += objective.surrogate_coeff * (objective.gamma - surrogate_sum / pos_total);
  }

  if (divergence_active(objective)) {
    ForwardWorkspace ws_masked;
    ws_masked.resize(model);
    const std::size_t dn = objective.divergence_inputs.size();
    const double inv_dn = 1.0 / static_cast<double>(dn);
    const bool js = objective.divergence_kind == DivergenceKind::JS;
    double div_sum = 0.0;
    for (std::size_t i = 0; i < dn; ++i) {
      const auto& xo = objective.divergence_inputs[i];
      if (static_cast<int>(xo.size()) != model.num_inputs()) {
        throw ShapeError("objective: divergence row width mismatch");
      }
      const double p = forward_cached(model, xo, ws, grad != nullptr);
      const double q =
          forward_cached(model, objective.divergence_inputs_masked[i], ws_masked, grad != nullptr);
      div_sum += js ? bernoulli_js(p, q) : bernoulli_kl(p, q);
      if (grad != nullptr) {
        const double c = objective.divergence_coeff * inv_dn;
        const double dp = c * (js ? bernoulli_js_dp(p, q) : bernoulli_kl_dp(p, q));
        const double dq = c * (js ? bernoulli_js_dq(p, q) : bernoulli_kl_dq(p, q));
        if (dp != 0.0) backward_accumulate(model, ws, dp, grad, nullptr);
        if (dq != 0.0) backward_accumulate(model, ws_masked, dq, grad, nullptr);
      }
    }
    value += objective.divergence_coeff * div_sum * inv_dn;
  }
  return value;
}

}  // namespace

double Model::forward(std::span<const double> x) const {
  check_input(*this, x);
  ForwardWorkspace ws;
  ws.resize(*this);
  return forward_cached(*this, x, ws, false);
}

std::vector<double> Model::forward_batch(const Matrix& xs) const {
  ForwardWorkspace ws;
  ws.resize(*this);
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    check_input(*this, xs[i]);
    out[i] = forward_cached(*this, xs[i], ws, false);
  }
  return out;
}

std::vector<double> Model::grad_input(std::span<const double> x) const {
  check_input(*this, x);
  ForwardWorkspace ws;
  ws.resize(*this);
  forward_cached(*this, x, ws, false);
  std::vector<double> dx(num_inputs(), 0.0);
  backward_accumulate(*this, ws, 1.0, nullptr, dx.data());
  return dx;
}

InputGradientEngine::InputGradientEngine(const Model& model)
    : model_(model), ws_(std::make_unique<ForwardWorkspace>()) {
  ws_->resize(model);
}

InputGradientEngine::~InputGradientEngine() = default;

void InputGradientEngine::grad_into(std::span<const double> x, std::span<double> out) {
  forward_cached(model_, x, *ws_, false);
  std::fill(out.begin(), out.end(), 0.0);
  backward_accumulate(model_, *ws_, 1.0, nullptr, out.data());
}

Gradient Gradient::zeros_like(const Model& m) {
  Gradient g;
  g.weights.resize(m.num_layers());
  g.biases.resize(m.num_layers());
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    g.weights[l].assign(m.weight(l).size(), 0.0);
    g.biases[l].assign(m.bias(l).size(), 0.0);
  }
  return g;
}

double Gradient::recompute_norm() const {
  double s = 0.0;
  for (const auto& w : weights) {
    for (double v : w) s += v * v;
  }
  for (const auto& b : biases) {
    for (double v : b) s += v * v;
  }
  return std::sqrt(s);
}

double bce_loss(int y, double p) {
  if (y != 0 && y != 1) throw ValidationError("bce_loss: label outside {0,1}");
  const double pc = clamp_prob(p);
  return -(y * std::log(pc) + (1 - y) * std::log(1.0 - pc));
}

double objective_value(const Model& model, const Objective& objective, const LocalDataset& batch) {
  return objective_grad(model, objective, batch, nullptr);
}

Gradient grad_weights(const Model& model, const Objective& objective, const LocalDataset& batch) {
  Gradient g = Gradient::zeros_like(model);
  objective_grad(model, objective, batch, &g);
  g.euclidean_norm = g.recompute_norm();
  return g;
}

OracleResult oracle_minimize(const Model& start, const Objective& objective,
                             const LocalDataset& batch, int steps, double lr) {
  if (steps < 1) throw ValidationError("oracle_minimize: steps must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("oracle_minimize: lr must be > 0");

  constexpr double kDivergenceCeiling = 1e6;
  OracleResult result{start, 0.0, 0.0, 0.0};
  Model& w = result.model;
  Gradient g = Gradient::zeros_like(w);

  auto guard = [&](double v, int step) {
    if (!(v <= kDivergenceCeiling)) {
      throw OracleDivergenceError("oracle_minimize: objective " + std::to_string(v) +
                                  " at step " + std::to_string(step));
    }
  };

  double prev = 0.0;
  int nonincreasing = 0;
  for (int s = 0; s < steps; ++s) {
    for (auto& layer : g.weights) std::fill(layer.begin(), layer.end(), 0.0);
    for (auto& layer : g.biases) std::fill(layer.begin(), layer.end(), 0.0);
    const double v = objective_grad(w, objective, batch, &g);
    guard(v, s);
    if (s > 0 && v <= prev) ++nonincreasing;
    prev = v;
    g.euclidean_norm = g.recompute_norm();
    result.max_grad_norm = std::max(result.max_grad_norm, g.euclidean_norm);
    for (std::size_t l = 0; l < w.num_layers(); ++l) {
      auto& wl = w.weight(l);
      const auto& gl = g.weights[l];
      for (std::size_t i = 0; i < wl.size(); ++i) wl[i] -= lr * gl[i];
      auto& bl = w.bias(l);
      const auto& gb = g.biases[l];
      for (std::size_t i = 0; i < bl.size(); ++i) bl[i] -= lr * gb[i];
    }
  }
  result.final_value = objective_value(w, objective, batch);
  guard(result.final_value, steps);
  if (result.final_value <= prev) ++nonincreasing;
  result.monotone_fraction = static_cast<double>(nonincreasing) / steps;
  return result;
}

std::string to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::JS:
      return "JS";
    case DivergenceKind::KL:
      return "KL";
    case DivergenceKind::None:
      return "NONE";
  }
  return "NONE";
}

DivergenceKind divergence_kind_from_string(const std::string& name) {
  if (name == "JS") return DivergenceKind::JS;
  if (name == "KL") return DivergenceKind::KL;
  if (name == "NONE") return DivergenceKind::None;
  throw ValidationError("unknown divergence kind: " + name);
}

std::string Model::to_json() const {
  nlohmann::ordered_json j;
  j["layer_dims"] = layer_dims_;
  j["weights"] = weights_;
  j["biases"] = biases_;
  j["output_activation"] =
      output_activation_ == OutputActivation::Logistic ? "logistic" : "identity";
  j["mu"] = mu_;
  return j.dump();
}

Model Model::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
  Model m;
  try {
    m.layer_dims_ = j.at("layer_dims").get<std::vector<int>>();
    m.weights_ = j.at("weights").get<std::vector<std::vector<double>>>();
    m.biases_ = j.at("biases").get<std::vector<std::vector<double>>>();
    const std::string act = j.at("output_activation").get<std::string>();
    if (act != "logistic" && act != "identity") {
      throw ParseError("model json: unknown output_activation " + act);
    }
    m.output_activation_ =
        act == "logistic" ? OutputActivation::Logistic : OutputActivation::Identity;
    m.mu_ = j.at("mu").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model json: ") + e.what());
  }
  if (m.layer_dims_.size() < 2 || m.weights_.size() != m.layer_dims_.size() - 1 ||
      m.biases_.size() != m.weights_.size()) {
    throw ParseError("model json: inconsistent layer structure");
  }
  for (std::size_t l = 0; l + 1 < m.layer_dims_.size(); ++l) {
    const std::size_t in = m.layer_dims_[l];
    const std::size_t out = m.layer_dims_[l + 1];
    if (m.weights_[l].size() != in * out || m.biases_[l].size() != out) {
      throw ParseError("model json: layer " + std::to_string(l) + " has wrong parameter count");
    }
  }
  return m;
}

}  // namespace egfl
