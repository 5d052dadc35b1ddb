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

#ifndef EGFL_DIVERGENCE_HPP_
#define EGFL_DIVERGENCE_HPP_

#include <algorithm>
#include <cmath>
#include <string>

#include "egfl/errors.hpp"

namespace egfl {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any
// logarithm so losses and divergences stay finite.
inline constexpr double kProbClamp = 1e-7;

inline double clamp_prob(double p) {
  return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

enum class DivergenceKind { JS, KL, None };

std::string to_string(DivergenceKind kind);
DivergenceKind divergence_kind_from_string(const std::string& name);

// KL(B(a) || B(b)) between two Bernoulli distributions, natural log.
inline double bernoulli_kl(double a, double b) {
  a = clamp_prob(a);
  b = clamp_prob(b);
  return a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
}

// JS(B(p) || B(q)) = 0.5 KL(B(p)||B(m)) + 0.5 KL(B(q)||B(m)), m = (p+q)/2.
inline double bernoulli_js(double p, double q) {
  p = clamp_prob(p);
  q = clamp_prob(q);
  const double m = 0.5 * (p + q);
  return 0.5 * bernoulli_kl(p, m) + 0.5 * bernoulli_kl(q, m);
}

// The divergence value functions clamp their arguments, so the derivative
// w.r.t. a raw probability is zero once it sits outside the clamp interval.
inline bool prob_clamped(double p) { return p < kProbClamp || p > 1.0 - kProbClamp; }

// d JS(B(p)||B(q)) / dp. Writing JS = H(m) - (H(p)+H(q))/2 with binary
// entropy H gives d/dp = 0.5 [ln((1-m)/m) - ln((1-p)/p)].
inline double bernoulli_js_dp(double p, double q) {
  if (prob_clamped(p)) return 0.0;
  q = clamp_prob(q);
  const double m = 0.5 * (p + q);
  return 0.5 * (std::log((1.0 - m) / m) - std::log((1.0 - p) / p));
}

inline double bernoulli_js_dq(double p, double q) { return bernoulli_js_dp(q, p); }

// d KL(B(p)||B(q)) / dp and / dq.
inline double bernoulli_kl_dp(double p, double q) {
  if (prob_clamped(p)) return 0.0;
  q = clamp_prob(q);
  return std::log(p / q) - std::log((1.0 - p) / (1.0 - q));
}

inline double bernoulli_kl_dq(double p, double q) {
  if (prob_clamped(q)) return 0.0;
  p = clamp_prob(p);
  return -p / q + (1.0 - p) / (1.0 - q);
}

}  // namespace egfl

#endif  // EGFL_DIVERGENCE_HPP_
