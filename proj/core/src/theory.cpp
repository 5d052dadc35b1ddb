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

#include "egfl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace egfl {

double js_lower_bound(double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError("js_lower_bound: V outside [0,1]");
  }
  return -std::log(1.0 - v * v / 4.0);
}

double alpha_term(const BoundInputs& in) {
  const double log_term = std::log(1.0 - in.v * in.v / 4.0);
  return in.alpha_printed_sign ? in.delta + log_term : in.delta - log_term;
}

double convergence_probability(const BoundInputs& in) {
  if (!(in.nu > 0.0 && in.nu < 1.0)) {
    throw ValidationError("convergence_probability: nu outside (0,1)");
  }
  if (!(in.epsilon >= 0.0)) {
    throw ValidationError("convergence_probability: epsilon must be >= 0");
  }
  if (in.b.size() != in.d.size() || in.b.empty()) {
    throw ShapeError("convergence_probability: B and D lists must match and be nonempty");
  }
  double weighted = 0.0;  // sum_k D_k B_k
  double dn = 0.0;        // D_n
  for (std::size_t k = 0; k < in.b.size(); ++k) {
    weighted += in.d[k] * in.b[k];
    dn += in.d[k];
  }
  const double c = 2.0 * in.r_lambda * weighted + dn * alpha_term(in);
  if (c == 0.0) {
    throw NumericError("convergence_probability: zero denominator term");
  }
  const double num = dn * in.epsilon;
  const double exponent = -(num * num) / (2.0 * c * c);
  const double e = std::exp(exponent);
  const double denom = 1.0 + (in.nu - 1.0) * e;
  if (denom == 0.0) throw NumericError("convergence_probability: degenerate denominator");
  // 1 - nu/denom rearranged over the common denominator; identical algebra
  // but exact at both limits (e = 1 gives 0, e = 0 gives 1 - nu).
  double delta = (1.0 - in.nu) * (1.0 - e) / denom;
  // Rounding can leave the value a few ulps past a boundary; anything
  // further out signals a regime where the printed formula degenerates.
  constexpr double kBoundaryTolerance = 1e-12;
  if (!std::isfinite(delta) || delta < -kBoundaryTolerance ||
      delta > 1.0 + kBoundaryTolerance) {
    throw NumericError("convergence_probability: bound escaped [0,1] (value " +
                       std::to_string(delta) + ")");
  }
  return std::clamp(delta, 0.0, 1.0);
}

BoundInputs empirical_estimates(const RunObservations& obs, int slice) {
  if (obs.rounds < 1) throw ValidationError("empirical_estimates: empty run");
  if (slice < 0 || slice >= static_cast<int>(obs.phi.size())) {
    throw ValidationError("empirical_estimates: slice index out of range");
  }
  BoundInputs in;
  in.r_lambda = obs.r_lambda;
  in.delta = obs.delta;
  in.v = obs.final_tv[slice];
  in.b = obs.b[slice];
  in.d = obs.d_sizes[slice];

  int violations = 0;
  for (double phi : obs.phi[slice]) violations += (phi > 0.0);
  const double t = static_cast<double>(obs.rounds);
  if (violations == 0) {
    in.nu = 1.0 / (t + 1.0);
    in.nu_floored = true;
  } else if (violations == obs.rounds) {
    in.nu = t / (t + 1.0);
    in.nu_ceiled = true;
  } else {
    in.nu = static_cast<double>(violations) / t;
  }
  return in;
}

}  // namespace egfl
