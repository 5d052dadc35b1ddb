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

#ifndef EGFL_THEORY_HPP_
#define EGFL_THEORY_HPP_

#include <vector>

#include "egfl/errors.hpp"

namespace egfl {

// Inputs of the convergence-probability bound for one slice.
struct BoundInputs {
  double nu = 0.0;       // constraint violation rate, in (0,1)
  double epsilon = 0.0;  // gap tolerance, >= 0
  double r_lambda = 0.0;
  std::vector<double> b;  // per-client max subgradient norms B_{k,n}
  std::vector<double> d;  // per-client dataset sizes D_{k,n}
  double delta = 0.0;     // oracle error
  double v = 0.0;         // total variation between original and masked predictions
  // The bound's alpha term as printed is delta + ln(1 - V^2/4); the proof's
  // inequality carries the opposite sign on the log. Both conventions are
  // computed; this flag selects which one feeds the bound.
  bool alpha_printed_sign = true;
  bool nu_floored = false;  // set when an all-feasible run was floored to 1/(T+1)
  bool nu_ceiled = false;   // set when an all-violating run was ceiled to T/(T+1)
};

// -ln(1 - V^2/4): the Jensen-Shannon lower bound at total variation V.
double js_lower_bound(double v);

double alpha_term(const BoundInputs& in);

// Delta(nu, epsilon) =
//   1 - nu / (1 + (nu-1) exp(-(D_n e)^2 / (2 (2 R sum_k D_k B_k + D_n a)^2)))
// evaluated exactly as printed. Throws NumericError on a zero denominator
// or a result escaping [0,1].
double convergence_probability(const BoundInputs& in);

// What a finished run exposes to the bound: per-round global-model
// violations, final-round total variation, and per-client B / D, per slice.
struct RunObservations {
  int rounds = 0;
  double r_lambda = 0.0;
  double delta = 0.0;
  std::vector<std::vector<double>> phi;       // [slice][round]
  std::vector<double> final_tv;               // [slice]
  std::vector<std::vector<double>> b;         // [slice][client]
  std::vector<std::vector<double>> d_sizes;   // [slice][client]
};

// nu = (rounds with phi > 0) / T, floored to 1/(T+1) and ceiled to T/(T+1)
// so it stays inside the theorem's open interval; V and B as recorded.
BoundInputs empirical_estimates(const RunObservations& obs, int slice);

}  // namespace egfl

#endif  // EGFL_THEORY_HPP_
