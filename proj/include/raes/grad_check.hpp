/*
 * Copyright 2026 raes authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "raes/error.hpp"
#include "raes/param.hpp"

namespace raes {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries = 0;
  double tol = 0.0;

  bool passed() const { return max_rel_error < tol; }

  std::string summary() const {
    std::ostringstream os;
    os << (passed() ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error
       << " (tol " << tol << ", " << entries << " entries";
    if (!worst_param.empty()) {
      os << ", worst " << worst_param << "[" << worst_index
         << "] analytic=" << worst_analytic << " numeric=" << worst_numeric;
    }
    os << ")";
    return os.str();
  }
};

/// Compares analytic gradients against central finite differences.
///
/// `loss(true)` must run forward and backward, accumulating gradients into
/// the given parameters; `loss(false)` must run a pure forward pass and leave
/// gradients untouched. The loss is re-evaluated twice up front; any mismatch
/// raises DeterminismError.
inline GradCheckResult grad_check(const std::function<double(bool)>& loss,
                                  std::span<ParamTensor* const> params,
                                  double eps, double tol) {
  if (eps <= 0.0) throw ConfigError("grad_check: eps must be positive");
  const double l0 = loss(false);
  const double l1 = loss(false);
  if (l0 != l1) {
    throw DeterminismError("grad_check: loss re-evaluation mismatch (" +
                           std::to_string(l0) + " vs " + std::to_string(l1) +
                           ")");
  }

  for (ParamTensor* p : params) p->zero_grad();
  loss(true);
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (ParamTensor* p : params) analytic.push_back(p->grad);

  GradCheckResult res;
  res.tol = tol;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ParamTensor* p = params[pi];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double lp = loss(false);
      p->value[i] = saved - eps;
      const double lm = loss(false);
      p->value[i] = saved;
      const double numeric = (lp - lm) / (2.0 * eps);
      const double a = analytic[pi][i];
      const double denom = std::max(1e-3, std::fabs(a) + std::fabs(numeric));
      const double rel = std::fabs(a - numeric) / denom;
      ++res.entries;
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        res.worst_param = p->name;
        res.worst_index = i;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
      }
    }
  }
  for (ParamTensor* p : params) p->zero_grad();
  return res;
}

}  // namespace raes
