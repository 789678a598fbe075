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
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "raes/error.hpp"
#include "raes/matrix.hpp"
#include "raes/rng.hpp"

namespace raes {

/// A trainable matrix with its gradient accumulator.
struct ParamTensor {
  Matrix value;
  Matrix grad;
  std::string name;

  ParamTensor() = default;
  ParamTensor(std::string id, std::size_t rows, std::size_t cols)
      : value(rows, cols), grad(rows, cols), name(std::move(id)) {}

  void zero_grad() { std::fill(grad.data().begin(), grad.data().end(), 0.0); }

  /// Uniform init in [-bound, bound].
  void init_uniform(Rng& rng, double bound) {
    for (double& v : value.data()) v = rng.uniform(-bound, bound);
  }
};

/// Adaptive-moment optimizer. Moment state is keyed by parameter identity and
/// persists between calls; gradients are zeroed after each applied step.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<ParamTensor* const> params, double lr) {
    if (lr <= 0.0) {
      throw ConfigError("adam: learning rate must be positive, got " +
                        std::to_string(lr));
    }
    for (ParamTensor* p : params) {
      Slot& slot = slots_[p];
      if (slot.m.size() != p->value.size()) {
        slot.m = Matrix(p->value.rows(), p->value.cols());
        slot.v = Matrix(p->value.rows(), p->value.cols());
        slot.t = 0;
      }
      slot.t += 1;
      const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(slot.t));
      const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(slot.t));
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double g = p->grad[i];
        slot.m[i] = beta1_ * slot.m[i] + (1.0 - beta1_) * g;
        slot.v[i] = beta2_ * slot.v[i] + (1.0 - beta2_) * g * g;
        const double mhat = slot.m[i] / bc1;
        const double vhat = slot.v[i] / bc2;
        p->value[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
      }
      p->zero_grad();
    }
  }

  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double eps() const { return eps_; }

 private:
  struct Slot {
    Matrix m, v;
    std::int64_t t = 0;
  };

  double beta1_, beta2_, eps_;
  std::unordered_map<const ParamTensor*, Slot> slots_;
};

}  // namespace raes
