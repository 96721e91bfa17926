// Copyright 2026 The press2dyn Authors
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

#pragma once

#include <cmath>
#include <stdexcept>

#include "press2dyn/diffgraph/graph.hpp"

namespace press2dyn::diff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over every trainable parameter, using the
// gradients currently accumulated in the store.
inline void adam_step(ParamStore& store, double lr, const AdamConfig& cfg = {}) {
  store.set_step(store.step() + 1);
  const double t = static_cast<double>(store.step());
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < store.size(); ++k) {
    Parameter& p = store[k];
    if (!p.trainable) continue;
    double* w = p.value.data();
    const double* gr = p.grad.data();
    double* m = p.adam_m.data();
    double* v = p.adam_v.data();
    for (std::size_t i = 0, n = p.value.size(); i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gr[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gr[i] * gr[i];
      w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.eps);
    }
  }
}

// Piecewise-constant decay: lr = base * factor^floor(epoch / every).
struct Schedule {
  double base_lr = 1e-4;
  double decay_factor = 1.0;
  int decay_every = 1;

  void validate() const {
    if (!(base_lr > 0.0)) throw std::invalid_argument("schedule: base_lr must be > 0");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0))
      throw std::invalid_argument("schedule: decay_factor must be in (0,1]");
    if (decay_every < 1) throw std::invalid_argument("schedule: decay_every must be >= 1");
  }
};

inline double schedule_lr(const Schedule& s, int epoch) {
  s.validate();
  return s.base_lr * std::pow(s.decay_factor, epoch / s.decay_every);
}

}  // namespace press2dyn::diff
