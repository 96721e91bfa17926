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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "press2dyn/diffgraph/graph.hpp"

namespace press2dyn::diff {

struct GradCheckOptions {
  double step = 1e-3;
  // 0 checks every coordinate; otherwise a seeded sample per parameter tensor.
  std::size_t max_coords_per_param = 0;
  // Gradients smaller than this are compared in absolute terms.
  double abs_floor = 1e-6;
  Mode mode = Mode::kEval;
  std::uint64_t graph_seed = 1;
  std::uint64_t sample_seed = 7;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  // Coordinates whose +/-h evaluations crossed an activation kink.
  std::size_t skipped_kinks = 0;
};

using LossFn = std::function<Var(Graph&)>;

// Central finite differences against the tape's analytic gradients.
// Every evaluation replays the same graph seed, so dropout masks repeat.
inline GradCheckReport grad_check(ParamStore& store, const LossFn& loss_fn,
                                  const GradCheckOptions& opt = {}) {
  store.zero_grad();
  std::uint64_t base_signature = 0;
  {
    Graph g(opt.mode, opt.graph_seed);
    Var loss = loss_fn(g);
    g.backward(loss);
    base_signature = g.kink_signature();
  }
  std::vector<Tensor> analytic;
  for (std::size_t k = 0; k < store.size(); ++k) analytic.push_back(store[k].grad);

  auto evaluate = [&](std::uint64_t& signature) {
    Graph g(opt.mode, opt.graph_seed);
    Var loss = loss_fn(g);
    signature = g.kink_signature();
    return g.value(loss)[0];
  };

  GradCheckReport report;
  std::mt19937_64 sampler(opt.sample_seed);
  for (std::size_t k = 0; k < store.size(); ++k) {
    Parameter& p = store[k];
    if (!p.trainable) continue;
    std::vector<std::size_t> coords(p.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (opt.max_coords_per_param > 0 && coords.size() > opt.max_coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), sampler);
      coords.resize(opt.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double saved = p.value[i];
      std::uint64_t sig_plus = 0, sig_minus = 0;
      p.value[i] = saved + opt.step;
      const double f_plus = evaluate(sig_plus);
      p.value[i] = saved - opt.step;
      const double f_minus = evaluate(sig_minus);
      p.value[i] = saved;
      if (sig_plus != base_signature || sig_minus != base_signature) {
        ++report.skipped_kinks;
        continue;
      }
      const double numeric = (f_plus - f_minus) / (2.0 * opt.step);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), opt.abs_floor});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst = p.name + "[" + std::to_string(i) + "]";
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  store.zero_grad();
  return report;
}

}  // namespace press2dyn::diff
