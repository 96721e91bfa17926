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
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "press2dyn/core.hpp"
#include "press2dyn/diffgraph.hpp"
#include "press2dyn/preprocess.hpp"

namespace press2dyn {

using diff::Graph;
using diff::Mode;
using diff::ParamStore;
using diff::Tensor;
using diff::Var;

enum class Arch { kPressNetSimple, kPressNet };

inline std::string to_string(Arch a) { return a == Arch::kPressNetSimple ? "pns" : "pn"; }

inline Arch parse_arch(const std::string& s) {
  if (s == "pns") return Arch::kPressNetSimple;
  if (s == "pn") return Arch::kPressNet;
  throw UsageError("unknown architecture '" + s + "' (expected pns or pn)");
}

struct PnsConfig {
  std::size_t depth = 4;
  std::size_t width = 2560;
  double dropout = 0.5;
  bool output_sigmoid = true;

  void validate() const {
    if (depth < 1) throw UsageError("pns: depth must be >= 1");
    if (width < 1) throw UsageError("pns: width must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("pns: dropout must be in [0,1)");
  }
};

struct PnConfig {
  std::size_t base_channels = 512;
  std::array<std::pair<std::size_t, std::size_t>, 4> upsample = {{{2, 1}, {2, 2}, {2, 2}, {2, 2}}};
  std::size_t fc_hidden = 10;
  // Rank of the per-block fully connected branch.
  std::size_t block_fc_rank = 1;
  std::size_t separable_kernel = 5;
  double spatial_dropout = 0.5;

  void validate() const {
    if (base_channels < 8 || base_channels % 8 != 0) throw UsageError("pn: base_channels must be a multiple of 8");
    if (fc_hidden < 1 || block_fc_rank < 1) throw UsageError("pn: fc sizes must be >= 1");
    if (separable_kernel % 2 == 0) throw UsageError("pn: separable kernel must be odd");
    if (!(spatial_dropout >= 0.0 && spatial_dropout < 1.0)) throw UsageError("pn: dropout must be in [0,1)");
  }

  // Channels entering block i are channels()[i]; the last entry leaves block 3.
  std::array<std::size_t, 5> channels() const {
    return {base_channels, base_channels, base_channels / 2, base_channels / 4, base_channels / 8};
  }
};

inline constexpr std::size_t kSeedRows = 4, kSeedCols = 3;
inline constexpr std::size_t kDecodedRows = 64, kDecodedCols = 24;
inline constexpr std::size_t kCropTop = (kDecodedRows - kGridRows) / 2;
inline constexpr std::size_t kCropLeft = (kDecodedCols - kGridCols) / 2;

struct Model {
  Arch arch = Arch::kPressNetSimple;
  PnsConfig pns;
  PnConfig pn;
  ParamStore params;
};

inline nlohmann::json model_config_json(const Model& m) {
  nlohmann::json j = {{"arch", to_string(m.arch)}};
  if (m.arch == Arch::kPressNetSimple) {
    j["pns"] = {{"depth", m.pns.depth},
                {"width", m.pns.width},
                {"dropout", m.pns.dropout},
                {"output_sigmoid", m.pns.output_sigmoid}};
  } else {
    std::vector<std::array<std::size_t, 2>> ups;
    for (auto [r, c] : m.pn.upsample) ups.push_back({r, c});
    j["pn"] = {{"base_channels", m.pn.base_channels},   {"upsample", ups},
               {"fc_hidden", m.pn.fc_hidden},           {"block_fc_rank", m.pn.block_fc_rank},
               {"separable_kernel", m.pn.separable_kernel}, {"spatial_dropout", m.pn.spatial_dropout}};
  }
  return j;
}

namespace models_detail {

using Rng = std::mt19937_64;

inline Tensor normal_tensor(diff::Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, stddev);
  for (double& v : t.storage()) v = n(rng);
  return t;
}

inline void add_linear(ParamStore& s, const std::string& name, std::size_t in, std::size_t out, double gain,
                       Rng& rng, bool bias = true) {
  s.add(name + ".w", normal_tensor({in, out}, gain / std::sqrt(static_cast<double>(in)), rng));
  if (bias) s.add(name + ".b", Tensor({out}));
}

inline void add_bn(ParamStore& s, const std::string& name, std::size_t c) {
  s.add(name + ".gamma", Tensor({c}, 1.0));
  s.add(name + ".beta", Tensor({c}));
  s.add(name + ".mean", Tensor({c}), false);
  s.add(name + ".var", Tensor({c}, 1.0), false);
}

inline Var lin(Graph& g, ParamStore& s, const std::string& name, Var x) {
  return diff::linear(g, x, g.param(s.get(name + ".w")), g.param(s.get(name + ".b")));
}

inline Var bn(Graph& g, ParamStore& s, const std::string& name, Var x) {
  return diff::batch_norm(g, x, g.param(s.get(name + ".gamma")), g.param(s.get(name + ".beta")),
                          s.get(name + ".mean"), s.get(name + ".var"));
}

inline Var separable(Graph& g, ParamStore& s, const std::string& name, Var x) {
  return diff::separable_conv2d(g, x, g.param(s.get(name + ".dw")), g.param(s.get(name + ".pw")),
                                g.param(s.get(name + ".b")));
}

inline void add_separable(ParamStore& s, const std::string& name, std::size_t cin, std::size_t cout,
                          std::size_t k, Rng& rng) {
  s.add(name + ".dw", normal_tensor({cin, 1, k, k}, std::sqrt(2.0) / static_cast<double>(k), rng));
  s.add(name + ".pw", normal_tensor({cout, cin}, std::sqrt(2.0 / static_cast<double>(cin)), rng));
  s.add(name + ".b", Tensor({cout}));
}

inline std::string block(std::size_t i) { return "block" + std::to_string(i); }

}  // namespace models_detail

inline Model build_pressnet_simple(const PnsConfig& cfg, std::uint64_t seed) {
  using namespace models_detail;
  cfg.validate();
  Model m;
  m.arch = Arch::kPressNetSimple;
  m.pns = cfg;
  Rng rng(seed);
  add_linear(m.params, "in", kPoseInputDim, cfg.width, 1.0, rng);
  for (std::size_t i = 0; i < cfg.depth; ++i)
    for (int l = 1; l <= 2; ++l) {
      const auto name = block(i) + ".fc" + std::to_string(l);
      add_linear(m.params, name, cfg.width, cfg.width, std::sqrt(2.0), rng);
      add_bn(m.params, block(i) + ".bn" + std::to_string(l), cfg.width);
    }
  add_linear(m.params, "out", cfg.width, kGridCells, 1.0, rng);
  return m;
}

inline Model build_pressnet(const PnConfig& cfg, std::uint64_t seed) {
  using namespace models_detail;
  cfg.validate();
  Model m;
  m.arch = Arch::kPressNet;
  m.pn = cfg;
  Rng rng(seed);
  const auto ch = cfg.channels();
  add_linear(m.params, "seed", kPoseInputDim, ch[0] * kSeedRows * kSeedCols, 1.0, rng);
  std::size_t rows = kSeedRows, cols = kSeedCols;
  for (std::size_t i = 0; i < 4; ++i) {
    rows *= cfg.upsample[i].first;
    cols *= cfg.upsample[i].second;
    const std::size_t cin = ch[i], cout = ch[i + 1];
    add_separable(m.params, block(i) + ".sep5", cin, cout, cfg.separable_kernel, rng);
    add_bn(m.params, block(i) + ".bn5", cout);
    add_separable(m.params, block(i) + ".sep1", cin, cout, 1, rng);
    add_bn(m.params, block(i) + ".bn1", cout);
    const std::size_t fan_in = cin * rows * cols, fan_out = cout * rows * cols;
    add_linear(m.params, block(i) + ".fc_u", fan_in, cfg.block_fc_rank, 1.0, rng, false);
    add_linear(m.params, block(i) + ".fc_v", cfg.block_fc_rank, fan_out, 0.1, rng);
  }
  if (rows != kDecodedRows || cols != kDecodedCols)
    throw UsageError("pn: upsampling must decode to 64x24, got " + std::to_string(rows) + "x" + std::to_string(cols));
  m.params.add("head.conv.k", normal_tensor({kNumFeet, ch[4], 3, 3}, 1.0 / std::sqrt(9.0 * ch[4]), rng));
  m.params.add("head.conv.b", Tensor({kNumFeet}));
  add_linear(m.params, "head.fc1", ch[4] * rows * cols, cfg.fc_hidden, 1.0, rng);
  add_linear(m.params, "head.fc2", cfg.fc_hidden, kGridCells, 1.0, rng);
  return m;
}

inline Tensor mask_tensor(const FootMask& mask) {
  Tensor t({kNumFeet, kGridRows, kGridCols});
  for (std::size_t i = 0; i < kGridCells; ++i) t[i] = mask.valid[i] ? 1.0 : 0.0;
  return t;
}

// Pose batch [B,48] -> pressure [B,2,60,21]; masked prexels are exactly 0.
// For PressNet, trace receives the seed, per-block and decoded output shapes.
inline Var forward(Model& m, Graph& g, const Tensor& input, const Tensor& mask,
                   std::vector<diff::Shape>* trace = nullptr) {
  using namespace models_detail;
  ParamStore& s = m.params;
  const std::size_t B = input.dim(0);
  Var x = g.constant(input);
  Var logits;
  bool squash = true;
  if (m.arch == Arch::kPressNetSimple) {
    Var h = lin(g, s, "in", x);
    for (std::size_t i = 0; i < m.pns.depth; ++i) {
      Var t = h;
      for (int l = 1; l <= 2; ++l) {
        const auto n = std::to_string(l);
        t = diff::dropout(g, diff::relu(g, bn(g, s, block(i) + ".bn" + n, lin(g, s, block(i) + ".fc" + n, t))),
                          m.pns.dropout);
      }
      h = diff::add(g, h, t);
    }
    logits = diff::reshape(g, lin(g, s, "out", h), {B, kNumFeet, kGridRows, kGridCols});
    squash = m.pns.output_sigmoid;
  } else {
    const auto ch = m.pn.channels();
    Var h = diff::leaky_relu(g, diff::reshape(g, lin(g, s, "seed", x), {B, ch[0], kSeedRows, kSeedCols}));
    if (trace) trace->push_back(g.value(h).shape());
    for (std::size_t i = 0; i < 4; ++i) {
      const std::string b = block(i);
      Var up = diff::nearest_upsample(g, h, m.pn.upsample[i].first, m.pn.upsample[i].second);
      const diff::Shape us = g.value(up).shape();
      const double p = m.pn.spatial_dropout;
      Var a = diff::spatial_dropout(g, diff::leaky_relu(g, bn(g, s, b + ".bn5", separable(g, s, b + ".sep5", up))), p);
      Var c = diff::spatial_dropout(g, diff::leaky_relu(g, bn(g, s, b + ".bn1", separable(g, s, b + ".sep1", up))), p);
      Var f = diff::linear(g, diff::flatten(g, up), g.param(s.get(b + ".fc_u.w")));
      f = diff::reshape(g, lin(g, s, b + ".fc_v", f), {B, ch[i + 1], us[2], us[3]});
      h = diff::add(g, diff::add(g, a, c), f);
      if (trace) trace->push_back(g.value(h).shape());
    }
    Var conv = diff::conv2d(g, h, g.param(s.get("head.conv.k")), g.param(s.get("head.conv.b")));
    conv = diff::crop2d(g, conv, kCropTop, kCropLeft, kGridRows, kGridCols);
    Var fc = lin(g, s, "head.fc2", diff::leaky_relu(g, lin(g, s, "head.fc1", diff::flatten(g, h))));
    logits = diff::add(g, conv, diff::reshape(g, fc, {B, kNumFeet, kGridRows, kGridCols}));
    if (trace) trace->push_back(g.value(logits).shape());
  }
  Var y = squash ? diff::sigmoid(g, logits) : logits;
  return diff::mul_const(g, y, mask);
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  int epochs = 40;
  std::size_t batch_size = 128;
  diff::Schedule schedule{1e-4, 0.25, 7};
  std::uint64_t seed = 0;
  // Stops after this many optimizer steps when > 0.
  std::size_t max_steps = 0;
  // Stops after the first epoch whose validation MSE falls below this when > 0.
  double target_mse = 0.0;

  void validate() const {
    if (epochs < 1) throw UsageError("train: epochs must be >= 1");
    if (batch_size < 2) throw UsageError("train: batch_size must be >= 2");
    schedule.validate();
  }
};

inline TrainConfig paper_train_config(Arch arch) {
  if (arch == Arch::kPressNet) return {35, 32, {1e-4, 0.5, 10}, 0, 0, 0.0};
  return {40, 128, {1e-4, 0.25, 7}, 0, 0, 0.0};
}

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_val_mse = 0.0;
  std::size_t steps = 0;
};

inline Tensor batch_inputs(const std::vector<NormalizedSample>& samples, const std::vector<std::size_t>& idx) {
  Tensor t({idx.size(), kPoseInputDim});
  for (std::size_t b = 0; b < idx.size(); ++b)
    std::copy(samples[idx[b]].input.begin(), samples[idx[b]].input.end(), t.data() + b * kPoseInputDim);
  return t;
}

inline Tensor batch_targets(const std::vector<NormalizedSample>& samples, const std::vector<std::size_t>& idx) {
  Tensor t({idx.size(), kGridCells});
  for (std::size_t b = 0; b < idx.size(); ++b)
    std::copy(samples[idx[b]].target.begin(), samples[idx[b]].target.end(), t.data() + b * kGridCells);
  return t;
}

// Eval-mode forward over inputs in fixed-size chunks; returns [N,2520] rows.
inline std::vector<GridD> predict_normalized(Model& m, const std::vector<PoseVector>& inputs, const FootMask& mask,
                                             std::size_t chunk = 256) {
  const Tensor mt = mask_tensor(mask);
  std::vector<GridD> out(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    const std::size_t n = std::min(chunk, inputs.size() - start);
    Tensor x({n, kPoseInputDim});
    for (std::size_t b = 0; b < n; ++b)
      std::copy(inputs[start + b].begin(), inputs[start + b].end(), x.data() + b * kPoseInputDim);
    Graph g(Mode::kEval);
    const Tensor& y = g.value(forward(m, g, x, mt));
    for (std::size_t b = 0; b < n; ++b) std::copy(y.data() + b * kGridCells, y.data() + (b + 1) * kGridCells, out[start + b].begin());
  }
  return out;
}

inline PressureFrame predict_kpa(Model& m, const Normalizers& norm, const PoseFrame& pose, const FootMask& mask,
                                 double mass_kg = 0.0) {
  const PoseVector x = apply_pose_normalizer(norm.pose, center_on_midhip(pose));
  return denormalize_pressure(norm.pressure, predict_normalized(m, {x}, mask).front(), mass_kg);
}

// Eval-mode masked MSE over all samples.
inline double evaluate_mse(Model& m, const std::vector<NormalizedSample>& samples, const FootMask& mask,
                           std::size_t chunk = 256) {
  if (samples.empty()) return 0.0;
  std::vector<PoseVector> inputs;
  inputs.reserve(samples.size());
  for (const auto& s : samples) inputs.push_back(s.input);
  const auto pred = predict_normalized(m, inputs, mask, chunk);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < samples.size(); ++k)
    for (std::size_t i = 0; i < kGridCells; ++i) {
      if (!mask.valid[i]) continue;
      const double d = pred[k][i] - samples[k].target[i];
      sum += d * d;
      ++count;
    }
  if (count == 0) throw DataError("evaluate: footmask selects no prexels");
  return sum / static_cast<double>(count);
}

// Seeded minibatch Adam. Keeps the weights of the best validation epoch
// (training MSE when no validation samples are given).
inline TrainResult train(Model& m, const std::vector<NormalizedSample>& train_set,
                         const std::vector<NormalizedSample>& val_set, const FootMask& mask, const TrainConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  if (train_set.size() < 2) throw DataError("train: need at least 2 training samples");
  const Tensor mt = mask_tensor(mask);
  std::mt19937_64 shuffle_rng(cfg.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainResult result;
  std::vector<Tensor> best;
  double best_val = std::numeric_limits<double>::infinity();
  bool stop = false;
  for (int epoch = 0; epoch < cfg.epochs && !stop; ++epoch) {
    const double lr = diff::schedule_lr(cfg.schedule, epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t loss_n = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) break;
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + n));
      m.params.zero_grad();
      double loss = 0.0;
      try {
        Graph g(Mode::kTrain, cfg.seed * 0x9e3779b97f4a7c15ULL + result.steps + 1);
        Var out = forward(m, g, batch_inputs(train_set, idx), mt);
        Var l = diff::masked_mse(g, out, batch_targets(train_set, idx), mt);
        loss = g.value(l)[0];
        g.backward(l);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(result.steps) + ": " + e.what());
      }
      diff::adam_step(m.params, lr);
      loss_sum += loss * static_cast<double>(n);
      loss_n += n;
      ++result.steps;
      if (cfg.max_steps > 0 && result.steps >= cfg.max_steps) {
        stop = true;
        break;
      }
    }
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    log.train_mse = loss_n ? loss_sum / static_cast<double>(loss_n) : 0.0;
    log.val_mse = val_set.empty() ? evaluate_mse(m, train_set, mask) : evaluate_mse(m, val_set, mask);
    if (!std::isfinite(log.val_mse)) throw NumericError("training diverged: validation MSE is not finite");
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.val_mse < best_val) {
      best_val = log.val_mse;
      result.best_epoch = epoch;
      best = m.params.values();
    }
    if (cfg.target_mse > 0.0 && log.val_mse < cfg.target_mse) stop = true;
  }
  m.params.restore(best);
  result.best_val_mse = best_val;
  return result;
}

// ---------------------------------------------------------------------------
// Persistence

inline Model build_model_from_config(const nlohmann::json& j, std::uint64_t seed = 0) {
  try {
    const Arch arch = parse_arch(j.at("arch").get<std::string>());
    if (arch == Arch::kPressNetSimple) {
      PnsConfig c;
      const auto& p = j.at("pns");
      c.depth = p.at("depth").get<std::size_t>();
      c.width = p.at("width").get<std::size_t>();
      c.dropout = p.at("dropout").get<double>();
      c.output_sigmoid = p.at("output_sigmoid").get<bool>();
      return build_pressnet_simple(c, seed);
    }
    PnConfig c;
    const auto& p = j.at("pn");
    c.base_channels = p.at("base_channels").get<std::size_t>();
    const auto ups = p.at("upsample").get<std::vector<std::array<std::size_t, 2>>>();
    if (ups.size() != 4) throw DataError("pn config: upsample needs 4 entries");
    for (std::size_t i = 0; i < 4; ++i) c.upsample[i] = {ups[i][0], ups[i][1]};
    c.fc_hidden = p.at("fc_hidden").get<std::size_t>();
    c.block_fc_rank = p.at("block_fc_rank").get<std::size_t>();
    c.separable_kernel = p.at("separable_kernel").get<std::size_t>();
    c.spatial_dropout = p.at("spatial_dropout").get<double>();
    return build_pressnet(c, seed);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model config: ") + e.what());
  }
}

inline void save_model(const std::filesystem::path& manifest, const Model& m, nlohmann::json metadata = {}) {
  if (!metadata.is_object()) metadata = nlohmann::json::object();
  metadata["model"] = model_config_json(m);
  diff::save_weights(m.params, manifest, metadata);
}

inline Model load_model(const std::filesystem::path& manifest) {
  const auto j = diff::read_weights_manifest(manifest);
  Model m = build_model_from_config(j.at("metadata").at("model"));
  diff::load_weights(m.params, manifest);
  return m;
}

}  // namespace press2dyn
