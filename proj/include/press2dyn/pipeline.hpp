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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "press2dyn/core.hpp"
#include "press2dyn/knn.hpp"
#include "press2dyn/metrics.hpp"
#include "press2dyn/models.hpp"
#include "press2dyn/preprocess.hpp"
#include "press2dyn/stability.hpp"

// End-to-end steps shared by the CLI and the acceptance harness: split
// training, prediction in kPa, baselines and per-take evaluation.
namespace press2dyn {

inline std::vector<FrameRef> take_refs(const std::vector<Take>& takes, std::uint32_t take) {
  std::vector<FrameRef> out;
  for (std::uint32_t f = 0; f < takes.at(take).size(); ++f) out.push_back({take, f});
  return out;
}

inline const LooSplit& find_split(const std::vector<LooSplit>& splits, const std::string& subject) {
  for (const auto& s : splits)
    if (s.test_subject == subject) return s;
  throw DataError("no subject '" + subject + "' in the cohort");
}

// Training and validation pool for a model fitted on every subject.
inline LooSplit all_subjects_split(const std::vector<Take>& takes, ValidationPolicy policy = {}) {
  LooSplit s;
  std::vector<FrameRef> pool;
  for (std::uint32_t t = 0; t < takes.size(); ++t)
    for (auto r : take_refs(takes, t)) pool.push_back(r);
  if (pool.size() < 3) throw DataError("training needs at least 3 frames");
  auto n_val = static_cast<std::size_t>(std::floor(policy.fraction * static_cast<double>(pool.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, pool.size() - 2);
  const auto cut = static_cast<std::ptrdiff_t>(pool.size() - n_val);
  s.train.assign(pool.begin(), pool.begin() + cut);
  s.validation.assign(pool.begin() + cut, pool.end());
  return s;
}

struct TrainedModel {
  Model model;
  Normalizers norm;
  TrainResult result;
  // Mean unit-sum training pressure distribution; information-gain baseline.
  GridD baseline{};
};

// Normalizers are fitted on the training frames only.
inline TrainedModel train_on_split(Model model, const std::vector<Take>& takes, const LooSplit& split,
                                   const TrainConfig& cfg, PressureScaling scaling = PressureScaling::kMax,
                                   const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (split.train.empty()) throw DataError("training split is empty");
  TrainedModel out;
  out.norm = fit_normalizers(takes, split.train, scaling);
  const auto train_set = make_samples(out.norm, takes, split.train);
  const auto val_set = make_samples(out.norm, takes, split.validation);
  const FootMask& mask = takes.at(split.train.front().take).footmask;
  std::vector<PressureFrame> frames;
  for (const auto& r : split.train) frames.push_back(takes[r.take].pressures[r.frame]);
  out.baseline = baseline_distribution(frames, mask);
  out.model = std::move(model);
  out.result = train(out.model, train_set, val_set, mask, cfg, on_epoch);
  return out;
}

inline std::vector<PressureFrame> predict_take(Model& m, const Normalizers& norm, const Take& take) {
  std::vector<PoseVector> inputs;
  inputs.reserve(take.size());
  for (const auto& p : take.poses) inputs.push_back(apply_pose_normalizer(norm.pose, center_on_midhip(p)));
  const auto grids = predict_normalized(m, inputs, take.footmask);
  std::vector<PressureFrame> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.push_back(denormalize_pressure(norm.pressure, g, take.subject.mass_kg));
  return out;
}

inline GridD to_grid(const PressureFrame& f) {
  GridD g;
  for (std::size_t i = 0; i < kGridCells; ++i) g[i] = static_cast<double>(f.kpa[i]);
  return g;
}

inline PressureFrame to_frame(const GridD& g) {
  PressureFrame f;
  for (std::size_t i = 0; i < kGridCells; ++i) f.kpa[i] = static_cast<float>(g[i]);
  return f;
}

// KNN regressor over the reference frames. With raw coordinates the pose
// normalizer is left unfitted and unused.
struct KnnModel {
  PoseNormalizer normalizer;
  bool raw_coords = false;
  KnnIndex index;

  KnnFeatures features(const PoseFrame& pose) const {
    return knn_features(center_on_midhip(pose), raw_coords ? nullptr : &normalizer);
  }
};

inline KnnModel build_knn(const std::vector<Take>& takes, const std::vector<FrameRef>& refs, std::size_t k,
                          bool raw_coords) {
  if (refs.empty()) throw DataError("knn: no reference frames");
  const auto centered = centered_poses(takes, refs);
  PoseNormalizer norm;
  if (!raw_coords) norm = fit_pose_normalizer(centered);
  std::vector<KnnFeatures> feats;
  std::vector<GridD> grids;
  feats.reserve(refs.size());
  grids.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    feats.push_back(knn_features(centered[i], raw_coords ? nullptr : &norm));
    grids.push_back(to_grid(takes[refs[i].take].pressures[refs[i].frame]));
  }
  return {norm, raw_coords, KnnIndex(std::move(feats), std::move(grids), k)};
}

inline std::vector<PressureFrame> knn_predict_take(const KnnModel& knn, const Take& take, unsigned jobs = 1) {
  std::vector<KnnFeatures> q;
  q.reserve(take.size());
  for (const auto& p : take.poses) q.push_back(knn.features(p));
  std::vector<PressureFrame> out;
  for (const auto& g : knn.index.predict_all(q, jobs)) out.push_back(to_frame(g));
  return out;
}

// Per-prexel mean of the reference frames in kPa.
inline PressureFrame mean_pressure(const std::vector<Take>& takes, const std::vector<FrameRef>& refs) {
  if (refs.empty()) throw DataError("mean pressure: no frames");
  GridD sum{};
  for (const auto& r : refs)
    for (std::size_t i = 0; i < kGridCells; ++i) sum[i] += takes[r.take].pressures[r.frame].kpa[i];
  for (double& v : sum) v /= static_cast<double>(refs.size());
  return to_frame(sum);
}

inline std::vector<FrameError> evaluate_take(const Take& gt, std::uint32_t take_index,
                                             const std::vector<PressureFrame>& pred, const GridD& baseline,
                                             const MetricOptions& opt = {}) {
  if (pred.size() != gt.size())
    throw DataError("evaluate: " + std::to_string(pred.size()) + " predicted frames for " +
                    std::to_string(gt.size()) + " ground-truth frames");
  std::vector<FrameError> out;
  out.reserve(gt.size());
  for (std::uint32_t f = 0; f < gt.size(); ++f)
    out.push_back(evaluate_frame({take_index, f}, count_valid_joints(gt.poses[f]), pred[f], gt.pressures[f],
                                 gt.footmask, baseline, opt));
  return out;
}

inline const std::vector<FootPlacement>& require_placements(const Take& take) {
  if (!take.placements) throw DataError("take of subject " + take.subject.id + " has no foot placements");
  return *take.placements;
}

}  // namespace press2dyn
