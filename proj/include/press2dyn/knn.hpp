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
#include <limits>
#include <utility>
#include <vector>

#include "press2dyn/core.hpp"
#include "press2dyn/parallel.hpp"
#include "press2dyn/preprocess.hpp"

namespace press2dyn {

// Centred pose coordinates used for neighbour search (z-scored or raw pixels).
struct KnnFeatures {
  PoseVector coords{};
  std::array<bool, kCenteredJoints> valid{};
};

inline KnnFeatures knn_features(const CenteredPose& pose, const PoseNormalizer* normalizer) {
  return {normalizer ? apply_pose_normalizer(*normalizer, pose) : pose.coords, pose.valid};
}

// Sum of per-joint Euclidean distances over mutually valid joints, rescaled
// by 24/|V|; +inf when no joint is valid in both.
inline double pose_distance(const KnnFeatures& a, const KnnFeatures& b) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < kCenteredJoints; ++c) {
    if (!(a.valid[c] && b.valid[c])) continue;
    sum += std::hypot(a.coords[2 * c] - b.coords[2 * c], a.coords[2 * c + 1] - b.coords[2 * c + 1]);
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::infinity();
  return n == kCenteredJoints ? sum : sum * static_cast<double>(kCenteredJoints) / static_cast<double>(n);
}

inline constexpr double kKnnDistanceFloor = 1e-9;

struct Neighbor {
  double distance;
  std::size_t index;
  bool operator<(const Neighbor& o) const {
    return distance < o.distance || (distance == o.distance && index < o.index);
  }
};

class KnnIndex {
 public:
  KnnIndex(std::vector<KnnFeatures> poses, std::vector<GridD> pressures, std::size_t k)
      : poses_(std::move(poses)), pressures_(std::move(pressures)), k_(k) {
    if (poses_.size() != pressures_.size()) throw DataError("knn index: pose/pressure count mismatch");
    if (poses_.empty()) throw DataError("knn index is empty");
    if (k_ < 1 || k_ > poses_.size())
      throw UsageError("knn: K must be in [1, " + std::to_string(poses_.size()) + "]");
  }

  std::size_t size() const { return poses_.size(); }
  std::size_t k() const { return k_; }
  const GridD& pressure(std::size_t i) const { return pressures_.at(i); }

  // The K best neighbours ordered by (distance, index).
  std::vector<Neighbor> neighbors(const KnnFeatures& query) const {
    std::vector<Neighbor> all(poses_.size());
    for (std::size_t i = 0; i < poses_.size(); ++i) all[i] = {pose_distance(query, poses_[i]), i};
    const auto kth = all.begin() + static_cast<std::ptrdiff_t>(k_);
    std::nth_element(all.begin(), kth - 1, all.end());
    std::sort(all.begin(), kth);
    all.resize(k_);
    return all;
  }

  // Inverse-distance weighted mean; zero-distance neighbours, when present,
  // are averaged on their own.
  GridD predict(const KnnFeatures& query) const { return combine(neighbors(query)); }

  GridD combine(const std::vector<Neighbor>& nb) const {
    GridD out{};
    if (nb.empty() || !std::isfinite(nb.front().distance)) return out;
    if (nb.front().distance == 0.0) {
      std::size_t n = 0;
      for (const auto& m : nb) {
        if (m.distance != 0.0) break;
        const GridD& p = pressures_[m.index];
        for (std::size_t i = 0; i < kGridCells; ++i) out[i] += p[i];
        ++n;
      }
      for (double& v : out) v /= static_cast<double>(n);
      return out;
    }
    std::vector<double> w(nb.size(), 0.0);
    double wsum = 0.0;
    for (std::size_t j = 0; j < nb.size(); ++j) {
      if (!std::isfinite(nb[j].distance)) continue;
      w[j] = 1.0 / (nb[j].distance + kKnnDistanceFloor);
      wsum += w[j];
    }
    for (std::size_t j = 0; j < nb.size(); ++j) {
      if (w[j] == 0.0) continue;
      const double wj = w[j] / wsum;
      const GridD& p = pressures_[nb[j].index];
      for (std::size_t i = 0; i < kGridCells; ++i) out[i] += wj * p[i];
    }
    return out;
  }

  std::vector<GridD> predict_all(const std::vector<KnnFeatures>& queries, unsigned jobs = 1) const {
    std::vector<GridD> out(queries.size());
    parallel_for(queries.size(), jobs, [&](std::size_t q) { out[q] = predict(queries[q]); });
    return out;
  }

 private:
  std::vector<KnnFeatures> poses_;
  std::vector<GridD> pressures_;
  std::size_t k_;
};

}  // namespace press2dyn
