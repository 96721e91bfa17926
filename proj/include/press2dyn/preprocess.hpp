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

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "press2dyn/core.hpp"
#include "press2dyn/io.hpp"

namespace press2dyn {

inline constexpr double kStdFloor = 1e-8;

using PoseVector = std::array<double, kPoseInputDim>;

// Body25 index of centred slot c (MidHip removed).
constexpr std::size_t body_joint_of(std::size_t c) { return c < kMidHip ? c : c + 1; }

// 24 joints relative to MidHip, joint-major (x, y). Invalid joints hold (0, 0).
struct CenteredPose {
  PoseVector coords{};
  std::array<bool, kCenteredJoints> valid{};
  // False when MidHip was invalid and the valid-joint centroid was used instead.
  bool centered = true;

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (bool v : valid) n += v;
    return n;
  }
};

inline CenteredPose center_on_midhip(const PoseFrame& pose) {
  CenteredPose out;
  Point2 origin{0.0, 0.0};
  const Joint& hip = pose.joints[kMidHip];
  if (hip.valid()) {
    origin = {hip.x, hip.y};
  } else {
    out.centered = false;
    std::size_t n = 0;
    for (std::size_t c = 0; c < kCenteredJoints; ++c) {
      const Joint& j = pose.joints[body_joint_of(c)];
      if (!j.valid()) continue;
      origin = origin + Point2{j.x, j.y};
      ++n;
    }
    if (n > 0) origin = origin * (1.0 / static_cast<double>(n));
  }
  for (std::size_t c = 0; c < kCenteredJoints; ++c) {
    const Joint& j = pose.joints[body_joint_of(c)];
    out.valid[c] = j.valid();
    if (!j.valid()) continue;
    out.coords[2 * c] = j.x - origin.x;
    out.coords[2 * c + 1] = j.y - origin.y;
  }
  return out;
}

struct PoseNormalizer {
  PoseVector mean{};
  PoseVector std{};
};

// Population statistics over centred frames, valid joints only.
inline PoseNormalizer fit_pose_normalizer(const std::vector<CenteredPose>& poses) {
  std::array<double, kCenteredJoints> count{};
  PoseVector sum{}, sq{};
  for (const auto& p : poses) {
    if (!p.centered) continue;
    for (std::size_t c = 0; c < kCenteredJoints; ++c) {
      if (!p.valid[c]) continue;
      count[c] += 1.0;
      for (std::size_t d = 0; d < 2; ++d) sum[2 * c + d] += p.coords[2 * c + d];
    }
  }
  PoseNormalizer n;
  for (std::size_t c = 0; c < kCenteredJoints; ++c) {
    if (count[c] < 2.0)
      throw DataError("pose normalizer: joint " + std::string(kJointNames[body_joint_of(c)]) +
                      " is valid in fewer than 2 centred frames");
    for (std::size_t d = 0; d < 2; ++d) n.mean[2 * c + d] = sum[2 * c + d] / count[c];
  }
  for (const auto& p : poses) {
    if (!p.centered) continue;
    for (std::size_t c = 0; c < kCenteredJoints; ++c) {
      if (!p.valid[c]) continue;
      for (std::size_t d = 0; d < 2; ++d) {
        const double e = p.coords[2 * c + d] - n.mean[2 * c + d];
        sq[2 * c + d] += e * e;
      }
    }
  }
  for (std::size_t i = 0; i < kPoseInputDim; ++i)
    n.std[i] = std::max(kStdFloor, std::sqrt(sq[i] / count[i / 2]));
  return n;
}

// z-scores, joint-major with x before y; invalid joints emit 0.
inline PoseVector apply_pose_normalizer(const PoseNormalizer& n, const CenteredPose& p) {
  PoseVector out{};
  for (std::size_t c = 0; c < kCenteredJoints; ++c) {
    if (!p.valid[c]) continue;
    for (std::size_t d = 0; d < 2; ++d) {
      const std::size_t i = 2 * c + d;
      out[i] = (p.coords[i] - n.mean[i]) / n.std[i];
    }
  }
  return out;
}

enum class PressureScaling { kMax, kMassArea };

inline std::string to_string(PressureScaling s) { return s == PressureScaling::kMax ? "max" : "mass_area"; }

inline PressureScaling parse_pressure_scaling(const std::string& s) {
  if (s == "max") return PressureScaling::kMax;
  if (s == "mass_area") return PressureScaling::kMassArea;
  throw UsageError("unknown pressure scaling '" + s + "' (expected max or mass_area)");
}

struct PressureNormalizer {
  GridD max{};
  PressureScaling scaling = PressureScaling::kMax;
  bool fitted = false;
};

namespace detail {

inline double scale_factor(PressureScaling s, double mass_kg) {
  if (s == PressureScaling::kMax) return 1.0;
  if (!(mass_kg > 0.0)) throw DataError("mass-area pressure scaling needs a positive subject mass");
  return kPrexelAreaMm2 / mass_kg;
}

inline double clean_kpa(float v) {
  if (std::isnan(v)) return 0.0;
  return std::clamp(static_cast<double>(v), 0.0, kPressureCeilingKpa);
}

}  // namespace detail

// masses[i] is the subject mass of frames[i]; only read in mass-area mode.
inline PressureNormalizer fit_pressure_normalizer(const std::vector<PressureFrame>& frames,
                                                  PressureScaling scaling = PressureScaling::kMax,
                                                  const std::vector<double>& masses = {}) {
  if (frames.empty()) throw DataError("pressure normalizer: no frames");
  if (scaling == PressureScaling::kMassArea && masses.size() != frames.size())
    throw DataError("pressure normalizer: one mass per frame required in mass-area mode");
  PressureNormalizer n;
  n.scaling = scaling;
  n.fitted = true;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const double k = detail::scale_factor(scaling, scaling == PressureScaling::kMax ? 1.0 : masses[f]);
    for (std::size_t i = 0; i < kGridCells; ++i) n.max[i] = std::max(n.max[i], detail::clean_kpa(frames[f].kpa[i]) * k);
  }
  return n;
}

// Prexels whose fitted max is 0 map to 0.
inline GridD normalize_pressure(const PressureNormalizer& n, const PressureFrame& frame, double mass_kg = 0.0) {
  if (!n.fitted) throw DataError("pressure normalizer is not fitted");
  const double k = detail::scale_factor(n.scaling, mass_kg);
  GridD out{};
  for (std::size_t i = 0; i < kGridCells; ++i)
    out[i] = n.max[i] > 0.0 ? detail::clean_kpa(frame.kpa[i]) * k / n.max[i] : 0.0;
  return out;
}

inline PressureFrame denormalize_pressure(const PressureNormalizer& n, const GridD& grid, double mass_kg = 0.0) {
  if (!n.fitted) throw DataError("pressure normalizer is not fitted");
  const double k = detail::scale_factor(n.scaling, mass_kg);
  PressureFrame out;
  for (std::size_t i = 0; i < kGridCells; ++i) out.kpa[i] = static_cast<float>(grid[i] * n.max[i] / k);
  return out;
}

struct Normalizers {
  PoseNormalizer pose;
  PressureNormalizer pressure;
};

inline nlohmann::json to_json(const Normalizers& n) {
  return {{"pose", {{"mean", n.pose.mean}, {"std", n.pose.std}}},
          {"pressure", {{"scaling", to_string(n.pressure.scaling)}, {"max", n.pressure.max}}}};
}

inline Normalizers normalizers_from_json(const nlohmann::json& j, const std::string& source) {
  try {
    Normalizers n;
    n.pose.mean = j.at("pose").at("mean").get<PoseVector>();
    n.pose.std = j.at("pose").at("std").get<PoseVector>();
    for (double s : n.pose.std)
      if (!(s > 0.0)) throw DataError(source + ": pose std must be > 0");
    n.pressure.scaling = parse_pressure_scaling(j.at("pressure").at("scaling").get<std::string>());
    n.pressure.max = j.at("pressure").at("max").get<GridD>();
    n.pressure.fitted = true;
    return n;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline void save_normalizers(const std::filesystem::path& path, const Normalizers& n) { io::write_json(path, to_json(n)); }

inline Normalizers load_normalizers(const std::filesystem::path& path) {
  return normalizers_from_json(io::read_json(path), path.string());
}

// ---------------------------------------------------------------------------
// Samples

struct NormalizedSample {
  FrameRef ref;
  PoseVector input{};
  GridD target{};
  std::size_t valid_joint_count = 0;
};

inline std::vector<CenteredPose> centered_poses(const std::vector<Take>& takes, const std::vector<FrameRef>& refs) {
  std::vector<CenteredPose> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(center_on_midhip(takes.at(r.take).poses.at(r.frame)));
  return out;
}

// Fits both normalizers on the given (training) frames.
inline Normalizers fit_normalizers(const std::vector<Take>& takes, const std::vector<FrameRef>& refs,
                                   PressureScaling scaling = PressureScaling::kMax) {
  std::vector<PressureFrame> frames;
  std::vector<double> masses;
  frames.reserve(refs.size());
  masses.reserve(refs.size());
  for (const auto& r : refs) {
    frames.push_back(takes.at(r.take).pressures.at(r.frame));
    masses.push_back(takes[r.take].subject.mass_kg);
  }
  return {fit_pose_normalizer(centered_poses(takes, refs)), fit_pressure_normalizer(frames, scaling, masses)};
}

inline NormalizedSample make_sample(const Normalizers& n, const Take& take, FrameRef ref) {
  NormalizedSample s;
  s.ref = ref;
  const PoseFrame& pose = take.poses.at(ref.frame);
  s.input = apply_pose_normalizer(n.pose, center_on_midhip(pose));
  s.target = normalize_pressure(n.pressure, take.pressures.at(ref.frame), take.subject.mass_kg);
  s.valid_joint_count = count_valid_joints(pose);
  return s;
}

inline std::vector<NormalizedSample> make_samples(const Normalizers& n, const std::vector<Take>& takes,
                                                  const std::vector<FrameRef>& refs) {
  std::vector<NormalizedSample> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back(make_sample(n, takes.at(r.take), r));
  return out;
}

}  // namespace press2dyn
