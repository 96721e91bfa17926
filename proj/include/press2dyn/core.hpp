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
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "press2dyn/errors.hpp"

namespace press2dyn {

inline constexpr std::size_t kNumJoints = 25;
inline constexpr std::size_t kMidHip = 8;
inline constexpr std::size_t kCenteredJoints = kNumJoints - 1;
inline constexpr std::size_t kPoseInputDim = 2 * kCenteredJoints;

inline constexpr std::size_t kGridRows = 60;
inline constexpr std::size_t kGridCols = 21;
inline constexpr std::size_t kNumFeet = 2;
inline constexpr std::size_t kFootCells = kGridRows * kGridCols;
inline constexpr std::size_t kGridCells = kNumFeet * kFootCells;

inline constexpr double kPressureCeilingKpa = 862.0;
inline constexpr double kPrexelPitchMm = 5.08;
inline constexpr double kPrexelAreaMm2 = kPrexelPitchMm * kPrexelPitchMm;
inline constexpr double kGravity = 9.80665;

enum class Foot : std::uint8_t { kLeft = 0, kRight = 1 };

// Body25 keypoint order.
enum class BodyJoint : std::uint8_t {
  kNose = 0,
  kNeck,
  kRShoulder,
  kRElbow,
  kRWrist,
  kLShoulder,
  kLElbow,
  kLWrist,
  kMidHip,
  kRHip,
  kRKnee,
  kRAnkle,
  kLHip,
  kLKnee,
  kLAnkle,
  kREye,
  kLEye,
  kREar,
  kLEar,
  kLBigToe,
  kLSmallToe,
  kLHeel,
  kRBigToe,
  kRSmallToe,
  kRHeel,
};

inline constexpr std::array<std::string_view, kNumJoints> kJointNames = {
    "Nose",     "Neck",      "RShoulder", "RElbow", "RWrist",
    "LShoulder", "LElbow",   "LWrist",    "MidHip", "RHip",
    "RKnee",    "RAnkle",    "LHip",      "LKnee",  "LAnkle",
    "REye",     "LEye",      "REar",      "LEar",   "LBigToe",
    "LSmallToe", "LHeel",    "RBigToe",   "RSmallToe", "RHeel"};

constexpr std::size_t index_of(BodyJoint j) { return static_cast<std::size_t>(j); }

struct Joint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  bool valid() const { return confidence > 0.0; }
  bool operator==(const Joint&) const = default;
};

struct PoseFrame {
  std::int64_t frame_index = 0;
  std::array<Joint, kNumJoints> joints{};

  const Joint& operator[](BodyJoint j) const { return joints[index_of(j)]; }
  Joint& operator[](BodyJoint j) { return joints[index_of(j)]; }
  bool operator==(const PoseFrame&) const = default;
};

// Flat cell index: foot-major, then row (0 = toe end), then column.
constexpr std::size_t grid_index(std::size_t foot, std::size_t row, std::size_t col) {
  return foot * kFootCells + row * kGridCols + col;
}

constexpr std::size_t grid_index(Foot foot, std::size_t row, std::size_t col) {
  return grid_index(static_cast<std::size_t>(foot), row, col);
}

using GridD = std::array<double, kGridCells>;

// Two 60x21 insole grids in kPa. Stored as f32, the on-disk precision.
struct PressureFrame {
  std::array<float, kGridCells> kpa{};

  float& at(std::size_t foot, std::size_t row, std::size_t col) {
    return kpa[grid_index(foot, row, col)];
  }
  float at(std::size_t foot, std::size_t row, std::size_t col) const {
    return kpa[grid_index(foot, row, col)];
  }
  bool operator==(const PressureFrame&) const = default;
};

// Uniform read access to float and double grids.
inline double cell_value(const GridD& g, std::size_t i) { return g[i]; }
inline double cell_value(const PressureFrame& f, std::size_t i) { return static_cast<double>(f.kpa[i]); }

struct FootMask {
  std::array<bool, kGridCells> valid{};

  static FootMask all_valid() {
    FootMask m;
    m.valid.fill(true);
    return m;
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  }
  bool operator[](std::size_t i) const { return valid[i]; }
  bool operator==(const FootMask&) const = default;
};

enum class Gender : std::uint8_t { kFemale, kMale, kOther };

inline std::string to_string(Gender g) {
  switch (g) {
    case Gender::kFemale: return "female";
    case Gender::kMale: return "male";
    case Gender::kOther: return "other";
  }
  return "other";
}

inline Gender parse_gender(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "female" || lower == "f") return Gender::kFemale;
  if (lower == "male" || lower == "m") return Gender::kMale;
  if (lower == "other" || lower.empty()) return Gender::kOther;
  throw DataError("unknown gender '" + std::string(s) + "'");
}

struct SubjectMeta {
  std::string id;
  double mass_kg = 0.0;
  double height_m = 0.0;
  double experience_y = 0.0;
  Gender gender = Gender::kOther;

  void validate() const {
    if (id.empty()) throw DataError("subject id is empty");
    if (!(mass_kg > 0.0)) throw DataError("subject " + id + ": mass must be > 0");
    if (!(height_m > 0.0)) throw DataError("subject " + id + ": height must be > 0");
  }
  bool operator==(const SubjectMeta&) const = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Point2&) const = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }

// World floor-plane positions in mm.
struct FootPose {
  Point2 heel;
  Point2 toe;
  bool operator==(const FootPose&) const = default;
};

struct FootPlacement {
  std::int64_t frame_index = 0;
  std::array<FootPose, kNumFeet> feet{};

  const FootPose& operator[](Foot f) const { return feet[static_cast<std::size_t>(f)]; }
  bool operator==(const FootPlacement&) const = default;
};

// One synchronized recording at 10 Hz.
struct Take {
  SubjectMeta subject;
  std::vector<PoseFrame> poses;
  std::vector<PressureFrame> pressures;
  FootMask footmask;
  std::optional<std::vector<FootPlacement>> placements;

  std::size_t size() const { return poses.size(); }

  void validate() const {
    subject.validate();
    if (poses.size() != pressures.size())
      throw DataError("take " + subject.id + ": pose/pressure length mismatch (" +
                      std::to_string(poses.size()) + " vs " +
                      std::to_string(pressures.size()) + ")");
    if (placements && placements->size() != poses.size())
      throw DataError("take " + subject.id + ": placement length mismatch");
    for (std::size_t i = 1; i < poses.size(); ++i)
      if (poses[i].frame_index <= poses[i - 1].frame_index)
        throw DataError("take " + subject.id + ": frame indices not strictly increasing at " +
                        std::to_string(i));
  }
};

struct FrameRef {
  std::uint32_t take = 0;
  std::uint32_t frame = 0;
  bool operator==(const FrameRef&) const = default;
  auto operator<=>(const FrameRef&) const = default;
};

struct LooSplit {
  std::string test_subject;
  std::vector<FrameRef> train;
  std::vector<FrameRef> validation;
  std::vector<FrameRef> test;
};

inline std::size_t count_valid_joints(const PoseFrame& pose) {
  return static_cast<std::size_t>(std::count_if(pose.joints.begin(), pose.joints.end(),
                                                [](const Joint& j) { return j.valid(); }));
}

// Trailing slice of the concatenated LOO training block held out for validation.
struct ValidationPolicy {
  double fraction = 0.1;
};

inline std::vector<LooSplit> make_loo_splits(const std::vector<Take>& takes,
                                             ValidationPolicy policy = {}) {
  std::vector<std::string> subjects;
  for (const auto& t : takes)
    if (std::find(subjects.begin(), subjects.end(), t.subject.id) == subjects.end())
      subjects.push_back(t.subject.id);
  if (subjects.size() < 2)
    throw DataError("leave-one-subject-out needs at least 2 distinct subjects, got " +
                    std::to_string(subjects.size()));
  if (!(policy.fraction > 0.0 && policy.fraction < 1.0))
    throw UsageError("validation fraction must be in (0,1)");

  std::vector<LooSplit> splits;
  splits.reserve(subjects.size());
  for (const auto& held_out : subjects) {
    LooSplit split;
    split.test_subject = held_out;
    std::vector<FrameRef> pool;
    for (std::uint32_t t = 0; t < takes.size(); ++t) {
      auto& dst = takes[t].subject.id == held_out ? split.test : pool;
      for (std::uint32_t f = 0; f < takes[t].size(); ++f) dst.push_back({t, f});
    }
    if (pool.size() < 2)
      throw DataError("split " + held_out + ": training pool has fewer than 2 frames");
    auto n_val = static_cast<std::size_t>(
        std::floor(policy.fraction * static_cast<double>(pool.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, pool.size() - 1);
    const auto cut = static_cast<std::ptrdiff_t>(pool.size() - n_val);
    split.train.assign(pool.begin(), pool.begin() + cut);
    split.validation.assign(pool.begin() + cut, pool.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

// NaN -> 0, clip to [0, 862] kPa, zero every prexel outside the footmask.
inline PressureFrame sanitize_pressure(const PressureFrame& frame, const FootMask& mask) {
  PressureFrame out;
  for (std::size_t i = 0; i < kGridCells; ++i) {
    const float v = frame.kpa[i];
    if (!mask.valid[i] || std::isnan(v)) {
      out.kpa[i] = 0.0f;
    } else {
      out.kpa[i] = std::clamp(v, 0.0f, static_cast<float>(kPressureCeilingKpa));
    }
  }
  return out;
}

}  // namespace press2dyn
