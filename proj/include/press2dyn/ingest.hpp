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
#include <cstring>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "press2dyn/core.hpp"
#include "press2dyn/io.hpp"

namespace press2dyn {

inline constexpr int kPoseRateHz = 50;
inline constexpr int kPressureRateHz = 100;
inline constexpr int kPairRateHz = 10;
inline constexpr std::size_t kPoseStride = kPoseRateHz / kPairRateHz;
inline constexpr std::size_t kPressureStride = kPressureRateHz / kPairRateHz;
inline constexpr std::size_t kPoseCsvFields = 1 + 3 * kNumJoints;
inline constexpr std::size_t kPlacementCsvFields = 9;

// Unsynchronized recordings: poses and placements at 50 Hz, pressure at 100 Hz.
// Pressure holds the values as read, NaN included.
struct RawStreams {
  SubjectMeta subject;
  std::vector<PoseFrame> poses;
  std::vector<PressureFrame> pressures;
  FootMask footmask;
  std::optional<std::vector<FootPlacement>> placements;

  void validate() const {
    subject.validate();
    for (std::size_t i = 1; i < poses.size(); ++i)
      if (poses[i].frame_index <= poses[i - 1].frame_index)
        throw DataError("pose stream: frame indices not strictly increasing at row " + std::to_string(i));
    if (placements)
      for (std::size_t i = 1; i < placements->size(); ++i)
        if ((*placements)[i].frame_index <= (*placements)[i - 1].frame_index)
          throw DataError("placement stream: frame indices not strictly increasing at row " +
                          std::to_string(i));
  }
};

// ---------------------------------------------------------------------------
// Pose CSV

inline std::string pose_csv_header() {
  std::string h = "frame";
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const auto p = "j" + std::to_string(j);
    h += "," + p + "_x," + p + "_y," + p + "_c";
  }
  return h;
}

inline std::string format_pose_csv(const std::vector<PoseFrame>& poses) {
  std::string out = pose_csv_header() + "\n";
  for (const auto& f : poses) {
    out += std::to_string(f.frame_index);
    for (const auto& j : f.joints) {
      out += ',';
      out += io::format_double(j.x);
      out += ',';
      out += io::format_double(j.y);
      out += ',';
      out += io::format_double(j.confidence);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<PoseFrame> parse_pose_csv(const std::string& text, const std::string& source) {
  std::vector<PoseFrame> poses;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = io::split_csv(line);
    const auto where = source + ":" + std::to_string(line_no);
    if (fields.size() != kPoseCsvFields)
      throw DataError(where + ": expected " + std::to_string(kPoseCsvFields) + " fields, got " +
                      std::to_string(fields.size()));
    if (header) {
      if (fields[0] != "frame") throw DataError(where + ": missing pose CSV header");
      header = false;
      continue;
    }
    PoseFrame f;
    f.frame_index = io::parse_int(fields[0], where);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      Joint& jt = f.joints[j];
      jt.x = io::parse_double(fields[1 + 3 * j], where);
      jt.y = io::parse_double(fields[2 + 3 * j], where);
      jt.confidence = io::parse_double(fields[3 + 3 * j], where);
      if (!(jt.confidence >= 0.0 && jt.confidence <= 1.0))
        throw DataError(where + ": confidence out of [0,1] for joint " + std::to_string(j));
      if (jt.valid() && !(std::isfinite(jt.x) && std::isfinite(jt.y)))
        throw DataError(where + ": non-finite coordinate for valid joint " + std::to_string(j));
    }
    if (!poses.empty() && f.frame_index <= poses.back().frame_index)
      throw DataError(where + ": frame index " + std::to_string(f.frame_index) + " is not increasing");
    poses.push_back(f);
  }
  if (header) throw DataError(source + ": empty pose CSV");
  return poses;
}

inline std::vector<PoseFrame> read_pose_csv(const std::filesystem::path& path) {
  return parse_pose_csv(io::read_file(path), path.string());
}

inline void write_pose_csv(const std::filesystem::path& path, const std::vector<PoseFrame>& poses) {
  io::write_file(path, format_pose_csv(poses));
}

// ---------------------------------------------------------------------------
// PRSM binary: "PRSM", u32 count, then count records (f32 grids or one u8 mask).

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + b])) << (8 * b);
  return v;
}

inline std::uint32_t read_prsm_header(const std::string& bytes, const std::string& source) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "PRSM") != 0)
    throw DataError(source + ": missing PRSM header");
  return get_u32(bytes, 4);
}

}  // namespace detail

// Invalid prexels are written as NaN.
inline std::string format_pressure(const std::vector<PressureFrame>& frames, const FootMask& mask) {
  static_assert(std::numeric_limits<float>::is_iec559);
  std::string out = "PRSM";
  detail::put_u32(out, static_cast<std::uint32_t>(frames.size()));
  out.reserve(8 + frames.size() * kGridCells * 4);
  const float nan = std::numeric_limits<float>::quiet_NaN();
  for (const auto& f : frames) {
    for (std::size_t i = 0; i < kGridCells; ++i) {
      const float v = mask.valid[i] ? f.kpa[i] : nan;
      std::uint32_t bits = 0;
      std::memcpy(&bits, &v, 4);
      detail::put_u32(out, bits);
    }
  }
  return out;
}

inline std::vector<PressureFrame> parse_pressure(const std::string& bytes, const std::string& source) {
  const std::uint32_t n = detail::read_prsm_header(bytes, source);
  const std::size_t payload = bytes.size() - 8;
  if (payload % 4 != 0 || (payload / 4) % kGridCells != 0)
    throw DataError(source + ": payload of " + std::to_string(payload / 4) +
                    " values is not a whole number of 2x60x21 grids");
  if (payload / 4 / kGridCells != n)
    throw DataError(source + ": header declares " + std::to_string(n) + " frames, payload holds " +
                    std::to_string(payload / 4 / kGridCells));
  std::vector<PressureFrame> frames(n);
  std::size_t at = 8;
  for (auto& f : frames)
    for (std::size_t i = 0; i < kGridCells; ++i, at += 4) {
      const std::uint32_t bits = detail::get_u32(bytes, at);
      std::memcpy(&f.kpa[i], &bits, 4);
    }
  return frames;
}

inline std::vector<PressureFrame> read_pressure(const std::filesystem::path& path) {
  return parse_pressure(io::read_file(path), path.string());
}

inline void write_pressure(const std::filesystem::path& path, const std::vector<PressureFrame>& frames,
                           const FootMask& mask) {
  io::write_file(path, format_pressure(frames, mask));
}

inline std::string format_mask(const FootMask& mask) {
  std::string out = "PRSM";
  detail::put_u32(out, 1);
  for (bool v : mask.valid) out.push_back(v ? 1 : 0);
  return out;
}

inline FootMask parse_mask(const std::string& bytes, const std::string& source) {
  const std::uint32_t n = detail::read_prsm_header(bytes, source);
  if (n != 1 || bytes.size() != 8 + kGridCells)
    throw DataError(source + ": footmask must be a single 2x60x21 u8 grid");
  FootMask m;
  for (std::size_t i = 0; i < kGridCells; ++i) {
    const auto v = static_cast<unsigned char>(bytes[8 + i]);
    if (v > 1) throw DataError(source + ": footmask values must be 0 or 1");
    m.valid[i] = v == 1;
  }
  return m;
}

inline FootMask read_mask(const std::filesystem::path& path) { return parse_mask(io::read_file(path), path.string()); }

inline void write_mask(const std::filesystem::path& path, const FootMask& mask) {
  io::write_file(path, format_mask(mask));
}

// ---------------------------------------------------------------------------
// Placement CSV (mm)

inline std::string format_placements(const std::vector<FootPlacement>& rows) {
  std::string out = "frame,lheel_x,lheel_y,ltoe_x,ltoe_y,rheel_x,rheel_y,rtoe_x,rtoe_y\n";
  for (const auto& r : rows) {
    out += std::to_string(r.frame_index);
    for (const auto& f : r.feet)
      for (double v : {f.heel.x, f.heel.y, f.toe.x, f.toe.y}) {
        out += ',';
        out += io::format_double(v);
      }
    out += '\n';
  }
  return out;
}

inline std::vector<FootPlacement> parse_placements(const std::string& text, const std::string& source) {
  std::vector<FootPlacement> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = io::split_csv(line);
    const auto where = source + ":" + std::to_string(line_no);
    if (fields.size() != kPlacementCsvFields)
      throw DataError(where + ": expected 9 fields, got " + std::to_string(fields.size()));
    if (header) {
      if (fields[0] != "frame") throw DataError(where + ": missing placement CSV header");
      header = false;
      continue;
    }
    FootPlacement p;
    p.frame_index = io::parse_int(fields[0], where);
    for (std::size_t f = 0; f < kNumFeet; ++f) {
      FootPose& fp = p.feet[f];
      fp.heel = {io::parse_double(fields[1 + 4 * f], where), io::parse_double(fields[2 + 4 * f], where)};
      fp.toe = {io::parse_double(fields[3 + 4 * f], where), io::parse_double(fields[4 + 4 * f], where)};
      if (fp.heel == fp.toe) throw DataError(where + ": heel equals toe, foot axis undefined");
    }
    if (!rows.empty() && p.frame_index <= rows.back().frame_index)
      throw DataError(where + ": frame index is not increasing");
    rows.push_back(p);
  }
  return rows;
}

inline std::vector<FootPlacement> read_placements(const std::filesystem::path& path) {
  return parse_placements(io::read_file(path), path.string());
}

inline void write_placements(const std::filesystem::path& path, const std::vector<FootPlacement>& rows) {
  io::write_file(path, format_placements(rows));
}

// ---------------------------------------------------------------------------
// Subject metadata JSON

inline nlohmann::json meta_to_json(const SubjectMeta& m) {
  return {{"id", m.id},
          {"mass_kg", m.mass_kg},
          {"height_m", m.height_m},
          {"experience_y", m.experience_y},
          {"gender", to_string(m.gender)}};
}

inline SubjectMeta meta_from_json(const nlohmann::json& j, const std::string& source) {
  try {
    SubjectMeta m;
    for (const auto& [key, _] : j.items())
      if (key != "id" && key != "mass_kg" && key != "height_m" && key != "experience_y" && key != "gender")
        throw DataError(source + ": unknown metadata key '" + key + "'");
    m.id = j.at("id").get<std::string>();
    m.mass_kg = j.at("mass_kg").get<double>();
    m.height_m = j.at("height_m").get<double>();
    m.experience_y = j.value("experience_y", 0.0);
    m.gender = parse_gender(j.value("gender", std::string("other")));
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": " + e.what());
  }
}

inline SubjectMeta read_meta(const std::filesystem::path& path) {
  return meta_from_json(io::read_json(path), path.string());
}

// ---------------------------------------------------------------------------
// Loading and synchronization

inline RawStreams load_take(const std::filesystem::path& pose_path, const std::filesystem::path& pressure_path,
                            const std::filesystem::path& mask_path,
                            const std::optional<std::filesystem::path>& placement_path, const SubjectMeta& meta) {
  RawStreams raw;
  raw.subject = meta;
  raw.poses = read_pose_csv(pose_path);
  raw.pressures = read_pressure(pressure_path);
  raw.footmask = read_mask(mask_path);
  if (placement_path) raw.placements = read_placements(*placement_path);
  raw.validate();
  return raw;
}

// Pose row 5k pairs with pressure row 10k + offset_frames; both streams start at t = 0.
inline Take synchronize(const RawStreams& raw, std::int64_t offset_frames = 0) {
  if (raw.poses.empty()) throw DataError("synchronize: empty pose stream");
  if (raw.pressures.empty()) throw DataError("synchronize: empty pressure stream");
  raw.validate();
  const std::size_t n_pose = raw.poses.size();
  const std::size_t n_out = (n_pose + kPoseStride - 1) / kPoseStride;
  const auto n_press = static_cast<std::int64_t>(raw.pressures.size());
  for (std::size_t k = 0; k < n_out; ++k) {
    const std::int64_t p = static_cast<std::int64_t>(k * kPressureStride) + offset_frames;
    if (p < 0 || p >= n_press) {
      std::size_t last = k;
      while (last + 1 < n_out) {
        const std::int64_t q = static_cast<std::int64_t>((last + 1) * kPressureStride) + offset_frames;
        if (q >= 0 && q < n_press) break;
        ++last;
      }
      throw DataError("synchronize: pressure stream (" + std::to_string(n_press) +
                      " frames, offset " + std::to_string(offset_frames) +
                      ") does not cover pose rows " + std::to_string(k * kPoseStride) + ".." +
                      std::to_string(std::min(n_pose - 1, last * kPoseStride + kPoseStride - 1)) +
                      "; that span would be dropped");
    }
  }
  if (raw.placements && raw.placements->size() < (n_out - 1) * kPoseStride + 1)
    throw DataError("synchronize: placement stream shorter than pose stream");

  Take take;
  take.subject = raw.subject;
  take.footmask = raw.footmask;
  take.poses.reserve(n_out);
  take.pressures.reserve(n_out);
  if (raw.placements) take.placements.emplace();
  for (std::size_t k = 0; k < n_out; ++k) {
    take.poses.push_back(raw.poses[k * kPoseStride]);
    const auto p = static_cast<std::size_t>(static_cast<std::int64_t>(k * kPressureStride) + offset_frames);
    take.pressures.push_back(sanitize_pressure(raw.pressures[p], raw.footmask));
    if (raw.placements) take.placements->push_back((*raw.placements)[k * kPoseStride]);
  }
  take.validate();
  return take;
}

// ---------------------------------------------------------------------------
// Directory layouts. A take directory holds 10 Hz synchronized data and a
// take.json marker; a raw directory holds 50/100 Hz streams and raw.json.

inline constexpr const char* kPoseFile = "pose.csv";
inline constexpr const char* kPressureFile = "pressure.prsm";
inline constexpr const char* kMaskFile = "mask.prsm";
inline constexpr const char* kPlacementFile = "placements.csv";
inline constexpr const char* kMetaFile = "meta.json";

inline void save_take(const std::filesystem::path& dir, const Take& take) {
  take.validate();
  std::filesystem::create_directories(dir);
  write_pose_csv(dir / kPoseFile, take.poses);
  write_pressure(dir / kPressureFile, take.pressures, take.footmask);
  write_mask(dir / kMaskFile, take.footmask);
  if (take.placements) write_placements(dir / kPlacementFile, *take.placements);
  else std::filesystem::remove(dir / kPlacementFile);
  io::write_json(dir / kMetaFile, meta_to_json(take.subject));
  io::write_json(dir / "take.json", {{"rate_hz", kPairRateHz}, {"frames", take.size()}});
}

inline Take load_take_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "take.json"))
    throw DataError(dir.string() + ": not a synchronized take directory (take.json missing)");
  const auto marker = io::read_json(dir / "take.json");
  if (marker.value("rate_hz", 0) != kPairRateHz) throw DataError(dir.string() + ": take.json rate is not 10 Hz");
  Take take;
  take.subject = read_meta(dir / kMetaFile);
  take.poses = read_pose_csv(dir / kPoseFile);
  take.footmask = read_mask(dir / kMaskFile);
  auto pressures = read_pressure(dir / kPressureFile);
  take.pressures.reserve(pressures.size());
  for (const auto& p : pressures) take.pressures.push_back(sanitize_pressure(p, take.footmask));
  if (std::filesystem::exists(dir / kPlacementFile)) take.placements = read_placements(dir / kPlacementFile);
  take.validate();
  return take;
}

inline void save_raw(const std::filesystem::path& dir, const RawStreams& raw) {
  std::filesystem::create_directories(dir);
  write_pose_csv(dir / kPoseFile, raw.poses);
  write_pressure(dir / kPressureFile, raw.pressures, raw.footmask);
  write_mask(dir / kMaskFile, raw.footmask);
  if (raw.placements) write_placements(dir / kPlacementFile, *raw.placements);
  io::write_json(dir / kMetaFile, meta_to_json(raw.subject));
  io::write_json(dir / "raw.json", {{"pose_hz", kPoseRateHz}, {"pressure_hz", kPressureRateHz}});
}

inline RawStreams load_raw_dir(const std::filesystem::path& dir) {
  std::optional<std::filesystem::path> placements;
  if (std::filesystem::exists(dir / kPlacementFile)) placements = dir / kPlacementFile;
  return load_take(dir / kPoseFile, dir / kPressureFile, dir / kMaskFile, placements, read_meta(dir / kMetaFile));
}

// Take directories of a cohort: the order listed in cohort.json when present,
// otherwise every subdirectory holding take.json in lexicographic order.
inline std::vector<std::filesystem::path> list_take_dirs(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs;
  if (std::filesystem::exists(root / "take.json")) return {root};
  if (std::filesystem::exists(root / "cohort.json")) {
    const auto cohort = io::read_json(root / "cohort.json");
    for (const auto& t : cohort.at("takes")) dirs.push_back(root / t.get<std::string>());
  } else if (std::filesystem::is_directory(root)) {
    for (const auto& e : std::filesystem::directory_iterator(root))
      if (e.is_directory() && std::filesystem::exists(e.path() / "take.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
  }
  if (dirs.empty()) throw DataError(root.string() + ": no take directories found");
  return dirs;
}

inline std::vector<Take> load_cohort(const std::filesystem::path& root) {
  std::vector<Take> takes;
  for (const auto& d : list_take_dirs(root)) takes.push_back(load_take_dir(d));
  return takes;
}

// ---------------------------------------------------------------------------
// Synthetic generator
//
// Latent state evolves as Ornstein-Uhlenbeck processes sampled at 10 Hz.
// Pressure oracle: total force m*g, split between the feet by
// logistic(4 * lateral pelvis offset toward the left ankle / stance half width),
// split between heel and toe by logistic(-3 * forward lean), each part
// deposited as a Gaussian blob normalized over the footmask so that
// sum(p * prexel area) equals the force exactly before f32 rounding.

struct SynthOptions {
  // Image scale for a subject standing at the reference camera distance.
  double pixels_per_mm = 0.3;
  // Pinhole depth of the reference position; forward travel moves the subject
  // toward the camera. 0 selects an orthographic camera.
  double camera_distance_mm = 4000.0;
  double pose_noise_px = 3.0;
  double joint_dropout = 0.02;
  double midhip_dropout = 0.005;
};

namespace synth {

// Right-foot outline: (toe-to-heel row, centre column, half width).
struct OutlinePoint {
  double row, centre, half_width;
};
inline constexpr std::array<OutlinePoint, 9> kOutline = {{{0, 11.0, 3.0},
                                                          {3, 10.5, 6.5},
                                                          {10, 10.0, 9.5},
                                                          {22, 10.0, 9.5},
                                                          {32, 9.0, 6.5},
                                                          {42, 9.5, 6.5},
                                                          {50, 10.0, 7.5},
                                                          {56, 10.0, 6.5},
                                                          {59, 10.0, 3.5}}};

inline OutlinePoint outline_at(double row) {
  for (std::size_t i = 1; i < kOutline.size(); ++i) {
    if (row <= kOutline[i].row) {
      const auto& a = kOutline[i - 1];
      const auto& b = kOutline[i];
      const double t = (row - a.row) / (b.row - a.row);
      return {row, a.centre + t * (b.centre - a.centre), a.half_width + t * (b.half_width - a.half_width)};
    }
  }
  return kOutline.back();
}

// Column as seen on the right-foot template; the left foot is its mirror image.
inline double template_col(std::size_t foot, std::size_t col) {
  return foot == static_cast<std::size_t>(Foot::kLeft) ? static_cast<double>(kGridCols - 1 - col)
                                                       : static_cast<double>(col);
}

inline constexpr double kHeelRow = 48.0, kToeRow = 14.0, kBlobCol = 10.0;
inline constexpr double kHeelSigmaRow = 4.5, kHeelSigmaCol = 2.8;
inline constexpr double kToeSigmaRow = 6.0, kToeSigmaCol = 3.5;

struct Latent {
  double sway = 0.0;        // pelvis offset toward the left ankle, mm
  double lean = 0.0;        // forward lean, unitless
  double half_width = 150;  // stance half width, mm
  double knee = 0.0;
  double tilt = 0.0;        // lateral torso tilt, rad
  double head = 0.0;
  std::array<double, 4> arms{};
  std::array<double, 2> yaw{};
  std::array<double, 2> roll{};
  double cam_x = 0.0, cam_y = 0.0;
  double travel_x = 0.0, travel_y = 0.0;  // world drift, mm
};

struct Process {
  double mean, stddev, theta;  // stationary mean and std, reversion rate per s
};

class LatentWalk {
 public:
  LatentWalk(std::uint64_t seed, const SubjectMeta& meta) : rng_(seed) {
    std::normal_distribution<double> n01;
    // Per-subject habits.
    const double lean_bias = 0.25 * n01(rng_);
    const double width_mean = 150.0 + 15.0 * n01(rng_);
    procs_ = {Process{0.0, 90.0, 0.5},           Process{lean_bias, 0.55, 0.6},
              Process{width_mean, 22.0, 0.15},   Process{0.0, 1.0, 0.5},
              Process{0.0, 0.06, 0.7},           Process{0.0, 0.35, 0.8},
              Process{0.0, 0.6, 0.8},            Process{0.0, 0.5, 0.8},
              Process{0.0, 0.6, 0.8},            Process{0.0, 0.5, 0.8},
              Process{0.0, 0.15, 0.4},           Process{0.0, 0.15, 0.4},
              Process{0.0, 0.6, 0.6},            Process{0.0, 0.6, 0.6},
              Process{0.0, 20.0, 0.05},          Process{0.0, 10.0, 0.05},
              Process{0.0, 250.0, 0.02},         Process{0.0, 250.0, 0.02}};
    (void)meta;
    values_.resize(procs_.size());
    for (std::size_t i = 0; i < procs_.size(); ++i) values_[i] = procs_[i].mean + procs_[i].stddev * n01(rng_);
  }

  Latent current() const {
    Latent l;
    l.sway = values_[0];
    l.lean = values_[1];
    l.half_width = std::max(60.0, values_[2]);
    l.knee = 0.5 + 0.3 * std::tanh(values_[3]);
    l.tilt = values_[4];
    l.head = values_[5];
    for (std::size_t a = 0; a < 4; ++a) l.arms[a] = values_[6 + a];
    l.yaw = {values_[10], values_[11]};
    l.roll = {values_[12], values_[13]};
    l.cam_x = values_[14];
    l.cam_y = values_[15];
    l.travel_x = values_[16];
    l.travel_y = values_[17];
    return l;
  }

  void advance(double dt) {
    std::normal_distribution<double> n01;
    for (std::size_t i = 0; i < procs_.size(); ++i) {
      const auto& p = procs_[i];
      const double a = std::exp(-p.theta * dt);
      values_[i] = p.mean + a * (values_[i] - p.mean) + p.stddev * std::sqrt(1.0 - a * a) * n01(rng_);
    }
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::vector<Process> procs_;
  std::vector<double> values_;
};

inline double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline double pixel_scale(const Latent& l, const SynthOptions& opt) {
  if (opt.camera_distance_mm <= 0.0) return opt.pixels_per_mm;
  const double depth = std::max(0.25 * opt.camera_distance_mm, opt.camera_distance_mm - l.travel_y);
  return opt.pixels_per_mm * opt.camera_distance_mm / depth;
}

// Noise-free Body25 positions in image pixels.
inline std::array<Point2, kNumJoints> skeleton(const Latent& l, const SubjectMeta& meta, const SynthOptions& opt) {
  const double k = meta.height_m / 1.65;
  std::array<Point2, kNumJoints> mm{};  // body frame: x toward subject's left (image right), y up
  auto at = [&](BodyJoint j) -> Point2& { return mm[index_of(j)]; };
  const double ankle_y = -(820.0 - 60.0 * l.knee) * k;
  const Point2 lank{l.half_width - l.sway, ankle_y};
  const Point2 rank{-l.half_width - l.sway, ankle_y};
  at(BodyJoint::kMidHip) = {0.0, 0.0};
  at(BodyJoint::kLHip) = {95.0 * k, 0.0};
  at(BodyJoint::kRHip) = {-95.0 * k, 0.0};
  at(BodyJoint::kLAnkle) = lank;
  at(BodyJoint::kRAnkle) = rank;
  at(BodyJoint::kLKnee) = {(95.0 * k + lank.x) / 2 + (30.0 * l.knee + 25.0 * l.roll[0]) * k, ankle_y / 2};
  at(BodyJoint::kRKnee) = {(-95.0 * k + rank.x) / 2 - (30.0 * l.knee + 25.0 * l.roll[1]) * k, ankle_y / 2};
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;  // outward direction
    const Point2 ank = side == 0 ? lank : rank;
    const double toe_shift = 60.0 * k * std::sin(l.yaw[side]);
    const auto heel = side == 0 ? BodyJoint::kLHeel : BodyJoint::kRHeel;
    const auto big = side == 0 ? BodyJoint::kLBigToe : BodyJoint::kRBigToe;
    const auto small = side == 0 ? BodyJoint::kLSmallToe : BodyJoint::kRSmallToe;
    at(heel) = {ank.x - s * 5.0 * k, ank.y - 50.0 * k};
    at(big) = {ank.x - s * 25.0 * k + toe_shift, ank.y - 80.0 * k};
    at(small) = {ank.x + s * 35.0 * k + toe_shift, ank.y - 75.0 * k};
  }
  const double drop = 40.0 * k * l.lean;
  at(BodyJoint::kNeck) = {0.0, 500.0 * k - 0.5 * drop};
  at(BodyJoint::kNose) = {30.0 * k * l.head, 640.0 * k - drop};
  at(BodyJoint::kLEye) = {(33.0 + 30.0 * l.head) * k, 670.0 * k - drop};
  at(BodyJoint::kREye) = {(-33.0 + 30.0 * l.head) * k, 670.0 * k - drop};
  at(BodyJoint::kLEar) = {(75.0 + 15.0 * l.head) * k, 655.0 * k - drop};
  at(BodyJoint::kREar) = {(-75.0 + 15.0 * l.head) * k, 655.0 * k - drop};
  for (int side = 0; side < 2; ++side) {
    const double s = side == 0 ? 1.0 : -1.0;
    const Point2 shoulder{s * 180.0 * k, 470.0 * k - 0.5 * drop};
    const double abduct = 0.9 + 0.6 * l.arms[2 * side];
    const double flex = abduct + 0.6 + 0.5 * l.arms[2 * side + 1];
    const Point2 elbow = shoulder + Point2{s * std::sin(abduct), -std::cos(abduct)} * (280.0 * k);
    const Point2 wrist = elbow + Point2{s * std::sin(flex), -std::cos(flex)} * (250.0 * k);
    at(side == 0 ? BodyJoint::kLShoulder : BodyJoint::kRShoulder) = shoulder;
    at(side == 0 ? BodyJoint::kLElbow : BodyJoint::kRElbow) = elbow;
    at(side == 0 ? BodyJoint::kLWrist : BodyJoint::kRWrist) = wrist;
  }
  // Upper body tilts about the mid-hip.
  const double c = std::cos(l.tilt), sn = std::sin(l.tilt);
  for (BodyJoint j : {BodyJoint::kNeck, BodyJoint::kNose, BodyJoint::kLEye, BodyJoint::kREye, BodyJoint::kLEar,
                      BodyJoint::kREar, BodyJoint::kLShoulder, BodyJoint::kRShoulder, BodyJoint::kLElbow,
                      BodyJoint::kRElbow, BodyJoint::kLWrist, BodyJoint::kRWrist}) {
    const Point2 p = at(j);
    at(j) = {c * p.x - sn * p.y, sn * p.x + c * p.y};
  }
  const double ppm = pixel_scale(l, opt);
  std::array<Point2, kNumJoints> px{};
  for (std::size_t j = 0; j < kNumJoints; ++j)
    px[j] = {640.0 + l.cam_x + ppm * mm[j].x, 360.0 + l.cam_y - ppm * mm[j].y};
  return px;
}

}  // namespace synth

// Fixed foot-shaped insole mask; the left foot mirrors the right.
inline FootMask synthetic_footmask() {
  FootMask m;
  for (std::size_t f = 0; f < kNumFeet; ++f)
    for (std::size_t r = 0; r < kGridRows; ++r) {
      const auto o = synth::outline_at(static_cast<double>(r));
      for (std::size_t c = 0; c < kGridCols; ++c)
        m.valid[grid_index(f, r, c)] = std::abs(synth::template_col(f, c) - o.centre) <= o.half_width;
    }
  return m;
}

// Fraction of body weight on the left foot.
inline double left_weight_fraction(double midhip_x, double left_ankle_x, double right_ankle_x, double half_width) {
  const double mid = 0.5 * (left_ankle_x + right_ankle_x);
  const double toward_left = (left_ankle_x >= right_ankle_x ? 1.0 : -1.0) * (midhip_x - mid);
  return synth::logistic(4.0 * toward_left / half_width);
}

inline double heel_weight_fraction(double lean) { return synth::logistic(-3.0 * lean); }

// Oracle pressure for the given per-foot forces (N), heel share and lateral roll.
inline PressureFrame oracle_pressure(const FootMask& mask, const std::array<double, 2>& force_n, double heel_frac,
                                     const std::array<double, 2>& roll) {
  PressureFrame out;
  const double area_m2 = kPrexelAreaMm2 * 1e-6;
  for (std::size_t f = 0; f < kNumFeet; ++f) {
    std::array<double, kFootCells> heel{}, toe{};
    double heel_sum = 0.0, toe_sum = 0.0;
    const double col0 = synth::kBlobCol + 2.0 * std::tanh(roll[f]);
    for (std::size_t r = 0; r < kGridRows; ++r)
      for (std::size_t c = 0; c < kGridCols; ++c) {
        const std::size_t i = r * kGridCols + c;
        if (!mask.valid[grid_index(f, r, c)]) continue;
        const double rr = static_cast<double>(r), cc = synth::template_col(f, c);
        const double dh = (rr - synth::kHeelRow) / synth::kHeelSigmaRow, ch = (cc - col0) / synth::kHeelSigmaCol;
        const double dt = (rr - synth::kToeRow) / synth::kToeSigmaRow, ct = (cc - col0) / synth::kToeSigmaCol;
        heel[i] = std::exp(-0.5 * (dh * dh + ch * ch));
        toe[i] = std::exp(-0.5 * (dt * dt + ct * ct));
        heel_sum += heel[i];
        toe_sum += toe[i];
      }
    for (std::size_t i = 0; i < kFootCells; ++i) {
      const double share = heel_frac * heel[i] / heel_sum + (1.0 - heel_frac) * toe[i] / toe_sum;
      const double kpa = force_n[f] * share / area_m2 / 1000.0;
      out.kpa[f * kFootCells + i] = static_cast<float>(std::min(kpa, kPressureCeilingKpa));
    }
  }
  return out;
}

// Deterministic 10 Hz take; pose frame k carries raw 50 Hz index 5k.
inline Take generate_synthetic_take(std::uint64_t seed, std::size_t n_frames, const SubjectMeta& meta,
                                    const SynthOptions& opt = {}) {
  if (n_frames < 1) throw UsageError("synthetic take needs at least 1 frame");
  meta.validate();
  Take take;
  take.subject = meta;
  take.footmask = synthetic_footmask();
  take.placements.emplace();
  synth::LatentWalk walk(seed, meta);
  std::mt19937_64 noise_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, opt.pose_noise_px);
  std::uniform_real_distribution<double> conf(0.55, 0.95);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double force = meta.mass_kg * kGravity;
  constexpr double kFootLengthMm = (kGridRows - 1) * kPrexelPitchMm;
  for (std::size_t k = 0; k < n_frames; ++k) {
    if (k > 0) walk.advance(1.0 / kPairRateHz);
    const synth::Latent l = walk.current();
    const auto px = synth::skeleton(l, meta, opt);

    PoseFrame pose;
    pose.frame_index = static_cast<std::int64_t>(k * kPoseStride);
    for (std::size_t j = 0; j < kNumJoints; ++j) {
      const double dx = noise(noise_rng), dy = noise(noise_rng), c = conf(noise_rng);
      const double p_drop = j == kMidHip ? opt.midhip_dropout : opt.joint_dropout;
      if (u01(noise_rng) < p_drop) continue;
      pose.joints[j] = {px[j].x + dx, px[j].y + dy, c};
    }
    take.poses.push_back(pose);

    const double left = left_weight_fraction(px[kMidHip].x, px[index_of(BodyJoint::kLAnkle)].x,
                                             px[index_of(BodyJoint::kRAnkle)].x,
                                             l.half_width * synth::pixel_scale(l, opt));
    take.pressures.push_back(
        oracle_pressure(take.footmask, {left * force, (1.0 - left) * force}, heel_weight_fraction(l.lean), l.roll));

    FootPlacement place;
    place.frame_index = pose.frame_index;
    for (std::size_t f = 0; f < kNumFeet; ++f) {
      const double side = f == static_cast<std::size_t>(Foot::kLeft) ? 1.0 : -1.0;
      const Point2 heel{l.travel_x + side * l.half_width, l.travel_y};
      const double yaw = side * l.yaw[f];
      place.feet[f] = {heel, heel + Point2{std::sin(yaw), std::cos(yaw)} * kFootLengthMm};
    }
    take.placements->push_back(place);
  }
  take.validate();
  return take;
}

// Demographics cycled for synthetic cohorts.
inline SubjectMeta reference_subject(std::size_t i) {
  static constexpr std::array<double, 6> mass = {52.20, 66.67, 63.50, 77.11, 60.00, 55.00};
  static constexpr std::array<double, 6> height = {1.60, 1.72, 1.60, 1.70, 1.56, 1.54};
  static constexpr std::array<double, 6> experience = {9, 10, 6, 9, 5, 32};
  static constexpr std::array<Gender, 6> gender = {Gender::kFemale, Gender::kMale,   Gender::kFemale,
                                                   Gender::kMale,   Gender::kFemale, Gender::kFemale};
  const std::size_t r = i % 6;
  return {"S" + std::to_string(i + 1), mass[r], height[r], experience[r], gender[r]};
}

inline std::uint64_t subject_seed(std::uint64_t seed, std::size_t i) { return seed * 1000 + i; }

inline std::vector<Take> generate_synthetic_cohort(std::uint64_t seed, std::size_t n_frames, std::size_t n_subjects,
                                                   const SynthOptions& opt = {}) {
  std::vector<Take> takes;
  for (std::size_t i = 0; i < n_subjects; ++i)
    takes.push_back(generate_synthetic_take(subject_seed(seed, i), n_frames, reference_subject(i), opt));
  return takes;
}

// 50/100 Hz streams that synchronize back to the given take exactly:
// keyframes are copied verbatim and intermediate rows interpolate linearly.
inline RawStreams expand_to_raw(const Take& take) {
  RawStreams raw;
  raw.subject = take.subject;
  raw.footmask = take.footmask;
  const std::size_t n = take.size();
  auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  for (std::size_t k = 0; k < n; ++k) {
    const PoseFrame& a = take.poses[k];
    const PoseFrame& b = take.poses[std::min(k + 1, n - 1)];
    for (std::size_t s = 0; s < kPoseStride; ++s) {
      const double t = static_cast<double>(s) / kPoseStride;
      PoseFrame f = a;
      f.frame_index = a.frame_index + static_cast<std::int64_t>(s);
      if (s > 0)
        for (std::size_t j = 0; j < kNumJoints; ++j)
          if (a.joints[j].valid() && b.joints[j].valid())
            f.joints[j] = {lerp(a.joints[j].x, b.joints[j].x, t), lerp(a.joints[j].y, b.joints[j].y, t),
                           lerp(a.joints[j].confidence, b.joints[j].confidence, t)};
      raw.poses.push_back(f);
    }
    const PressureFrame& pa = take.pressures[k];
    const PressureFrame& pb = take.pressures[std::min(k + 1, n - 1)];
    for (std::size_t s = 0; s < kPressureStride; ++s) {
      const double t = static_cast<double>(s) / kPressureStride;
      PressureFrame f;
      for (std::size_t i = 0; i < kGridCells; ++i) f.kpa[i] = static_cast<float>(lerp(pa.kpa[i], pb.kpa[i], t));
      raw.pressures.push_back(f);
    }
  }
  if (take.placements) {
    raw.placements.emplace();
    for (std::size_t k = 0; k < n; ++k) {
      const FootPlacement& a = (*take.placements)[k];
      const FootPlacement& b = (*take.placements)[std::min(k + 1, n - 1)];
      for (std::size_t s = 0; s < kPoseStride; ++s) {
        const double t = static_cast<double>(s) / kPoseStride;
        FootPlacement p = a;
        p.frame_index = a.frame_index + static_cast<std::int64_t>(s);
        for (std::size_t f = 0; f < kNumFeet; ++f)
          p.feet[f] = {a.feet[f].heel + (b.feet[f].heel - a.feet[f].heel) * t,
                       a.feet[f].toe + (b.feet[f].toe - a.feet[f].toe) * t};
        raw.placements->push_back(p);
      }
    }
  }
  return raw;
}

}  // namespace press2dyn
