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

#include <cmath>
#include <filesystem>
#include <numeric>

#include <gtest/gtest.h>

#include "press2dyn/ingest.hpp"
#include "test_util.hpp"

namespace press2dyn {
namespace {

const SubjectMeta kMeta{"S1", 52.20, 1.60, 9, Gender::kFemale};

double force_from(const PressureFrame& p, std::size_t foot) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFootCells; ++i) s += p.kpa[foot * kFootCells + i];
  return s * kPrexelAreaMm2 * 1e-3;  // kPa * mm^2 -> N
}

TEST(PoseCsv, RoundTripThreeFrames) {
  const auto dir = test::scratch_dir("pose_csv");
  Take t = generate_synthetic_take(1, 3, kMeta);
  write_pose_csv(dir / "p.csv", t.poses);
  const auto back = read_pose_csv(dir / "p.csv");
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back, t.poses);
}

TEST(PoseCsv, RejectsShortRow) {
  std::string text = pose_csv_header() + "\n0";
  for (int i = 0; i < 73; ++i) text += ",1";
  text += "\n";
  try {
    parse_pose_csv(text, "t.csv");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("got 74"), std::string::npos);
  }
}

TEST(PoseCsv, RejectsNonMonotonicFrames) {
  PoseFrame a, b;
  a.frame_index = 5;
  b.frame_index = 5;
  EXPECT_THROW(parse_pose_csv(format_pose_csv({a, b}), "t"), DataError);
}

TEST(Prsm, RejectsPartialGrid) {
  std::string bytes = "PRSM";
  detail::put_u32(bytes, 1);
  bytes.append(4 * 1259 * 2 + 4, '\0');  // 2519 values
  EXPECT_THROW(parse_pressure(bytes, "x"), DataError);
}

TEST(Prsm, InvalidPrexelsAreNanOnDisk) {
  FootMask mask = FootMask::all_valid();
  mask.valid[7] = false;
  PressureFrame f;
  f.kpa[7] = 0.0f;
  f.kpa[8] = 12.5f;
  const auto back = parse_pressure(format_pressure({f}, mask), "x");
  EXPECT_TRUE(std::isnan(back[0].kpa[7]));
  EXPECT_EQ(back[0].kpa[8], 12.5f);
}

TEST(Mask, RoundTripAndValueCheck) {
  const FootMask m = synthetic_footmask();
  EXPECT_EQ(parse_mask(format_mask(m), "m"), m);
  std::string bad = format_mask(m);
  bad[20] = 2;
  EXPECT_THROW(parse_mask(bad, "m"), DataError);
}

TEST(Placements, RoundTripAndDegenerateAxis) {
  FootPlacement p;
  p.feet[0] = {{0, 0}, {0, 299.72}};
  p.feet[1] = {{-300.5, 1}, {-290.25, 300}};
  EXPECT_EQ(parse_placements(format_placements({p}), "x").front(), p);
  p.feet[1].toe = p.feet[1].heel;
  EXPECT_THROW(parse_placements(format_placements({p}), "x"), DataError);
}

TEST(Meta, RejectsUnknownKeysAndBadMass) {
  auto j = meta_to_json(kMeta);
  EXPECT_EQ(meta_from_json(j, "m"), kMeta);
  j["weight"] = 3;
  EXPECT_THROW(meta_from_json(j, "m"), DataError);
  auto k = meta_to_json(kMeta);
  k["mass_kg"] = -1;
  EXPECT_THROW(meta_from_json(k, "m"), DataError);
}

RawStreams raw_of(std::size_t n_pose, std::size_t n_press) {
  RawStreams r;
  r.subject = kMeta;
  r.footmask = FootMask::all_valid();
  for (std::size_t i = 0; i < n_pose; ++i) {
    PoseFrame p;
    p.frame_index = static_cast<std::int64_t>(i);
    p.joints[0] = {static_cast<double>(i), 0.0, 1.0};
    r.poses.push_back(p);
  }
  for (std::size_t i = 0; i < n_press; ++i) {
    PressureFrame f;
    f.kpa[0] = static_cast<float>(i);
    r.pressures.push_back(f);
  }
  return r;
}

TEST(Synchronize, SubsamplingArithmetic) {
  EXPECT_EQ(synchronize(raw_of(500, 1000)).size(), 100u);
  const Take t = synchronize(raw_of(50, 100));
  ASSERT_EQ(t.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(t.poses[k].joints[0].x, 5.0 * static_cast<double>(k));
    EXPECT_EQ(t.pressures[k].kpa[0], 10.0f * static_cast<float>(k));
  }
}

TEST(Synchronize, EmptyOrShortStreamsAreErrors) {
  EXPECT_THROW(synchronize(raw_of(0, 100)), DataError);
  EXPECT_THROW(synchronize(raw_of(50, 0)), DataError);
  try {
    synchronize(raw_of(50, 60));
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("30..49"), std::string::npos) << e.what();
  }
}

TEST(Synchronize, OffsetOverride) {
  const Take t = synchronize(raw_of(50, 103), 3);
  EXPECT_EQ(t.pressures[1].kpa[0], 13.0f);
  EXPECT_THROW(synchronize(raw_of(50, 100), -1), DataError);
}

TEST(Synchronize, ShiftingBothStreamsShiftsPairing) {
  const RawStreams r = raw_of(60, 120);
  RawStreams shifted = r;
  shifted.poses.erase(shifted.poses.begin(), shifted.poses.begin() + 5);
  shifted.pressures.erase(shifted.pressures.begin(), shifted.pressures.begin() + 10);
  const Take a = synchronize(r), b = synchronize(shifted);
  ASSERT_EQ(b.size() + 1, a.size());
  for (std::size_t k = 0; k < b.size(); ++k) {
    EXPECT_EQ(b.poses[k], a.poses[k + 1]);
    EXPECT_EQ(b.pressures[k], a.pressures[k + 1]);
  }
}

TEST(Synchronize, SanitizesPressure) {
  RawStreams r = raw_of(5, 10);
  r.pressures[0].kpa[0] = 5000.0f;
  r.footmask.valid[1] = false;
  r.pressures[0].kpa[1] = 3.0f;
  const Take t = synchronize(r);
  EXPECT_EQ(t.pressures[0].kpa[0], 862.0f);
  EXPECT_EQ(t.pressures[0].kpa[1], 0.0f);
}

TEST(Synthetic, DeterministicForSeed) {
  const Take a = generate_synthetic_take(7, 40, kMeta);
  const Take b = generate_synthetic_take(7, 40, kMeta);
  EXPECT_EQ(a.poses, b.poses);
  EXPECT_EQ(a.pressures, b.pressures);
  EXPECT_EQ(*a.placements, *b.placements);
  const Take c = generate_synthetic_take(8, 40, kMeta);
  EXPECT_NE(a.poses, c.poses);
}

TEST(Synthetic, CenteredPelvisSplitsWeightEvenly) {
  EXPECT_NEAR(left_weight_fraction(100.0, 130.0, 70.0, 30.0), 0.5, 1e-12);
  const FootMask m = synthetic_footmask();
  const double force = kMeta.mass_kg * kGravity;
  const PressureFrame p = oracle_pressure(m, {0.5 * force, 0.5 * force}, 0.5, {0.0, 0.0});
  EXPECT_NEAR(force_from(p, 0) / (force_from(p, 0) + force_from(p, 1)), 0.5, 1e-9);
  // Toward the left ankle shifts weight left.
  EXPECT_GT(left_weight_fraction(120.0, 130.0, 70.0, 30.0), 0.5);
}

TEST(Synthetic, TotalForceMatchesBodyWeight) {
  const Take t = generate_synthetic_take(3, 200, kMeta);
  const double target = kMeta.mass_kg * kGravity;
  for (const auto& p : t.pressures) EXPECT_NEAR((force_from(p, 0) + force_from(p, 1)) / target, 1.0, 0.01);
}

TEST(Synthetic, PressureInsideMaskAndBelowCeiling) {
  const Take t = generate_synthetic_take(4, 200, reference_subject(3));
  for (const auto& p : t.pressures)
    for (std::size_t i = 0; i < kGridCells; ++i) {
      EXPECT_LE(p.kpa[i], 862.0f);
      EXPECT_GE(p.kpa[i], 0.0f);
      if (!t.footmask.valid[i]) {
        EXPECT_EQ(p.kpa[i], 0.0f);
      }
    }
}

TEST(Synthetic, FootmaskIsMirrored) {
  const FootMask m = synthetic_footmask();
  EXPECT_GT(m.count(), 1400u);
  for (std::size_t r = 0; r < kGridRows; ++r)
    for (std::size_t c = 0; c < kGridCols; ++c)
      EXPECT_EQ(m.valid[grid_index(Foot::kLeft, r, c)], m.valid[grid_index(Foot::kRight, r, kGridCols - 1 - c)]);
}

TEST(Synthetic, RawExpansionSynchronizesBack) {
  const Take t = generate_synthetic_take(5, 12, kMeta);
  const RawStreams raw = expand_to_raw(t);
  EXPECT_EQ(raw.poses.size(), 60u);
  EXPECT_EQ(raw.pressures.size(), 120u);
  const Take back = synchronize(raw);
  EXPECT_EQ(back.poses, t.poses);
  EXPECT_EQ(back.pressures, t.pressures);
  EXPECT_EQ(*back.placements, *t.placements);
}

TEST(TakeDir, SaveLoadSaveIsByteIdentical) {
  const auto dir = test::scratch_dir("takedir");
  const Take t = generate_synthetic_take(6, 25, kMeta);
  save_take(dir / "a", t);
  const Take back = load_take_dir(dir / "a");
  EXPECT_EQ(back.poses, t.poses);
  EXPECT_EQ(back.pressures, t.pressures);
  save_take(dir / "b", back);
  for (const char* f : {kPoseFile, kPressureFile, kMaskFile, kPlacementFile, kMetaFile, "take.json"})
    EXPECT_EQ(io::read_file(dir / "a" / f), io::read_file(dir / "b" / f)) << f;
}

TEST(RawDir, LoadTakeThenSynchronize) {
  const auto dir = test::scratch_dir("rawdir");
  const Take t = generate_synthetic_take(9, 6, kMeta);
  save_raw(dir, expand_to_raw(t));
  const RawStreams raw = load_raw_dir(dir);
  EXPECT_EQ(raw.poses.size(), 30u);
  EXPECT_EQ(synchronize(raw).pressures, t.pressures);
}

}  // namespace
}  // namespace press2dyn
