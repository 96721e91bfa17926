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
#include <cstddef>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "press2dyn/core.hpp"
#include "press2dyn/errors.hpp"
#include "press2dyn/io.hpp"

// Per-frame pressure error metrics and their subject-level aggregates.
namespace press2dyn {

namespace metrics_detail {

inline std::size_t mask_count(const FootMask& mask) {
  return static_cast<std::size_t>(std::count(mask.valid.begin(), mask.valid.end(), true));
}

// Unit-sum distribution over valid prexels; negative values count as 0.
// Returns false when the frame carries no mass.
template <class G>
bool distribution(const G& grid, const FootMask& mask, GridD& out) {
  out.fill(0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (mask.valid[i]) total += std::max(0.0, cell_value(grid, i));
  if (!(total > 0.0)) return false;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (mask.valid[i]) out[i] = std::max(0.0, cell_value(grid, i)) / total;
  return true;
}

}  // namespace metrics_detail

struct MetricOptions {
  double eps = 1e-12;
  // Prexels with gt strictly above this count as active for information gain.
  double activity_threshold_kpa = 3.0;
};

// A metric value plus a flag for inputs where it is undefined (value then 0).
struct MetricValue {
  double value = 0.0;
  bool degenerate = false;
};

template <class P, class G>
double mae_frame(const P& pred, const G& gt, const FootMask& mask) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < kGridCells; ++i) {
    if (!mask.valid[i]) continue;
    sum += std::abs(cell_value(pred, i) - cell_value(gt, i));
    ++n;
  }
  if (n == 0) throw DataError("mae: footmask selects no prexels");
  return sum / static_cast<double>(n);
}

// Histogram intersection of the two unit-sum distributions.
template <class P, class G>
MetricValue sim(const P& pred, const G& gt, const FootMask& mask) {
  GridD p, q;
  const bool ok_p = metrics_detail::distribution(pred, mask, p);
  const bool ok_q = metrics_detail::distribution(gt, mask, q);
  if (!ok_p || !ok_q) return {0.0, true};
  double s = 0.0;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (mask.valid[i]) s += std::min(p[i], q[i]);
  return {std::min(1.0, s), false};
}

// KL(Q || P) in nats with Q the gt distribution.
template <class P, class G>
MetricValue kld(const P& pred, const G& gt, const FootMask& mask, const MetricOptions& opt = {}) {
  GridD p, q;
  metrics_detail::distribution(pred, mask, p);
  if (!metrics_detail::distribution(gt, mask, q)) return {0.0, true};
  double s = 0.0;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (mask.valid[i] && q[i] > 0.0) s += q[i] * std::log(q[i] / (p[i] + opt.eps));
  return {std::max(0.0, s), false};
}

// Mean over active gt prexels of log2(P+eps) - log2(B+eps), in bits.
// The baseline is already a distribution over the mask.
template <class P, class G>
MetricValue info_gain(const P& pred, const G& gt, const GridD& baseline, const FootMask& mask,
                      const MetricOptions& opt = {}) {
  GridD p;
  metrics_detail::distribution(pred, mask, p);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < kGridCells; ++i) {
    if (!mask.valid[i] || !(cell_value(gt, i) > opt.activity_threshold_kpa)) continue;
    s += std::log2(p[i] + opt.eps) - std::log2(baseline[i] + opt.eps);
    ++n;
  }
  if (n == 0) return {0.0, true};
  return {s / static_cast<double>(n), false};
}

// Mean of the per-frame unit-sum distributions; frames without mass are skipped.
template <class G>
GridD baseline_distribution(const std::vector<G>& frames, const FootMask& mask) {
  GridD mean{}, d;
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (!metrics_detail::distribution(f, mask, d)) continue;
    for (std::size_t i = 0; i < kGridCells; ++i) mean[i] += d[i];
    ++n;
  }
  if (n == 0) throw DataError("baseline: no training frame carries pressure");
  for (double& v : mean) v /= static_cast<double>(n);
  return mean;
}

// ---------------------------------------------------------------------------
// Frame records and aggregates

struct FrameError {
  FrameRef ref;
  std::size_t valid_joint_count = 0;
  double mae = 0.0;
  MetricValue sim;
  MetricValue kld;
  MetricValue ig;
};

template <class P, class G>
FrameError evaluate_frame(FrameRef ref, std::size_t valid_joints, const P& pred, const G& gt, const FootMask& mask,
                          const GridD& baseline, const MetricOptions& opt = {}) {
  FrameError e;
  e.ref = ref;
  e.valid_joint_count = valid_joints;
  e.mae = mae_frame(pred, gt, mask);
  e.sim = sim(pred, gt, mask);
  e.kld = kld(pred, gt, mask, opt);
  e.ig = info_gain(pred, gt, baseline, mask, opt);
  return e;
}

struct AggregateStats {
  std::size_t n = 0;
  double mean = 0.0;
  // Sample standard deviation; 0 for a single value.
  double std = 0.0;
  double min = 0.0;
  double median = 0.0;
  double max = 0.0;
};

inline AggregateStats aggregate(std::vector<double> v) {
  AggregateStats a;
  a.n = v.size();
  if (v.empty()) return a;
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  a.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - a.mean) * (x - a.mean);
  a.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  a.min = v.front();
  a.max = v.back();
  const std::size_t h = v.size() / 2;
  a.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return a;
}

struct SubjectStats {
  std::string subject;
  AggregateStats mae;
};

enum class MassHeightMode { kMass, kHeight, kBoth };

inline MassHeightMode parse_mass_height_mode(const std::string& s) {
  if (s == "mass") return MassHeightMode::kMass;
  if (s == "height") return MassHeightMode::kHeight;
  if (s == "both") return MassHeightMode::kBoth;
  throw UsageError("unknown normalization '" + s + "' (expected mass, height or both)");
}

// Scale factor cohort_mean / subject_value for mass, height or their product.
inline double normalization_factor(const SubjectMeta& subject, const std::vector<SubjectMeta>& cohort,
                                   MassHeightMode mode) {
  if (cohort.empty()) throw DataError("normalization: empty cohort");
  double mass = 0.0, height = 0.0;
  for (const auto& m : cohort) {
    mass += m.mass_kg;
    height += m.height_m;
  }
  const double n = static_cast<double>(cohort.size());
  const double fm = (mass / n) / subject.mass_kg;
  const double fh = (height / n) / subject.height_m;
  switch (mode) {
    case MassHeightMode::kMass: return fm;
    case MassHeightMode::kHeight: return fh;
    case MassHeightMode::kBoth: return fm * fh;
  }
  return 1.0;
}

inline std::vector<SubjectStats> normalized_mae(const std::vector<SubjectStats>& by_subject,
                                                const std::vector<SubjectMeta>& metas, MassHeightMode mode) {
  std::vector<SubjectStats> out;
  for (const auto& s : by_subject) {
    auto it = std::find_if(metas.begin(), metas.end(), [&](const SubjectMeta& m) { return m.id == s.subject; });
    if (it == metas.end()) throw DataError("normalization: no metadata for subject " + s.subject);
    const double f = normalization_factor(*it, metas, mode);
    SubjectStats r = s;
    r.mae.mean *= f;
    r.mae.std *= f;
    r.mae.min *= f;
    r.mae.median *= f;
    r.mae.max *= f;
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Paired t-test

struct TTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double t = 0.0;
  // Two-tailed, normal approximation.
  double p = 1.0;
};

// d = a - b. population_std selects the n divisor instead of n - 1.
inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                                 bool population_std = false) {
  if (a.size() != b.size()) throw DataError("t-test: samples differ in length");
  if (a.size() < 2) throw DataError("t-test: need at least 2 pairs");
  TTestResult r;
  r.n = a.size();
  const double n = static_cast<double>(r.n);
  double sum = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) sum += a[i] - b[i];
  r.mean_diff = sum / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double e = a[i] - b[i] - r.mean_diff;
    ss += e * e;
  }
  const double sd = std::sqrt(ss / (population_std ? n : n - 1.0));
  if (sd == 0.0) {
    if (r.mean_diff == 0.0) return r;
    r.t = std::copysign(std::numeric_limits<double>::infinity(), r.mean_diff);
    r.p = 0.0;
    return r;
  }
  r.t = r.mean_diff / (sd / std::sqrt(n));
  r.p = std::erfc(std::abs(r.t) / std::sqrt(2.0));
  return r;
}

// ---------------------------------------------------------------------------
// Joint-count sensitivity

struct SensitivityRow {
  std::size_t min_valid_joints = 0;
  AggregateStats mae;
};

// One row per threshold from max_joints down to 1, over frames with at least
// that many valid joints.
inline std::vector<SensitivityRow> joint_count_sensitivity(const std::vector<FrameError>& frames,
                                                           std::size_t max_joints = kNumJoints) {
  std::vector<SensitivityRow> rows;
  for (std::size_t t = max_joints; t >= 1; --t) {
    std::vector<double> v;
    for (const auto& f : frames)
      if (f.valid_joint_count >= t) v.push_back(f.mae);
    rows.push_back({t, aggregate(std::move(v))});
  }
  return rows;
}

inline std::vector<FrameError> filter_min_joints(const std::vector<FrameError>& frames, std::size_t min_joints) {
  std::vector<FrameError> out;
  for (const auto& f : frames)
    if (f.valid_joint_count >= min_joints) out.push_back(f);
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace metrics_detail {

inline std::string stats_cells(const AggregateStats& a) {
  if (a.n == 0) return "0,,,,,";
  using io::format_double;
  return std::to_string(a.n) + "," + format_double(a.mean) + "," + format_double(a.std) + "," +
         format_double(a.min) + "," + format_double(a.median) + "," + format_double(a.max);
}

inline std::string metric_cell(const MetricValue& m) { return m.degenerate ? "" : io::format_double(m.value); }

}  // namespace metrics_detail

inline constexpr const char* kFrameErrorsHeader = "take,frame,valid_joints,mae_kpa,sim,kld,ig_bits";
inline constexpr const char* kSubjectStatsHeader = "subject,frames,mean,std,min,median,max";
inline constexpr const char* kSensitivityHeader = "min_valid_joints,frames,mean,std,min,median,max";

// Degenerate metric values are written as empty cells.
inline std::string frame_errors_csv(const std::vector<FrameError>& frames) {
  std::ostringstream out;
  out << kFrameErrorsHeader << '\n';
  for (const auto& f : frames)
    out << f.ref.take << ',' << f.ref.frame << ',' << f.valid_joint_count << ',' << io::format_double(f.mae) << ','
        << metrics_detail::metric_cell(f.sim) << ',' << metrics_detail::metric_cell(f.kld) << ','
        << metrics_detail::metric_cell(f.ig) << '\n';
  return out.str();
}

inline std::string subject_stats_csv(const std::vector<SubjectStats>& rows) {
  std::ostringstream out;
  out << kSubjectStatsHeader << '\n';
  for (const auto& r : rows) out << r.subject << ',' << metrics_detail::stats_cells(r.mae) << '\n';
  return out.str();
}

inline std::string sensitivity_csv(const std::vector<SensitivityRow>& rows) {
  std::ostringstream out;
  out << kSensitivityHeader << '\n';
  for (const auto& r : rows) out << r.min_valid_joints << ',' << metrics_detail::stats_cells(r.mae) << '\n';
  return out.str();
}

}  // namespace press2dyn
