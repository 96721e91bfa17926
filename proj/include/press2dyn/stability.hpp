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
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "press2dyn/core.hpp"
#include "press2dyn/errors.hpp"
#include "press2dyn/io.hpp"
#include "press2dyn/parallel.hpp"

// Centre of pressure, base of support and offset statistics.
namespace press2dyn {

inline constexpr double kDefaultActivityKpa = 3.0;
inline constexpr double kMadScale = 1.4826;
// Grid point mapped onto the heel/toe midpoint.
inline constexpr double kGridCenterRow = (kGridRows - 1) / 2.0;
inline constexpr double kGridCenterCol = (kGridCols - 1) / 2.0;

struct CoP2D {
  Point2 p;
  bool valid = false;
};

// ---------------------------------------------------------------------------
// Centre of pressure

// Grid-frame CoP of one foot: x is the row coordinate, y the column.
// Prexels with pressure >= threshold contribute.
template <class G>
CoP2D cop_single_foot(const G& grid, Foot foot, double threshold = kDefaultActivityKpa) {
  double w = 0.0, sr = 0.0, sc = 0.0;
  for (std::size_t r = 0; r < kGridRows; ++r)
    for (std::size_t c = 0; c < kGridCols; ++c) {
      const double v = cell_value(grid, grid_index(static_cast<std::size_t>(foot), r, c));
      if (!(v >= threshold)) continue;
      w += v;
      sr += v * static_cast<double>(r);
      sc += v * static_cast<double>(c);
    }
  if (!(w > 0.0)) return {};
  return {{sr / w, sc / w}, true};
}

// Similarity transform from grid (row, col) to world mm. Row 0 is the toe
// end; columns increase to the right of the heel-to-toe direction.
inline Point2 register_foot(Point2 grid_point, const FootPose& pose) {
  const Point2 axis = pose.toe - pose.heel;
  const double len = norm(axis);
  if (!(len > 1e-9)) throw DataError("register_foot: heel and toe coincide");
  const Point2 u = axis * (1.0 / len);
  const Point2 right{u.y, -u.x};
  const Point2 mid = (pose.heel + pose.toe) * 0.5;
  return mid + u * ((kGridCenterRow - grid_point.x) * kPrexelPitchMm) +
         right * ((grid_point.y - kGridCenterCol) * kPrexelPitchMm);
}

namespace stability_detail {

template <class G, class Fn>
void for_active(const G& grid, const FootPlacement& place, double threshold, Fn&& fn) {
  for (std::size_t f = 0; f < kNumFeet; ++f)
    for (std::size_t r = 0; r < kGridRows; ++r)
      for (std::size_t c = 0; c < kGridCols; ++c) {
        const double v = cell_value(grid, grid_index(f, r, c));
        if (!(v >= threshold)) continue;
        fn(register_foot({static_cast<double>(r), static_cast<double>(c)}, place.feet[f]), v);
      }
}

}  // namespace stability_detail

// World-frame CoP over the active prexels of both feet.
template <class G>
CoP2D cop_combined(const G& grid, const FootPlacement& place, double threshold = kDefaultActivityKpa) {
  double w = 0.0;
  Point2 s;
  stability_detail::for_active(grid, place, threshold, [&](Point2 p, double v) {
    w += v;
    s = s + p * v;
  });
  if (!(w > 0.0)) return {};
  return {s * (1.0 / w), true};
}

// ---------------------------------------------------------------------------
// Geometry

inline double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Counterclockwise vertices; collinear points removed.
struct Polygon {
  std::vector<Point2> vertices;
  // Fewer than three non-collinear points.
  bool degenerate = true;
};

inline double polygon_area(const std::vector<Point2>& v) {
  double a = 0.0;
  for (std::size_t i = 0, n = v.size(); i < n; ++i) {
    const Point2 p = v[i], q = v[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

// Andrew's monotone chain.
inline Polygon convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  Polygon out;
  if (pts.size() < 3) {
    out.vertices = pts;
    return out;
  }
  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  out.vertices = std::move(h);
  out.degenerate = out.vertices.size() < 3;
  return out;
}

template <class G>
Polygon bos_hull(const G& grid, const FootPlacement& place, double threshold = kDefaultActivityKpa) {
  std::vector<Point2> pts;
  stability_detail::for_active(grid, place, threshold, [&](Point2 p, double) { pts.push_back(p); });
  return convex_hull(std::move(pts));
}

// Sutherland-Hodgman clip of `subject` by the convex counterclockwise `clip`.
inline std::vector<Point2> clip_convex(std::vector<Point2> subject, const std::vector<Point2>& clip) {
  for (std::size_t e = 0, n = clip.size(); e < n && !subject.empty(); ++e) {
    const Point2 a = clip[e], b = clip[(e + 1) % n];
    std::vector<Point2> out;
    for (std::size_t i = 0, m = subject.size(); i < m; ++i) {
      const Point2 p = subject[i], q = subject[(i + 1) % m];
      const double cp = cross(a, b, p), cq = cross(a, b, q);
      if (cp >= 0.0) out.push_back(p);
      if ((cp >= 0.0) != (cq >= 0.0)) {
        const double t = cp / (cp - cq);
        out.push_back(p + (q - p) * t);
      }
    }
    subject = std::move(out);
  }
  return subject;
}

// Degenerate polygons have zero area, so their IoU is 0.
inline double polygon_iou(const Polygon& a, const Polygon& b) {
  if (a.degenerate || b.degenerate) return 0.0;
  const double aa = polygon_area(a.vertices), ab = polygon_area(b.vertices);
  const auto inter = clip_convex(a.vertices, b.vertices);
  const double ai = inter.size() >= 3 ? std::max(0.0, polygon_area(inter)) : 0.0;
  const double u = aa + ab - ai;
  if (!(u > 0.0)) return 0.0;
  return std::clamp(ai / u, 0.0, 1.0);
}

// Weiszfeld iteration with the Vardi-Zhang step at data points.
inline Point2 geometric_median(const std::vector<Point2>& pts, double tol = 1e-9, int max_iter = 1000) {
  if (pts.empty()) throw DataError("geometric_median: no points");
  Point2 y;
  for (const auto& p : pts) y = y + p;
  y = y * (1.0 / static_cast<double>(pts.size()));
  for (int it = 0; it < max_iter; ++it) {
    Point2 num, r;
    double den = 0.0;
    std::size_t coincident = 0;
    for (const auto& p : pts) {
      const double d = norm(p - y);
      if (d == 0.0) {
        ++coincident;
        continue;
      }
      num = num + p * (1.0 / d);
      r = r + (p - y) * (1.0 / d);
      den += 1.0 / d;
    }
    if (den == 0.0) return y;
    const Point2 t = num * (1.0 / den);
    Point2 next = t;
    if (coincident > 0) {
      const double rn = norm(r);
      const double eta = static_cast<double>(coincident);
      if (rn <= eta) return y;
      next = t * (1.0 - eta / rn) + y * std::min(1.0, eta / rn);
    }
    const double step = norm(next - y);
    y = next;
    if (step < tol) break;
  }
  return y;
}

inline double sum_distances(const std::vector<Point2>& pts, Point2 m) {
  double s = 0.0;
  for (const auto& p : pts) s += norm(p - m);
  return s;
}

// ---------------------------------------------------------------------------
// Offset statistics

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw DataError("median of empty set");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double hi = v[h];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return 0.5 * (lo + hi);
}

// 1.4826 * median(|v - median(v)|).
inline double robust_std(const std::vector<double>& v) {
  const double m = median_of(v);
  std::vector<double> dev;
  dev.reserve(v.size());
  for (double x : v) dev.push_back(std::abs(x - m));
  return kMadScale * median_of(std::move(dev));
}

struct OffsetStats {
  std::size_t pairs = 0;
  double dx_mean = 0.0, dx_std = 0.0;
  double dy_mean = 0.0, dy_std = 0.0;
  // Norm of the mean offset.
  double d = 0.0;
  double d_mean = 0.0, d_std = 0.0;
};

struct RobustOffsetStats {
  std::size_t pairs = 0;
  // Geometric median of the offsets.
  double dx_median = 0.0, dy_median = 0.0;
  double dx_rstd = 0.0, dy_rstd = 0.0;
  double d = 0.0;
  double d_median = 0.0, d_rstd = 0.0;
};

// pred - gt over frames where both CoPs are valid.
inline std::vector<Point2> paired_offsets(const std::vector<CoP2D>& gt, const std::vector<CoP2D>& pred) {
  if (gt.size() != pred.size()) throw DataError("cop offsets: gt and prediction differ in length");
  std::vector<Point2> out;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i].valid && pred[i].valid) out.push_back(pred[i].p - gt[i].p);
  if (out.empty()) throw DataError("cop offsets: no frame has a valid CoP in both gt and prediction");
  return out;
}

namespace stability_detail {

inline void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace stability_detail

// Standard deviations use the n - 1 divisor.
inline OffsetStats cop_offset_stats(const std::vector<CoP2D>& gt, const std::vector<CoP2D>& pred) {
  const auto off = paired_offsets(gt, pred);
  std::vector<double> dx, dy, dist;
  for (const auto& o : off) {
    dx.push_back(o.x);
    dy.push_back(o.y);
    dist.push_back(norm(o));
  }
  OffsetStats s;
  s.pairs = off.size();
  stability_detail::mean_std(dx, s.dx_mean, s.dx_std);
  stability_detail::mean_std(dy, s.dy_mean, s.dy_std);
  stability_detail::mean_std(dist, s.d_mean, s.d_std);
  s.d = std::hypot(s.dx_mean, s.dy_mean);
  return s;
}

inline RobustOffsetStats cop_robust_stats(const std::vector<CoP2D>& gt, const std::vector<CoP2D>& pred) {
  const auto off = paired_offsets(gt, pred);
  std::vector<double> dx, dy, dist;
  for (const auto& o : off) {
    dx.push_back(o.x);
    dy.push_back(o.y);
    dist.push_back(norm(o));
  }
  RobustOffsetStats s;
  s.pairs = off.size();
  const Point2 gm = geometric_median(off);
  s.dx_median = gm.x;
  s.dy_median = gm.y;
  s.dx_rstd = robust_std(dx);
  s.dy_rstd = robust_std(dy);
  s.d = norm(gm);
  s.d_median = median_of(dist);
  s.d_rstd = robust_std(dist);
  return s;
}

inline nlohmann::json to_json(const OffsetStats& s) {
  return {{"pairs", s.pairs},   {"dx_mean", s.dx_mean}, {"dx_std", s.dx_std}, {"dy_mean", s.dy_mean},
          {"dy_std", s.dy_std}, {"d", s.d},             {"d_mean", s.d_mean}, {"d_std", s.d_std}};
}

inline nlohmann::json to_json(const RobustOffsetStats& s) {
  return {{"pairs", s.pairs},     {"dx_median", s.dx_median}, {"dx_rstd", s.dx_rstd},
          {"dy_median", s.dy_median}, {"dy_rstd", s.dy_rstd},     {"d", s.d},
          {"d_median", s.d_median},   {"d_rstd", s.d_rstd}};
}

// ---------------------------------------------------------------------------
// Per-frame analysis and threshold sweeps

struct StabilityFrame {
  CoP2D gt_cop, pred_cop;
  Polygon gt_bos, pred_bos;

  bool cop_pair() const { return gt_cop.valid && pred_cop.valid; }
  bool bos_pair() const { return !gt_bos.degenerate && !pred_bos.degenerate; }
  double distance() const { return norm(pred_cop.p - gt_cop.p); }
  double iou() const { return polygon_iou(gt_bos, pred_bos); }
};

template <class GT, class PR>
std::vector<StabilityFrame> analyze_stability(const std::vector<GT>& gt, const std::vector<PR>& pred,
                                              const std::vector<FootPlacement>& placements, double threshold,
                                              unsigned jobs = 1) {
  if (gt.size() != pred.size() || gt.size() != placements.size())
    throw DataError("stability: gt, prediction and placement counts differ");
  std::vector<StabilityFrame> out(gt.size());
  parallel_for(gt.size(), jobs, [&](std::size_t i) {
    auto& f = out[i];
    f.gt_cop = cop_combined(gt[i], placements[i], threshold);
    f.pred_cop = cop_combined(pred[i], placements[i], threshold);
    f.gt_bos = bos_hull(gt[i], placements[i], threshold);
    f.pred_bos = bos_hull(pred[i], placements[i], threshold);
  });
  return out;
}

struct StabilitySummary {
  double threshold = 0.0;
  std::size_t frames = 0;
  std::size_t cop_pairs = 0;
  // Mean per-frame CoP distance; NaN without valid pairs.
  double d_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t bos_pairs = 0;
  // Mean IoU over frames with both hulls non-degenerate; NaN without any.
  double mean_iou = std::numeric_limits<double>::quiet_NaN();
};

inline StabilitySummary summarize(const std::vector<StabilityFrame>& frames, double threshold) {
  StabilitySummary s;
  s.threshold = threshold;
  s.frames = frames.size();
  double d = 0.0, iou = 0.0;
  for (const auto& f : frames) {
    if (f.cop_pair()) {
      d += f.distance();
      ++s.cop_pairs;
    }
    if (f.bos_pair()) {
      iou += f.iou();
      ++s.bos_pairs;
    }
  }
  if (s.cop_pairs) s.d_mean = d / static_cast<double>(s.cop_pairs);
  if (s.bos_pairs) s.mean_iou = iou / static_cast<double>(s.bos_pairs);
  return s;
}

inline std::vector<double> threshold_range(double first, double last, double step) {
  if (!(step > 0.0) || last < first) throw UsageError("threshold range: need first <= last and step > 0");
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double t = first + step * k;
    if (t > last + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

inline std::vector<double> default_sweep_thresholds() { return threshold_range(1.0, 31.0, 3.0); }

template <class GT, class PR>
std::vector<StabilitySummary> threshold_sweep(const std::vector<GT>& gt, const std::vector<PR>& pred,
                                              const std::vector<FootPlacement>& placements,
                                              const std::vector<double>& thresholds, unsigned jobs = 1) {
  std::vector<StabilitySummary> rows(thresholds.size());
  parallel_for(thresholds.size(), jobs, [&](std::size_t k) {
    rows[k] = summarize(analyze_stability(gt, pred, placements, thresholds[k]), thresholds[k]);
  });
  return rows;
}

inline constexpr const char* kStabilityFramesHeader =
    "frame,gt_cop_x,gt_cop_y,pred_cop_x,pred_cop_y,cop_distance_mm,bos_iou";
inline constexpr const char* kSweepHeader = "threshold_kpa,frames,cop_pairs,cop_d_mean_mm,bos_pairs,bos_mean_iou";

namespace stability_detail {

inline std::string num(double v) { return std::isnan(v) ? std::string() : io::format_double(v); }

}  // namespace stability_detail

// Undefined values are written as empty cells.
inline std::string stability_frames_csv(const std::vector<StabilityFrame>& frames) {
  using stability_detail::num;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream out;
  out << kStabilityFramesHeader << '\n';
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    out << i << ',' << num(f.gt_cop.valid ? f.gt_cop.p.x : nan) << ',' << num(f.gt_cop.valid ? f.gt_cop.p.y : nan)
        << ',' << num(f.pred_cop.valid ? f.pred_cop.p.x : nan) << ','
        << num(f.pred_cop.valid ? f.pred_cop.p.y : nan) << ',' << num(f.cop_pair() ? f.distance() : nan) << ','
        << num(f.bos_pair() ? f.iou() : nan) << '\n';
  }
  return out.str();
}

inline std::string sweep_csv(const std::vector<StabilitySummary>& rows) {
  using stability_detail::num;
  std::ostringstream out;
  out << kSweepHeader << '\n';
  for (const auto& r : rows)
    out << io::format_double(r.threshold) << ',' << r.frames << ',' << r.cop_pairs << ',' << num(r.d_mean) << ','
        << r.bos_pairs << ',' << num(r.mean_iou) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// PCA

struct PcaResult {
  std::vector<double> mean;
  // Unit-norm, mutually orthogonal, by decreasing eigenvalue.
  std::vector<std::vector<double>> components;
  std::vector<double> eigenvalues;
  // Eigenvalue over total variance.
  std::vector<double> explained;
};

// Top-k eigenpairs of the sample covariance of `rows` by power iteration with
// deflation. The covariance is applied implicitly through the centred data.
inline PcaResult pca(const std::vector<std::vector<double>>& rows, std::size_t k, std::uint64_t seed = 1,
                     int max_iter = 20000, double tol = 1e-14) {
  if (rows.size() < 2) throw DataError("pca: need at least 2 rows");
  const std::size_t d = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != d) throw DataError("pca: ragged rows");
  k = std::min(k, d);
  const double n = static_cast<double>(rows.size());
  PcaResult res;
  res.mean.assign(d, 0.0);
  for (const auto& r : rows)
    for (std::size_t j = 0; j < d; ++j) res.mean[j] += r[j];
  for (double& m : res.mean) m /= n;
  std::vector<std::vector<double>> x(rows.size(), std::vector<double>(d));
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) {
      x[i][j] = rows[i][j] - res.mean[j];
      total += x[i][j] * x[i][j];
    }
  total /= n - 1.0;

  auto apply = [&](const std::vector<double>& v) {
    std::vector<double> out(d, 0.0);
    for (const auto& xi : x) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += xi[j] * v[j];
      for (std::size_t j = 0; j < d; ++j) out[j] += s * xi[j];
    }
    for (double& o : out) o /= n - 1.0;
    for (std::size_t c = 0; c < res.components.size(); ++c) {
      const auto& u = res.components[c];
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += u[j] * v[j];
      for (std::size_t j = 0; j < d; ++j) out[j] -= res.eigenvalues[c] * s * u[j];
    }
    return out;
  };
  auto normalize = [&](std::vector<double>& v) {
    double s = 0.0;
    for (double e : v) s += e * e;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& e : v) e /= s;
    return s;
  };

  std::uint64_t state = seed;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v(d);
    for (double& e : v) {
      state = state * 6364136223846793005ULL + 1442695040888963407ULL;
      e = static_cast<double>(state >> 11) / 9007199254740992.0 - 0.5;
    }
    for (const auto& u : res.components) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += u[j] * v[j];
      for (std::size_t j = 0; j < d; ++j) v[j] -= s * u[j];
    }
    normalize(v);
    double lambda = 0.0;
    for (int it = 0; it < max_iter; ++it) {
      std::vector<double> w = apply(v);
      for (const auto& u : res.components) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += u[j] * w[j];
        for (std::size_t j = 0; j < d; ++j) w[j] -= s * u[j];
      }
      lambda = normalize(w);
      if (lambda == 0.0) break;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += w[j] * v[j];
      v = std::move(w);
      if (1.0 - std::abs(dot) < tol) break;
    }
    // Rayleigh quotient for the eigenvalue; the sign of v is fixed by its largest entry.
    const auto cv = apply(v);
    double rq = 0.0;
    for (std::size_t j = 0; j < d; ++j) rq += v[j] * cv[j];
    const auto big = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*big < 0.0)
      for (double& e : v) e = -e;
    res.components.push_back(std::move(v));
    res.eigenvalues.push_back(std::max(0.0, rq));
    res.explained.push_back(total > 0.0 ? std::max(0.0, rq) / total : 0.0);
  }
  return res;
}

struct PressurePca {
  GridD mean{};
  std::vector<GridD> components;
  std::vector<double> explained;
};

// PCA over the valid prexels; invalid prexels are 0 in every map.
template <class G>
PressurePca pressure_pca(const std::vector<G>& frames, const FootMask& mask, std::size_t k = 5) {
  std::vector<std::size_t> cells;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (mask.valid[i]) cells.push_back(i);
  if (cells.empty()) throw DataError("pca: footmask selects no prexels");
  std::vector<std::vector<double>> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) {
    std::vector<double> r(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) r[j] = cell_value(f, cells[j]);
    rows.push_back(std::move(r));
  }
  const PcaResult p = pca(rows, k);
  PressurePca out;
  for (std::size_t j = 0; j < cells.size(); ++j) out.mean[cells[j]] = p.mean[j];
  for (const auto& comp : p.components) {
    GridD g{};
    for (std::size_t j = 0; j < cells.size(); ++j) g[cells[j]] = comp[j];
    out.components.push_back(g);
  }
  out.explained = p.explained;
  return out;
}

struct MeanPressureDiff {
  std::vector<std::string> subjects;
  std::vector<GridD> means;
  // diffs[i][j] = |means[i] - means[j]| per prexel.
  std::vector<std::vector<GridD>> diffs;
};

// Subjects in first-appearance order; takes of one subject are pooled.
inline MeanPressureDiff mean_pressure_diff_matrix(const std::vector<Take>& takes) {
  MeanPressureDiff out;
  std::vector<std::size_t> counts;
  for (const auto& t : takes) {
    auto it = std::find(out.subjects.begin(), out.subjects.end(), t.subject.id);
    std::size_t s = static_cast<std::size_t>(it - out.subjects.begin());
    if (it == out.subjects.end()) {
      out.subjects.push_back(t.subject.id);
      out.means.push_back(GridD{});
      counts.push_back(0);
    }
    for (const auto& f : t.pressures) {
      for (std::size_t i = 0; i < kGridCells; ++i) out.means[s][i] += cell_value(f, i);
      ++counts[s];
    }
  }
  for (std::size_t s = 0; s < out.means.size(); ++s) {
    if (counts[s] == 0) throw DataError("mean pressure: subject " + out.subjects[s] + " has no frames");
    for (double& v : out.means[s]) v /= static_cast<double>(counts[s]);
  }
  const std::size_t n = out.means.size();
  out.diffs.assign(n, std::vector<GridD>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < kGridCells; ++c) out.diffs[i][j][c] = std::abs(out.means[i][c] - out.means[j][c]);
  return out;
}

}  // namespace press2dyn
