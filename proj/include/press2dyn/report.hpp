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
#include <charconv>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "press2dyn/core.hpp"

// Static SVG figures: CoP offset scatter and line charts.
namespace press2dyn::svg {

inline constexpr double kWidth = 480, kHeight = 480, kMargin = 48;

// Fixed two-decimal rendering keeps files byte-stable.
inline std::string num(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), std::round(v * 100.0) / 100.0, std::chars_format::fixed, 2);
  return ec == std::errc{} ? std::string(buf, end) : std::string("0");
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); }
  double py(double y) const { return kHeight - kMargin - (y - y0) / (y1 - y0) * (kHeight - 2 * kMargin); }
};

inline std::string header(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
         "<text x=\"" + num(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         escape(title) + "</text>\n";
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  std::ostringstream o;
  o << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(kWidth - 2 * kMargin)
    << "\" height=\"" << num(kHeight - 2 * kMargin) << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight - 12)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(xlabel) << "</text>\n";
  o << "<text x=\"14\" y=\"" << num(kHeight / 2) << "\" transform=\"rotate(-90 14 " << num(kHeight / 2)
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(ylabel) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double x = f.x0 + (f.x1 - f.x0) * k / 4.0, y = f.y0 + (f.y1 - f.y0) * k / 4.0;
    o << "<text x=\"" << num(f.px(x)) << "\" y=\"" << num(kHeight - kMargin + 14)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << num(x) << "</text>\n";
    o << "<text x=\"" << num(kMargin - 4) << "\" y=\"" << num(f.py(y) + 3)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(y) << "</text>\n";
  }
  return o.str();
}

struct Circle {
  Point2 centre;
  double radius;
  std::string colour;
  std::string label;
};

// Offsets around the origin with overlay circles; axes symmetric.
inline std::string offset_scatter(const std::vector<Point2>& offsets, const std::vector<Circle>& circles,
                                  const std::string& title) {
  double r = 1.0;
  for (const auto& p : offsets) r = std::max({r, std::abs(p.x), std::abs(p.y)});
  for (const auto& c : circles) r = std::max({r, std::abs(c.centre.x) + c.radius, std::abs(c.centre.y) + c.radius});
  r *= 1.05;
  const Frame f{-r, r, -r, r};
  const double unit = (kWidth - 2 * kMargin) / (2 * r);
  std::ostringstream o;
  o << header(title) << axes(f, "dx (mm)", "dy (mm)");
  o << "<line x1=\"" << num(f.px(-r)) << "\" y1=\"" << num(f.py(0)) << "\" x2=\"" << num(f.px(r)) << "\" y2=\""
    << num(f.py(0)) << "\" stroke=\"#bbb\"/>\n";
  o << "<line x1=\"" << num(f.px(0)) << "\" y1=\"" << num(f.py(-r)) << "\" x2=\"" << num(f.px(0)) << "\" y2=\""
    << num(f.py(r)) << "\" stroke=\"#bbb\"/>\n";
  for (const auto& p : offsets)
    o << "<circle cx=\"" << num(f.px(p.x)) << "\" cy=\"" << num(f.py(p.y)) << "\" r=\"1.5\" fill=\"#1f77b4\" fill-opacity=\"0.4\"/>\n";
  int row = 0;
  for (const auto& c : circles) {
    o << "<circle cx=\"" << num(f.px(c.centre.x)) << "\" cy=\"" << num(f.py(c.centre.y)) << "\" r=\""
      << num(c.radius * unit) << "\" fill=\"none\" stroke=\"" << c.colour << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << num(kMargin + 6) << "\" y=\"" << num(kMargin + 16 + 14 * row++)
      << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << c.colour << "\">" << escape(c.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

struct Series {
  std::vector<Point2> points;
  std::string colour;
  std::string label;
};

inline std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                              const std::string& ylabel) {
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  bool first = true;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      if (first) {
        x0 = x1 = p.x;
        y1 = p.y;
        first = false;
      }
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y1 = std::max(y1, p.y);
    }
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  y1 *= 1.05;
  const Frame f{x0, x1, y0, y1};
  std::ostringstream o;
  o << header(title) << axes(f, xlabel, ylabel);
  int row = 0;
  for (const auto& s : series) {
    o << "<polyline fill=\"none\" stroke=\"" << s.colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.points.size(); ++i)
      o << (i ? " " : "") << num(f.px(s.points[i].x)) << ',' << num(f.py(s.points[i].y));
    o << "\"/>\n";
    o << "<text x=\"" << num(kWidth - kMargin - 6) << "\" y=\"" << num(kMargin + 16 + 14 * row++)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << s.colour << "\">"
      << escape(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace press2dyn::svg
