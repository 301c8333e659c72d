#pragma once

#include "chebsip/bench/runner.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace chebsip::bench {

namespace detail {

// Maps data coordinates to a fixed 640x640 canvas (y up).
struct Canvas {
  double x0, x1, y0, y1;
  static constexpr double size = 640.0, pad = 30.0;
  std::string body;

  Canvas(double ax, double bx, double ay, double by) {
    const double w = std::max(bx - ax, by - ay) * 1.1 + 1e-12;
    const double cx = 0.5 * (ax + bx), cy = 0.5 * (ay + by);
    x0 = cx - w / 2;
    x1 = cx + w / 2;
    y0 = cy - w / 2;
    y1 = cy + w / 2;
  }
  double px(double x) const { return pad + (x - x0) / (x1 - x0) * (size - 2 * pad); }
  double py(double y) const { return size - pad - (y - y0) / (y1 - y0) * (size - 2 * pad); }

  void dot(double x, double y, double r, const char* fill) {
    body += "<circle cx=\"" + fmt2(px(x)) + "\" cy=\"" + fmt2(py(y)) + "\" r=\"" + fmt2(r) + "\" fill=\"" + fill +
            "\"/>\n";
  }
  void line(const std::vector<std::pair<double, double>>& pts, const char* stroke, double width, bool closed) {
    if (pts.empty()) return;
    body += std::string("<") + (closed ? "polygon" : "polyline") + " fill=\"none\" stroke=\"" + stroke +
            "\" stroke-width=\"" + fmt2(width) + "\" points=\"";
    for (const auto& [x, y] : pts) body += fmt2(px(x)) + "," + fmt2(py(y)) + " ";
    body += "\"/>\n";
  }
  void text(double x, double y, const std::string& s) {
    body += "<text x=\"" + fmt2(x) + "\" y=\"" + fmt2(y) + "\" font-family=\"sans-serif\" font-size=\"13\">" + s +
            "</text>\n";
  }
  std::string svg() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" viewBox=\"0 0 640 640\">\n"
           "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n" +
           body + "</svg>\n";
  }
  static std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
  }
};

inline std::string cheb_svg(const Problem& p, const RunOutput& o) {
  const ChebyshevTask& t = *o.task;
  const Matrix a = t.a(), b = t.b();
  if (a.rows() != 2) return "";
  const ChebyshevResult& r = *o.cheb;
  std::vector<Vec> ks = sample_index(*t.set, o.setup->extremes, 3000, 7);
  for (const Vec& c : o.setup->candidates) ks.push_back(c);
  std::vector<Vec> img;
  for (const Vec& u : ks) img.push_back(b * u);

  const Vec ac = a * r.center;
  std::vector<std::pair<double, double>> ring;
  for (int i = 0; i < 360; ++i) {
    const double th = 2 * std::numbers::pi * i / 360.0;
    Vec d(2);
    d << std::cos(th), std::sin(th);
    const double nd = t.norm(d);
    const Vec q = ac + r.radius / nd * d;
    ring.emplace_back(q[0], q[1]);
  }
  // viewport: the search box (mapped), widened to keep K and the ball in view
  double ax = kInf, bx = -kInf, ay = kInf, by = -kInf;
  auto grow = [&](double x, double y) {
    ax = std::min(ax, x);
    bx = std::max(bx, x);
    ay = std::min(ay, y);
    by = std::max(by, y);
  };
  const BoxDomain& sb = o.setup->search_box;
  if (sb.dim() == 2)
    for (int i = 0; i < 4; ++i) {
      Vec corner(2);
      corner << (i & 1 ? sb.upper()[0] : sb.lower()[0]), (i & 2 ? sb.upper()[1] : sb.lower()[1]);
      const Vec m = a * corner;
      grow(m[0], m[1]);
    }
  for (const Vec& v : img) grow(v[0], v[1]);
  for (const auto& [x, y] : ring) grow(x, y);
  Canvas cv(ax, bx, ay, by);
  for (const Vec& v : img) cv.dot(v[0], v[1], 1.2, "#9ab");
  cv.line(ring, "#c33", 1.5, true);
  std::vector<std::pair<double, double>> path;
  for (const RegStep& s : r.path.steps) {
    const Vec c = a * s.x.tail(a.cols());
    path.emplace_back(c[0], c[1]);
  }
  cv.line(path, "#283", 1.0, false);
  for (const auto& [x, y] : path) cv.dot(x, y, 2.0, "#283");
  for (const Vec& u : r.active_points) {
    const Vec v = b * u;
    cv.dot(v[0], v[1], 4.0, "#222");
  }
  cv.dot(ac[0], ac[1], 4.0, "#c33");
  char cap[160];
  std::snprintf(cap, sizeof cap, "%s  radius %.6g  center (%.5g, %.5g)", p.name.c_str(), r.radius, ac[0], ac[1]);
  cv.text(12, 18, cap);
  return cv.svg();
}

inline std::string learn_svg(const Problem& p, const RunOutput& o) {
  const json& curve = o.record.at("curve");
  double ay = kInf, by = -kInf;
  for (const json& row : curve) {
    for (const char* k : {"center", "target"})
      if (row.contains(k)) {
        ay = std::min(ay, row[k].get<double>());
        by = std::max(by, row[k].get<double>());
      }
  }
  const double ax = curve.front()["x"].get<double>(), bx = curve.back()["x"].get<double>();
  // independent axis scaling: stretch y into the x range
  const double sy = (bx - ax) / std::max(by - ay, 1e-12);
  Canvas cv(ax, bx, ay * sy, by * sy);
  std::vector<std::pair<double, double>> cc, tc;
  for (const json& row : curve) {
    const double x = row["x"].get<double>();
    cc.emplace_back(x, row["center"].get<double>() * sy);
    if (row.contains("target")) tc.emplace_back(x, row["target"].get<double>() * sy);
  }
  cv.line(tc, "#888", 1.0, false);
  cv.line(cc, "#c33", 1.5, false);
  const RkhsTask& rk = p.learn->rkhs;
  for (std::size_t i = 0; i < rk.points.size(); ++i)
    cv.dot(rk.points[i], rk.data[static_cast<Eigen::Index>(i)] * sy, 3.0, "#222");
  char cap[200];
  std::snprintf(cap, sizeof cap, "%s  radius %.6g  y in [%.4g, %.4g]", p.name.c_str(), o.learn->cheb.radius, ay, by);
  cv.text(12, 18, cap);
  return cv.svg();
}

}  // namespace detail

/// SVG of a solved problem: 2-D Chebyshev tasks show K, the ball and the path;
/// learning tasks show the center function against the samples. Empty when
/// there is nothing sensible to draw.
inline std::string render_plot(const Problem& p, const RunOutput& o) {
  if (o.cheb && o.task) return detail::cheb_svg(p, o);
  if (o.learn && p.learn) return detail::learn_svg(p, o);
  return "";
}

}  // namespace chebsip::bench
