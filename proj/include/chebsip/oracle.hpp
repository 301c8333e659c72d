#pragma once

#include "chebsip/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace chebsip {

/// Brute-force minimax on grids: index points of K on a grid over its
/// parametrization, candidate centers on a grid over the search box.
struct OracleResult {
  double radius = kInf;
  Vec center;
  double error_bound = kInf;  // |radius - rad K| <= error_bound (index + center parts)
  double index_bound = 0.0;
  double center_bound = 0.0;
  int index_resolution = 0;
  int center_resolution = 0;
  std::size_t kept_points = 0;  // grid nodes treated as points of K
  std::size_t hull_points = 0;  // after discarding interior nodes
};

inline constexpr int kOracleMaxResolution = 2048;

namespace detail {

// Grid node u is kept when some point within distance r of it could satisfy
// every constraint (first-order bound per constraint). This catches thin
// parts of K (cusps) that no grid node hits exactly.
struct NearFeasible {
  const ConstraintSet* set;
  double r;
  std::vector<Matrix> sym;
  std::vector<double> curv;  // max(0, -lambda_min) per quadratic

  NearFeasible(const ConstraintSet& s, double radius) : set(&s), r(radius) {
    for (const auto& q : s.spec().quadratics) {
      sym.push_back(0.5 * (q.quad + q.quad.transpose()));
      curv.push_back(std::max(0.0, -Eigen::SelfAdjointEigenSolver<Matrix>(sym.back()).eigenvalues()[0]));
    }
  }

  bool operator()(const Vec& u) const {
    const ConstraintSet::Spec& s = set->spec();
    const Vec& lo = s.box.lower();
    const Vec& hi = s.box.upper();
    for (Eigen::Index j = 0; j < u.size(); ++j)
      if (u[j] < lo[j] - r || u[j] > hi[j] + r) return false;
    for (const auto& h : s.halfspaces)
      if (h.normal.dot(u) - h.offset > h.normal.norm() * r) return false;
    for (std::size_t i = 0; i < s.quadratics.size(); ++i) {
      const auto& q = s.quadratics[i];
      const Vec g = 2.0 * sym[i] * u + q.linear;
      if (q.value(u) > g.norm() * r + curv[i] * r * r) return false;
    }
    for (const auto& f : s.inequalities)
      if (f.h(u) > 0) return false;
    return true;
  }
};

// Andrew's monotone chain; returns hull indices of 2-D points.
inline std::vector<std::size_t> hull_2d(const std::vector<Vec>& z) {
  std::vector<std::size_t> idx(z.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return z[a][0] < z[b][0] || (z[a][0] == z[b][0] && z[a][1] < z[b][1]);
  });
  if (idx.size() < 3) return idx;
  auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
    return (z[a][0] - z[o][0]) * (z[b][1] - z[o][1]) - (z[a][1] - z[o][1]) * (z[b][0] - z[o][0]);
  };
  std::vector<std::size_t> h(2 * idx.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], idx[i]) <= 0) --k;
    h[k++] = idx[i];
  }
  for (std::size_t i = idx.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], idx[i]) <= 0) --k;
    h[k++] = idx[i];
  }
  h.resize(k - 1);
  return h;
}

}  // namespace detail

inline OracleResult grid_oracle(const ChebyshevTask& task, const BoxDomain& search_box, int resolution) {
  require(resolution >= 2 && resolution <= kOracleMaxResolution, ErrorKind::Precondition,
          "oracle resolution must be in [2, 2048]");
  const ConstraintSet& set = *task.set;
  const Eigen::Index k = set.param_dim();
  const Eigen::Index l = task.center_dim();
  require(k <= 3, ErrorKind::Unsupported, "oracle needs a parametrization of dimension at most 3");
  require(l <= 3, ErrorKind::Unsupported, "oracle needs a center space of dimension at most 3");
  require(search_box.dim() == l && search_box.bounded() && (search_box.width().array() > 0).all(),
          ErrorKind::Precondition, "oracle search box");

  OracleResult out;
  const Matrix a = task.a(), b = task.b();
  const Matrix& nb = set.parametrization().basis;

  // index grid: four times finer than the center grid, capped at 2^24 nodes
  int rk = 4 * resolution;
  while (k > 0 && std::pow(rk + 1.0, static_cast<double>(k)) > 16777216.0) rk /= 2;
  out.index_resolution = rk;
  const BoxDomain& pb = set.param_box();
  const Vec hz = k > 0 ? Vec(pb.width() / rk) : Vec();
  const double r = 0.5 * (k > 0 ? hz.norm() : 0.0);
  for (Eigen::Index j = 0; j < k; ++j) out.index_bound += 0.5 * hz[j] * task.norm(b * nb.col(j));

  std::vector<char> mask;
  std::size_t total = 1;
  for (Eigen::Index j = 0; j < k; ++j) total *= static_cast<std::size_t>(rk + 1);
  mask.assign(total, 0);
  auto node = [&](std::size_t id) {
    Vec z(k);
    std::size_t rem = id;
    for (Eigen::Index j = 0; j < k; ++j) {
      z[j] = pb.lower()[j] + hz[j] * static_cast<double>(rem % static_cast<std::size_t>(rk + 1));
      rem /= static_cast<std::size_t>(rk + 1);
    }
    return z;
  };
  const detail::NearFeasible near(set, r);
  for (std::size_t id = 0; id < total; ++id) {
    const Vec u = k > 0 ? set.lift(node(id)) : set.feasible_point();
    mask[id] = near(u) ? 1 : 0;
    out.kept_points += static_cast<std::size_t>(mask[id]);
  }
  require(out.kept_points > 0, ErrorKind::EmptySet, "oracle grid found no point of K");

  // only boundary nodes can be extreme
  std::vector<Vec> zs;
  for (std::size_t id = 0; id < total; ++id) {
    if (!mask[id]) continue;
    bool interior = k > 0;
    std::size_t rem = id, stride = 1;
    for (Eigen::Index j = 0; j < k && interior; ++j) {
      const std::size_t c = rem % static_cast<std::size_t>(rk + 1);
      rem /= static_cast<std::size_t>(rk + 1);
      if (c == 0 || c == static_cast<std::size_t>(rk) || !mask[id - stride] || !mask[id + stride]) interior = false;
      stride *= static_cast<std::size_t>(rk + 1);
    }
    if (!interior) zs.push_back(k > 0 ? node(id) : Vec());
  }
  if (k == 2) {
    std::vector<Vec> h;
    for (std::size_t i : detail::hull_2d(zs)) h.push_back(zs[i]);
    zs = h;
  }
  std::vector<Vec> pts;
  for (const Vec& z : zs) pts.push_back(b * (k > 0 ? set.lift(z) : set.feasible_point()));
  out.hull_points = pts.size();

  auto f = [&](const Vec& c) {
    const Vec ac = a * c;
    double m = 0.0;
    for (const Vec& p : pts) m = std::max(m, task.norm(ac - p));
    return m;
  };

  // center grid: one pass when small, otherwise coarse to fine around the
  // incumbent (the objective is convex in the center)
  const Vec w = search_box.width();
  const Vec hc = w / resolution;
  out.center_resolution = resolution;
  for (Eigen::Index j = 0; j < l; ++j) out.center_bound += 0.5 * hc[j] * task.norm(a.col(j));
  out.error_bound = out.index_bound + out.center_bound;

  const double budget = 4.0e6 / std::max<double>(1.0, static_cast<double>(pts.size()));
  int g = resolution;
  while (std::pow(g + 1.0, static_cast<double>(l)) > std::max(budget, 4096.0) && g > 8) g /= 2;
  Vec lo = search_box.lower(), hi = search_box.upper();
  Vec best = search_box.center();
  double bv = kInf;
  for (;;) {
    const Vec step = (hi - lo) / g;
    std::size_t count = 1;
    for (Eigen::Index j = 0; j < l; ++j) count *= static_cast<std::size_t>(g + 1);
    for (std::size_t id = 0; id < count; ++id) {
      Vec c(l);
      std::size_t rem = id;
      for (Eigen::Index j = 0; j < l; ++j) {
        c[j] = lo[j] + step[j] * static_cast<double>(rem % static_cast<std::size_t>(g + 1));
        rem /= static_cast<std::size_t>(g + 1);
      }
      const double v = f(c);
      if (v < bv) {
        bv = v;
        best = c;
      }
    }
    if ((step.array() <= hc.array() * (1 + 1e-9)).all()) break;
    // zoom: window of +-2 steps around the incumbent, snapped to the fine lattice
    for (Eigen::Index j = 0; j < l; ++j) {
      const double base = search_box.lower()[j];
      lo[j] = std::max(base, base + std::floor((best[j] - 2 * step[j] - base) / hc[j]) * hc[j]);
      hi[j] = std::min(search_box.upper()[j], base + std::ceil((best[j] + 2 * step[j] - base) / hc[j]) * hc[j]);
    }
    const double cells = ((hi - lo).array() / hc.array()).maxCoeff();
    g = std::max(1, static_cast<int>(std::min<double>(std::round(cells), g)));
  }
  out.radius = bv;
  out.center = best;
  return out;
}

}  // namespace chebsip
