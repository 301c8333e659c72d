#pragma once

#include "chebsip/inner.hpp"
#include "chebsip/sets.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

namespace chebsip {

inline constexpr double kVertexTol = 1e-9;

namespace detail {

inline bool next_combination(std::vector<std::size_t>& idx, std::size_t m) {
  const std::size_t k = idx.size();
  for (std::size_t i = k; i-- > 0;) {
    if (idx[i] < m - k + i) {
      ++idx[i];
      for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
      return true;
    }
  }
  return false;
}

inline double binomial(std::size_t m, std::size_t k) {
  if (k > m) return 0.0;
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(m - i) / static_cast<double>(i + 1);
  return c;
}

inline void push_unique(std::vector<Vec>& pts, const Vec& u, double tol) {
  for (const Vec& v : pts)
    if ((v - u).cwiseAbs().maxCoeff() <= tol) return;
  pts.push_back(u);
}

}  // namespace detail

/// Vertices of a polytope index set (ambient coordinates) by k-wise facet
/// intersection in parameter coordinates. nullopt when the set is not a
/// polytope or more than `cap` combinations would be needed.
inline std::optional<std::vector<Vec>> enumerate_vertices(const ConstraintSet& set, double cap = 3e5) {
  if (!set.is_polytope()) return std::nullopt;
  const Eigen::Index k = set.param_dim();
  if (k == 0) return std::vector<Vec>{set.feasible_point()};
  const std::vector<Halfspace> hs = set.param_halfspaces();
  const std::size_t m = hs.size();
  if (detail::binomial(m, static_cast<std::size_t>(k)) > cap) return std::nullopt;
  std::vector<Vec> out;
  std::vector<std::size_t> idx(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Matrix a(k, k);
  Vec b(k);
  do {
    for (Eigen::Index r = 0; r < k; ++r) {
      a.row(r) = hs[idx[static_cast<std::size_t>(r)]].normal.transpose();
      b[r] = hs[idx[static_cast<std::size_t>(r)]].offset;
    }
    Eigen::FullPivLU<Matrix> lu(a);
    if (lu.rank() < k) continue;
    const Vec z = lu.solve(b);
    if (!z.allFinite()) continue;
    const double scale = 1.0 + z.cwiseAbs().maxCoeff();
    bool inside = true;
    for (const auto& h : hs)
      if (h.value(z) > kVertexTol * scale * (1.0 + h.normal.cwiseAbs().maxCoeff())) {
        inside = false;
        break;
      }
    if (!inside) continue;
    const Vec u = set.lift(z);
    if (set.residual(u) > kVertexTol * scale) continue;
    detail::push_unique(out, u, 1e-9 * scale);
  } while (detail::next_combination(idx, m));
  return out;
}

/// Pairwise intersections of the boundary curves of a planar index set
/// (box edges, halfspace lines, circles from quadratics with isotropic
/// quadratic part), kept when feasible. Tangent contacts count as
/// intersections. Catches corner and cusp points that sampling misses.
inline std::vector<Vec> boundary_candidates_2d(const ConstraintSet& set) {
  std::vector<Vec> out;
  if (set.dim() != 2 || set.has_equalities()) return out;
  struct Line {
    Vec n;
    double c;  // n.u = c
  };
  struct Circle {
    Vec center;
    double r2;
  };
  std::vector<Line> lines;
  std::vector<Circle> circles;
  const BoxDomain& box = set.box();
  for (int j = 0; j < 2; ++j) {
    Vec e = Vec::Zero(2);
    e[j] = 1.0;
    lines.push_back({e, box.lower()[j]});
    lines.push_back({e, box.upper()[j]});
  }
  for (const auto& h : set.spec().halfspaces) lines.push_back({h.normal, h.offset});
  for (const auto& q : set.spec().quadratics) {
    // s*(|u|^2) + l.u + c with quad = s I
    const double s = q.quad(0, 0);
    if (std::abs(s) < 1e-300 || std::abs(q.quad(0, 1)) > 1e-14 * std::abs(s) ||
        std::abs(q.quad(1, 1) - s) > 1e-14 * std::abs(s))
      continue;
    const Vec center = -q.linear / (2.0 * s);
    const double r2 = center.squaredNorm() - q.constant / s;
    if (r2 >= 0) circles.push_back({center, r2});
  }
  auto keep = [&](const Vec& u) {
    if (u.allFinite() && set.residual(u) <= 1e-9) detail::push_unique(out, u, 1e-12);
  };
  auto line_circle = [&](const Line& l, const Circle& c) {
    const double nn = l.n.squaredNorm();
    if (nn == 0) return;
    const Vec foot = c.center + (l.c - l.n.dot(c.center)) / nn * l.n;
    const double d2 = (foot - c.center).squaredNorm();
    double disc = c.r2 - d2;
    if (disc < -1e-12 * std::max(1.0, c.r2)) return;
    disc = std::max(0.0, disc);
    const Vec dir = vec({-l.n[1], l.n[0]}) / std::sqrt(nn);
    const double h = std::sqrt(disc);
    keep(foot + h * dir);
    keep(foot - h * dir);
  };
  for (std::size_t i = 0; i < lines.size(); ++i)
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      Matrix a(2, 2);
      a.row(0) = lines[i].n.transpose();
      a.row(1) = lines[j].n.transpose();
      if (std::abs(a.determinant()) < 1e-14 * (1.0 + a.cwiseAbs().maxCoeff())) continue;
      keep(a.partialPivLu().solve(vec({lines[i].c, lines[j].c})));
    }
  for (const auto& l : lines)
    for (const auto& c : circles) line_circle(l, c);
  for (std::size_t i = 0; i < circles.size(); ++i)
    for (std::size_t j = i + 1; j < circles.size(); ++j) {
      // radical line: 2 (c_j - c_i).u = r_i^2 - r_j^2 - |c_i|^2 + |c_j|^2
      const Circle& a = circles[i];
      const Circle& b = circles[j];
      const Vec n = 2.0 * (b.center - a.center);
      if (n.norm() == 0) continue;
      line_circle({n, a.r2 - b.r2 - a.center.squaredNorm() + b.center.squaredNorm()}, a);
    }
  return out;
}

/// argmax dir.z over the polytope in parameter coordinates (ambient result).
inline Vec lp_maximize(const ConstraintSet& set, const Vec& dir, const Vec& start) {
  FiniteConvexProgram p;
  p.objective.push_back(ConvexFunction::affine(-dir, 0.0));
  for (const auto& h : set.param_halfspaces()) p.constraints.push_back(ConvexFunction::affine(h.normal, -h.offset));
  p.state_box = set.param_box();
  const InnerSolution s = solve_finite_convex(p, p.state_box.clip(set.coordinates(start)), 1e-10);
  return set.lift(s.x_star);
}

/// Local maximization of a convex function of the index point over a polytope
/// by successive linearization: each step jumps to the LP vertex of the
/// finite-difference gradient. Stops when the value stops increasing.
inline Vec polytope_ascent(const ConstraintSet& set, const std::function<double(const Vec&)>& f, Vec u,
                           int max_steps = 30) {
  const Eigen::Index k = set.param_dim();
  double fu = f(u);
  for (int it = 0; it < max_steps && k > 0; ++it) {
    const Vec z = set.coordinates(u);
    Vec g(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(z[i]));
      Vec zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      g[i] = (f(set.lift(zp)) - f(set.lift(zm))) / (2 * h);
    }
    if (!g.allFinite() || g.cwiseAbs().maxCoeff() == 0.0) break;
    const Vec next = lp_maximize(set, g, u);
    const double fn = f(next);
    if (!(fn > fu + 1e-13 * (1.0 + std::abs(fu))) || set.residual(next) > kVertexTol) break;
    u = next;
    fu = fn;
  }
  return u;
}

}  // namespace chebsip
