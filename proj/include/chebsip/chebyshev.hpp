#pragma once

#include "chebsip/polytope.hpp"
#include "chebsip/sip.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chebsip {

/// Chebyshev center of a compact set K: minimize max_{k in K} ||A c - B k||
/// over centers c. A and B default to the identity (plain Chebyshev center of
/// K in its ambient space); the learning tasks use them to compare functions
/// through stacked coefficient vectors.
struct ChebyshevTask {
  std::shared_ptr<const ConstraintSet> set;
  Norm norm = Norm::l2();
  Matrix center_map;  // A, q x L; empty: identity
  Matrix index_map;   // B, q x m; empty: identity
  std::optional<BoxDomain> search_box;
  /// Regularizer center in (t, c); default (0, projection of the middle of K).
  std::optional<Vec> psi_center;
  int sample_count = 0;  // 0: 1 + L
  std::string label;

  Eigen::Index index_dim() const { return set->dim(); }
  Eigen::Index center_dim() const { return center_map.size() ? center_map.cols() : index_dim(); }
  Matrix a() const { return center_map.size() ? center_map : Matrix::Identity(index_dim(), index_dim()); }
  Matrix b() const { return index_map.size() ? index_map : Matrix::Identity(index_dim(), index_dim()); }

  double distance(const Vec& c, const Vec& u) const {
    const Vec d = (center_map.size() ? Vec(center_map * c) : c) - (index_map.size() ? Vec(index_map * u) : u);
    return norm(d);
  }
};

struct CircumscriptionReport {
  bool ok = false;
  double worst = kInf;  // max_k ||c - k|| - radius over the probes
  Vec argmax;
  std::size_t probes = 0;
};

/// Everything derived from a task once: the SIP in (t, c), the regularizer
/// and the special points of K used for seeding and probing.
struct ChebyshevSetup {
  SipProblem sip;
  ConvexFunction psi = ConvexFunction::affine(Vec(), 0.0);
  std::optional<std::vector<Vec>> vertices;
  std::vector<Vec> candidates;  // vertices or boundary intersections
  std::vector<Vec> extremes;    // LP extreme points of large polytopes
  BoxDomain search_box;
  double t_max = 0.0;
  Matrix center_projection;  // index point -> nearest center coordinates
  Vec middle;                // middle of K (index coordinates)
};

inline constexpr double kCircumscriptionTol = 1e-6;

namespace detail {

// min_c ||A c - B u|| is linear in u for inner-product norms; elsewhere use
// the Euclidean least-squares projection.
inline Matrix center_projection(const ChebyshevTask& task) {
  Matrix a = task.a(), b = task.b();
  if (task.norm.kind() == Norm::Kind::WeightedL2 || task.norm.kind() == Norm::Kind::GramL2) {
    a = task.norm.factor() * a;
    b = task.norm.factor() * b;
  }
  return a.completeOrthogonalDecomposition().solve(b);
}

// Farthest-first tuples over a point set: start from a point, repeatedly add
// the point maximizing its distance to the chosen ones.
inline std::vector<std::vector<Vec>> farthest_first_tuples(const ChebyshevTask& task, const std::vector<Vec>& pts,
                                                           std::size_t n, std::size_t starts) {
  std::vector<std::vector<Vec>> out;
  const Matrix b = task.b();
  auto dist = [&](const Vec& u, const Vec& v) { return task.norm(b * (u - v)); };
  for (std::size_t s = 0; s < std::min(starts, pts.size()); ++s) {
    std::vector<std::size_t> chosen{s * pts.size() / std::min(starts, pts.size())};
    while (chosen.size() < n && chosen.size() < pts.size()) {
      std::size_t best = 0;
      double bd = -1.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) != chosen.end()) continue;
        double d = kInf;
        for (std::size_t j : chosen) d = std::min(d, dist(pts[i], pts[j]));
        if (d > bd) {
          bd = d;
          best = i;
        }
      }
      chosen.push_back(best);
    }
    std::vector<Vec> t;
    for (std::size_t i : chosen) t.push_back(pts[i]);
    while (t.size() < n) t.push_back(t.back());
    out.push_back(t);
  }
  return out;
}

inline std::vector<std::vector<Vec>> candidate_tuples(const ChebyshevTask& task, const std::vector<Vec>& pts,
                                                      std::size_t n) {
  std::vector<std::vector<Vec>> out;
  if (pts.empty()) return out;
  if (pts.size() >= n && binomial(pts.size(), n) <= 64) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    do {
      std::vector<Vec> t;
      for (std::size_t i : idx) t.push_back(pts[i]);
      out.push_back(t);
    } while (next_combination(idx, pts.size()));
    return out;
  }
  return farthest_first_tuples(task, pts, n, 16);
}

// Endpoints of a one-dimensional convex slice by bisection from a feasible point.
inline std::vector<Vec> segment_ends(const ConstraintSet& set) {
  std::vector<Vec> out;
  if (set.param_dim() != 1) return out;
  const double z0 = set.coordinates(set.feasible_point())[0];
  const BoxDomain& pb = set.param_box();
  for (double end : {pb.lower()[0], pb.upper()[0]}) {
    double in = z0, out_z = end;
    if (set.feasible(set.lift(vec({end})))) {
      out.push_back(set.lift(vec({end})));
      continue;
    }
    for (int it = 0; it < 200 && std::abs(out_z - in) > 1e-15 * (1.0 + std::abs(in)); ++it) {
      const double mid = 0.5 * (in + out_z);
      (set.feasible(set.lift(vec({mid}))) ? in : out_z) = mid;
    }
    out.push_back(set.lift(vec({in})));
  }
  return out;
}

}  // namespace detail

/// Feasible low-discrepancy sample of K. Thin polytopes (where filtering the
/// parameter box rejects nearly everything) are filled up from the tight box
/// of the extreme points and then by Dirichlet-weighted convex combinations
/// of the extreme points.
inline std::vector<Vec> sample_index(const ConstraintSet& set, const std::vector<Vec>& extremes, std::size_t count,
                                     std::uint64_t seed) {
  std::vector<Vec> pts = sample_index_set(set, count, seed);
  if (pts.size() >= count || extremes.size() < 2 || set.param_dim() == 0) return pts;
  const Eigen::Index k = set.param_dim();
  Vec lo = Vec::Constant(k, kInf), hi = Vec::Constant(k, -kInf);
  for (const Vec& u : extremes) {
    lo = lo.cwiseMin(set.coordinates(u));
    hi = hi.cwiseMax(set.coordinates(u));
  }
  const BoxDomain tight(lo, hi);
  ScrambledHalton box_seq(static_cast<std::size_t>(k), derive_seed(seed, 1));
  for (std::uint64_t i = 0; pts.size() < count && i < 20 * static_cast<std::uint64_t>(count); ++i) {
    const Vec u = set.lift(tight.from_unit(box_seq.point(i)));
    if (set.residual(u) <= ConstraintSet::kFeasTol) pts.push_back(u);
  }
  ScrambledHalton simplex_seq(extremes.size(), derive_seed(seed, 2));
  for (std::uint64_t i = 0; pts.size() < count; ++i) {
    const Vec sv = simplex_seq.point(i);
    Vec lam = (-sv.array().max(1e-300).log()).matrix();
    lam /= lam.sum();
    Vec u = Vec::Zero(set.dim());
    for (std::size_t j = 0; j < extremes.size(); ++j) u += lam[static_cast<Eigen::Index>(j)] * extremes[j];
    if (set.residual(u) <= ConstraintSet::kFeasTol) pts.push_back(u);
  }
  return pts;
}

inline ChebyshevSetup prepare_chebyshev(const ChebyshevTask& task) {
  require(task.set != nullptr, ErrorKind::Precondition, "Chebyshev task needs an index set");
  const Matrix a = task.a(), b = task.b();
  require(a.rows() == b.rows(), ErrorKind::DimensionMismatch, "center and index maps");
  require_dim(b.cols(), task.index_dim(), "index map");
  if (task.norm.dim() > 0) require_dim(task.norm.dim(), a.rows(), "norm");
  const ConstraintSet& set = *task.set;
  const Eigen::Index l = task.center_dim();

  ChebyshevSetup s;
  s.center_projection = detail::center_projection(task);
  s.vertices = set.param_dim() <= 4 ? enumerate_vertices(set) : std::nullopt;
  if (s.vertices)
    s.candidates = *s.vertices;
  else
    s.candidates = boundary_candidates_2d(set);
  for (const Vec& u : detail::segment_ends(set)) detail::push_unique(s.candidates, u, 1e-14);

  // extent of K, in index coordinates (for the middle) and in center coordinates
  if (set.is_polytope() && !s.vertices) {
    // LP extremes of every center coordinate and every parameter coordinate
    const Matrix& nb = set.parametrization().basis;
    const Matrix dirs_c = set.has_equalities() ? Matrix(s.center_projection * nb) : s.center_projection;
    for (Eigen::Index i = 0; i < l; ++i)
      for (double sg : {1.0, -1.0})
        detail::push_unique(s.extremes, lp_maximize(set, sg * dirs_c.row(i).transpose(), set.feasible_point()), 1e-9);
    for (Eigen::Index i = 0; i < set.param_dim(); ++i)
      for (double sg : {1.0, -1.0}) {
        Vec e = Vec::Zero(set.param_dim());
        e[i] = sg;
        detail::push_unique(s.extremes, lp_maximize(set, e, set.feasible_point()), 1e-9);
      }
  }
  std::vector<Vec> pts = sample_index(set, s.extremes, 2048, 5);
  pts.push_back(set.feasible_point());
  for (const Vec& u : s.candidates) pts.push_back(u);
  for (const Vec& u : s.extremes) pts.push_back(u);
  Vec zlo = Vec::Constant(set.param_dim(), kInf), zhi = Vec::Constant(set.param_dim(), -kInf);
  Vec clo = Vec::Constant(l, kInf), chi = Vec::Constant(l, -kInf);
  double resid = 0.0;
  for (const Vec& u : pts) {
    const Vec z = set.coordinates(u);
    zlo = zlo.cwiseMin(z);
    zhi = zhi.cwiseMax(z);
    const Vec c = s.center_projection * u;
    clo = clo.cwiseMin(c);
    chi = chi.cwiseMax(c);
    resid = std::max(resid, task.distance(c, u));
  }
  s.middle = set.lift(0.5 * (zlo + zhi));
  if (!set.feasible(s.middle)) s.middle = set.feasible_point();
  s.search_box = task.search_box ? *task.search_box : BoxDomain(clo, chi).inflated(0.5);
  require_dim(s.search_box.dim(), l, "search box");
  require(s.search_box.bounded(), ErrorKind::Precondition, "search box must be bounded");

  double diam = 0.0;
  if (task.center_map.size() == 0) {
    diam = s.search_box.diameter(task.norm);
  } else {
    const Vec w = s.search_box.width();
    Matrix ra = a;
    if (task.norm.factor().size()) ra = task.norm.factor() * a;
    if (task.norm.kind() == Norm::Kind::L2 || task.norm.factor().size())
      diam = task.norm.scale() * ra.operatorNorm() * w.norm();
    else
      for (Eigen::Index j = 0; j < l; ++j) diam += w[j] * task.norm(a.col(j));
  }
  s.t_max = 1.1 * diam + 2.0 * resid;
  if (!(s.t_max > 0)) s.t_max = 1.0;

  SipProblem& sip = s.sip;
  sip.dim_x = 1 + l;
  Vec e = Vec::Zero(1 + l);
  e[0] = 1.0;
  sip.objective = {ConvexFunction::affine(e, 0.0)};
  Matrix p = Matrix::Zero(a.rows(), 1 + l);
  p.rightCols(l) = a;
  const Norm norm = task.norm;
  sip.constraint = [norm, p, b, e](const Vec& u) { return ConvexFunction::norm_ball(norm, p, b * u, -e, 0.0); };
  Vec lo(1 + l), hi(1 + l);
  lo[0] = 0.0;
  hi[0] = s.t_max;
  lo.tail(l) = s.search_box.lower();
  hi.tail(l) = s.search_box.upper();
  sip.state_box = BoxDomain(lo, hi);
  sip.index_set = task.set;
  sip.slater = Vec(1 + l);
  sip.slater[0] = s.t_max;
  sip.slater.tail(l) = s.search_box.center();
  sip.sample_count = task.sample_count > 0 ? task.sample_count : static_cast<int>(1 + l);
  sip.inner_tol = 1e-9;
  sip.label = task.label;
  sip.probe_extras = s.candidates;
  validate_sip(sip);

  // seeds: tuples of special points, best relaxation value first
  auto tuples = detail::candidate_tuples(task, s.candidates, static_cast<std::size_t>(sip.tuple_size()));
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < tuples.size(); ++i) order.emplace_back(-rho_eval(sip, tuples[i], sip.slater).value, i);
  std::stable_sort(order.begin(), order.end());
  for (const auto& [v, i] : order) sip.seed_tuples.push_back(tuples[i]);

  if (s.vertices) {
    // a convex function of k peaks at a vertex: exact separation
    auto verts = std::make_shared<std::vector<Vec>>(*s.vertices);
    auto family = sip.constraint;
    sip.separation = [verts, family](const Vec& x) {
      std::size_t best = 0;
      double bv = -kInf;
      for (std::size_t i = 0; i < verts->size(); ++i) {
        const double v = family((*verts)[i]).value(x);
        if (v > bv) {
          bv = v;
          best = i;
        }
      }
      return (*verts)[best];
    };
  } else if (set.is_polytope()) {
    auto setp = task.set;
    auto starts = std::make_shared<std::vector<Vec>>(sample_index(set, s.extremes, 256, 43));
    for (const Vec& u : pts) starts->push_back(u);
    auto family = sip.constraint;
    sip.separation = [setp, starts, family](const Vec& x) {
      std::vector<std::pair<double, std::size_t>> vals;
      for (std::size_t i = 0; i < starts->size(); ++i) vals.emplace_back(family((*starts)[i]).value(x), i);
      std::stable_sort(vals.begin(), vals.end(), [](const auto& p1, const auto& p2) { return p1.first > p2.first; });
      auto f = [&](const Vec& u) { return family(u).value(x); };
      Vec best = (*starts)[vals.front().second];
      double bv = vals.front().first;
      for (std::size_t j = 0; j < std::min<std::size_t>(3, vals.size()); ++j) {
        const Vec u = polytope_ascent(*setp, f, (*starts)[vals[j].second]);
        const double v = f(u);
        if (v > bv) {
          bv = v;
          best = u;
        }
      }
      return best;
    };
  } else {
    sip.separation = sampled_separation(sip);
  }

  Vec pc(1 + l);
  if (task.psi_center) {
    require_dim(task.psi_center->size(), 1 + l, "regularizer center");
    pc = *task.psi_center;
  } else {
    pc[0] = 0.0;
    pc.tail(l) = s.center_projection * s.middle;
  }
  s.psi = ConvexFunction::squared_distance(pc, Vec::Ones(1 + l));
  return s;
}

inline SipProblem build_chebyshev_sip(const ChebyshevTask& task) { return prepare_chebyshev(task).sip; }

/// Probes K (low-discrepancy sample, special points, and for large polytopes
/// LP ascents from the worst sample points) for points outside the ball.
inline CircumscriptionReport circumscription_check(const ChebyshevTask& task, const ChebyshevSetup& setup,
                                                   const Vec& center, double radius, std::size_t probes = 10000) {
  require(probes >= 1000, ErrorKind::Precondition, "circumscription check needs at least 1000 probes");
  const ConstraintSet& set = *task.set;
  std::vector<Vec> pts = sample_index(set, setup.extremes, probes, 61);
  for (const Vec& u : setup.extremes) pts.push_back(u);
  for (const Vec& u : setup.candidates) pts.push_back(u);
  pts.push_back(set.feasible_point());
  CircumscriptionReport r;
  r.worst = -kInf;
  std::vector<std::pair<double, std::size_t>> vals;
  for (std::size_t i = 0; i < pts.size(); ++i) vals.emplace_back(task.distance(center, pts[i]) - radius, i);
  if (set.is_polytope() && !setup.vertices) {
    std::stable_sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    auto f = [&](const Vec& u) { return task.distance(center, u); };
    for (std::size_t j = 0; j < std::min<std::size_t>(5, vals.size()); ++j) {
      const Vec u = polytope_ascent(set, f, pts[vals[j].second]);
      pts.push_back(u);
      vals.emplace_back(f(u) - radius, pts.size() - 1);
    }
  }
  for (const auto& [v, i] : vals)
    if (v > r.worst) {
      r.worst = v;
      r.argmax = pts[i];
    }
  r.probes = pts.size();
  r.ok = r.worst <= kCircumscriptionTol;
  return r;
}

inline CircumscriptionReport circumscription_check(const ChebyshevTask& task, const Vec& center, double radius,
                                                   std::size_t probes = 10000) {
  return circumscription_check(task, prepare_chebyshev(task), center, radius, probes);
}

struct ChebyshevOptions {
  /// false: only the SIP value; the center is the relaxed point of the
  /// certificate (not unique in general)
  bool regularized = true;
  std::vector<double> schedule = default_schedule();
  PathOptions path;
  std::size_t probes = 10000;
  bool strict = false;  // throw when the circumscription check fails
};

struct ChebyshevResult {
  double radius = 0.0;
  Vec center;
  std::vector<Vec> active_points;
  SipValueResult value;
  RegPath path;
  CircumscriptionReport check;
  std::vector<std::string> diagnostics;
};

inline ChebyshevResult chebyshev_center(const ChebyshevTask& task, const GlobalConfig& cfg,
                                        const ChebyshevOptions& opt = {}) {
  const ChebyshevSetup setup = prepare_chebyshev(task);
  const SipProblem& sip = setup.sip;
  const Eigen::Index l = task.center_dim();
  ChebyshevResult r;
  r.value = solve_sip_value(sip, cfg, opt.path.msa);
  r.radius = r.value.value;
  const RhoResult& cert = r.value.certificate;
  for (std::size_t i = 0; i < cert.tuple.size(); ++i) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    const bool active = cert.inner.multipliers.size() > ii ? cert.inner.multipliers[ii] > 1e-9
                                                           : sip.constraint(cert.tuple[i]).value(cert.x_relaxed) > -1e-7;
    bool dup = false;
    for (const Vec& v : r.active_points) dup = dup || (v - cert.tuple[i]).cwiseAbs().maxCoeff() <= 1e-9;
    if (active && !dup) r.active_points.push_back(cert.tuple[i]);
  }
  if (opt.regularized) {
    r.path = extract_optimizer(sip, setup.psi, opt.schedule, cfg, opt.path);
    r.center = r.path.limit.tail(l);
    r.diagnostics = r.path.diagnostics;
  } else {
    r.center = r.value.refined.x_relaxed.tail(l);
  }
  r.check = circumscription_check(task, setup, r.center, r.radius, opt.probes);
  if (!r.check.ok)
    r.diagnostics.push_back("circumscription failed: a point of K lies " + std::to_string(r.check.worst) +
                            " outside the ball (global search stalled?)");
  if (opt.strict && !r.check.ok) throw Error(ErrorKind::SolverFailure, r.diagnostics.back());
  return r;
}

}  // namespace chebsip
