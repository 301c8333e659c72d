#include "chebsip/chebyshev.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace chebsip;

namespace {

const double kR3 = std::sqrt(3.0);

ChebyshevTask make_task(ConstraintSet::Spec spec, Norm norm = Norm::l2()) {
  ChebyshevTask t;
  t.set = std::make_shared<ConstraintSet>(std::move(spec));
  t.norm = norm;
  return t;
}

ChebyshevTask l1_polytope() {
  return make_task({BoxDomain::cube(2, -3, 3),
                    {{vec({1, 2}), 2}, {vec({-1, 2}), 2}, {vec({1, -4}), 2}, {vec({-1, 0}), 2}},
                    {},
                    {},
                    {}},
                   Norm::l1());
}

ChebyshevTask lens(const Vec& shift = Vec::Zero(2)) {
  return make_task({BoxDomain(shift, shift + Vec::Ones(2)),
                    {},
                    {QuadraticInequality::ball(shift, 1.0 / 9, true),
                     QuadraticInequality::ball(shift + vec({1, 0}), 4.0 / 9, true)},
                    {},
                    {}});
}

Matrix triangle_weight() {
  Matrix m(2, 2);
  m << 4.01933, -2.038, -2.038, 14.6273;
  return m;
}

ChebyshevTask triangle(Norm norm = Norm::weighted(triangle_weight())) {
  return make_task(
      {BoxDomain(vec({-1, 0}), vec({1, kR3})), {{vec({kR3, 1}), kR3}, {vec({-kR3, 1}), kR3}, {vec({0, -1}), 0}}, {}, {}, {}},
      norm);
}

// y = 2x + 3 inside a region of the plane
ChebyshevTask line_slice(bool ellipse, Norm norm) {
  ConstraintSet::Spec s;
  Matrix a(1, 2);
  a << 2, -1;
  s.equalities = AffineEqualities{a, vec({-3})};
  if (ellipse) {
    s.box = BoxDomain::cube(2, -11, 11);
    Matrix q(2, 2);
    q << 1, 0, 0, 3;
    s.quadratics.push_back({q, Vec::Zero(2), -100.0});
  } else {
    s.box = BoxDomain(vec({-5, -10}), vec({5, 10}));
  }
  return make_task(s, norm);
}

GlobalConfig cfg(std::uint64_t seed = 1, long evals = 600) {
  GlobalConfig c;
  c.seed = seed;
  c.max_evals = evals;
  return c;
}

// smallest enclosing Euclidean circle of a finite set, by pairs and triples
std::pair<double, Vec> enclosing_circle(const std::vector<Vec>& pts) {
  double best = kInf;
  Vec bc;
  auto consider = [&](const Vec& c) {
    double r = 0.0;
    for (const Vec& p : pts) r = std::max(r, (p - c).norm());
    if (r < best - 1e-12) {
      best = r;
      bc = c;
    }
  };
  if (pts.size() == 1) return {0.0, pts[0]};
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      consider(0.5 * (pts[i] + pts[j]));
      for (std::size_t k = j + 1; k < pts.size(); ++k) {
        const Vec b = pts[j] - pts[i], c = pts[k] - pts[i];
        const double d = 2 * (b[0] * c[1] - b[1] * c[0]);
        if (std::abs(d) < 1e-14) continue;
        const double ux = (c[1] * b.squaredNorm() - b[1] * c.squaredNorm()) / d;
        const double uy = (b[0] * c.squaredNorm() - c[0] * b.squaredNorm()) / d;
        consider(pts[i] + vec({ux, uy}));
      }
    }
  return {best, bc};
}

// vertices of {u : n_i.u <= b_i} by pairwise line intersection
std::vector<Vec> polygon_vertices(const std::vector<Halfspace>& hs) {
  std::vector<Vec> out;
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (std::size_t j = i + 1; j < hs.size(); ++j) {
      Matrix a(2, 2);
      a << hs[i].normal.transpose(), hs[j].normal.transpose();
      if (std::abs(a.determinant()) < 1e-12) continue;
      const Vec u = a.inverse() * vec({hs[i].offset, hs[j].offset});
      bool in = true;
      for (const auto& h : hs) in = in && h.normal.dot(u) <= h.offset + 1e-9;
      bool dup = false;
      for (const Vec& v : out) dup = dup || (v - u).norm() < 1e-9;
      if (in && !dup) out.push_back(u);
    }
  return out;
}

}  // namespace

TEST(ChebyshevSip, SingletonHasZeroRadius) {
  ChebyshevTask t = make_task({BoxDomain(vec({0, 0}), vec({0, 0})), {}, {}, {}, {}});
  const SipProblem sip = build_chebyshev_sip(t);
  EXPECT_EQ(sip.dim_x, 3);
  const auto r = chebyshev_center(t, cfg());
  EXPECT_NEAR(r.radius, 0.0, 1e-8);
  EXPECT_LT(r.center.norm(), 1e-6);
  EXPECT_TRUE(r.check.ok);
}

TEST(ChebyshevSip, Structure) {
  const ChebyshevSetup s = prepare_chebyshev(l1_polytope());
  EXPECT_EQ(s.sip.dim_x, 3);
  EXPECT_EQ(s.sip.state_box.lower()[0], 0.0);
  EXPECT_GE(s.t_max, 2.5);
  ASSERT_TRUE(s.vertices.has_value());
  EXPECT_EQ(s.vertices->size(), 4u);
  // g((t, c), k) = ||c - k|| - t
  const Vec x = vec({1.0, 0.5, -0.5});
  EXPECT_NEAR(s.sip.constraint(vec({2, 0})).value(x), 1.5 + 0.5 - 1.0, 1e-12);
}

TEST(Chebyshev, UnitSquare) {
  const auto r = chebyshev_center(make_task({BoxDomain::cube(2, 0, 1), {}, {}, {}, {}}), cfg());
  EXPECT_NEAR(r.radius, std::sqrt(0.5), 1e-6);
  EXPECT_NEAR(r.center[0], 0.5, 1e-4);
  EXPECT_NEAR(r.center[1], 0.5, 1e-4);
  EXPECT_TRUE(r.check.ok);
  EXPECT_GE(r.check.probes, 10000u);
}

TEST(Chebyshev, L1Polytope) {
  for (bool fixed_psi : {false, true}) {
    ChebyshevTask t = l1_polytope();
    if (fixed_psi) t.psi_center = vec({2, 2, 2});
    const auto r = chebyshev_center(t, cfg());
    EXPECT_NEAR(r.radius, 2.5, 1e-6);
    EXPECT_NEAR(r.center[0], -0.25, 1e-3);
    EXPECT_NEAR(r.center[1], -0.25, 1e-3);
    EXPECT_TRUE(r.check.ok);
    EXPECT_TRUE(r.path.monotone);
  }
}

TEST(Chebyshev, L1RelaxedOptimumNeedNotCircumscribe) {
  // (2,0) and (-2,-1) are 5 apart in l1, so any tuple holding both already
  // has value 2.5; (0.5,-1) is a minimizer of that relaxation which misses (-2,0)
  const ChebyshevTask t = l1_polytope();
  const ChebyshevSetup s = prepare_chebyshev(t);
  const std::vector<Vec> tuple{vec({2, 0}), vec({-2, -1}), vec({-2, -1})};
  EXPECT_NEAR(rho_eval(s.sip, tuple, s.sip.slater).value, 2.5, 1e-6);
  const Vec c = vec({0.5, -1.0});
  for (const Vec& k : tuple) EXPECT_LE(t.distance(c, k), 2.5 + 1e-12);
  const auto bad = circumscription_check(t, s, c, 2.5);
  EXPECT_FALSE(bad.ok);
  EXPECT_NEAR(bad.worst, 1.0, 1e-9);
  EXPECT_TRUE(circumscription_check(t, s, vec({-0.25, -0.25}), 2.5).ok);
}

TEST(Chebyshev, L1UnregularizedRunsAreRecorded) {
  const ChebyshevTask t = l1_polytope();
  ChebyshevOptions o;
  o.regularized = false;
  int bad = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = chebyshev_center(t, cfg(seed), o);
    EXPECT_NEAR(r.radius, 2.5, 1e-6);
    EXPECT_TRUE(r.path.steps.empty());
    bad += !r.check.ok;
    EXPECT_EQ(r.check.ok, r.diagnostics.empty());
  }
  RecordProperty("non_circumscribing", bad);
}

TEST(Chebyshev, Lens) {
  GlobalConfig c = cfg();
  c.strategy = Strategy::NelderMeadMultistart;
  const auto r = chebyshev_center(lens(), c);
  EXPECT_NEAR(r.radius, 0.633431, 1e-6);
  EXPECT_NEAR(r.center[0], 0.5, 1e-4);
  EXPECT_NEAR(r.center[1], 0.611112, 1e-4);
  EXPECT_TRUE(r.check.ok);
  // the cusp tip is one of the contact points
  bool cusp = false;
  for (const Vec& u : r.active_points) cusp = cusp || (u - vec({1.0 / 3, 0})).norm() < 1e-6;
  EXPECT_TRUE(cusp);
}

TEST(Chebyshev, LensBoundaryCandidates) {
  const auto pts = boundary_candidates_2d(*lens().set);
  for (const Vec& want : {vec({0, 1}), vec({1, 1}), vec({0, 1.0 / 3}), vec({1, 2.0 / 3}), vec({1.0 / 3, 0})}) {
    bool found = false;
    for (const Vec& u : pts) found = found || (u - want).norm() < 1e-9;
    EXPECT_TRUE(found) << want.transpose();
  }
}

TEST(Chebyshev, LensSimulatedAnnealingStall) {
  GlobalConfig c = cfg(5, 3000);
  c.strategy = Strategy::SimulatedAnnealing;
  ChebyshevOptions o;
  o.regularized = false;
  o.path.msa.seed_tuples = false;
  o.path.msa.exchange = false;
  const auto r = chebyshev_center(lens(), c, o);
  EXPECT_NEAR(r.radius, 0.600925, 1e-3);
  EXPECT_LT(r.radius, 0.633431 - 1e-2);
  EXPECT_FALSE(r.check.ok);
  EXPECT_FALSE(r.diagnostics.empty());
}

TEST(Chebyshev, WeightedTriangle) {
  const auto good = chebyshev_center(triangle(), cfg());
  EXPECT_NEAR(good.radius, 3.709497, 1e-3);
  EXPECT_TRUE(good.check.ok);

  // independent: enclosing circle of the vertices mapped by M^{1/2}
  Eigen::SelfAdjointEigenSolver<Matrix> eig(triangle_weight());
  const Matrix half = eig.operatorSqrt();
  std::vector<Vec> mapped;
  for (const Vec& v : {vec({-1, 0}), vec({1, 0}), vec({0, kR3})}) mapped.push_back(half * v);
  const auto [rad, c] = enclosing_circle(mapped);
  EXPECT_NEAR(good.radius, rad, 1e-6);
  EXPECT_LT((good.center - half.inverse() * c).norm(), 1e-4);

  GlobalConfig nm = cfg(1, 4000);
  nm.strategy = Strategy::NelderMeadMultistart;
  nm.nm_restarts = 5;
  ChebyshevOptions o;
  o.regularized = false;
  o.path.msa.seed_tuples = false;
  o.path.msa.exchange = false;
  const auto stall = chebyshev_center(triangle(), nm, o);
  EXPECT_NEAR(stall.radius, 3.706789, 1e-3);
  EXPECT_FALSE(stall.check.ok);
  EXPECT_GE(good.radius, stall.radius);
}

TEST(ChebyshevProperties, TranslationEquivariance) {
  const Vec v = vec({2.5, -1.25});
  GlobalConfig c = cfg();
  c.strategy = Strategy::NelderMeadMultistart;
  const auto a = chebyshev_center(lens(), c);
  const auto b = chebyshev_center(lens(v), c);
  EXPECT_NEAR(a.radius, b.radius, 1e-6);
  EXPECT_LT((b.center - a.center - v).norm(), 1e-4);

  ChebyshevTask t = triangle(Norm::l2());
  ConstraintSet::Spec s = t.set->spec();
  s.box = BoxDomain(s.box.lower() + v, s.box.upper() + v);
  for (auto& h : s.halfspaces) h.offset += h.normal.dot(v);
  const auto p = chebyshev_center(t, cfg());
  const auto q = chebyshev_center(make_task(s), cfg());
  EXPECT_NEAR(p.radius, 2.0 / kR3, 1e-6);
  EXPECT_NEAR(p.radius, q.radius, 1e-6);
  EXPECT_LT((q.center - p.center - v).norm(), 1e-4);
}

TEST(ChebyshevProperties, NormScaling) {
  for (double k : {0.5, 3.0}) {
    ChebyshevTask a = triangle(), b = triangle(Norm::weighted(triangle_weight()).scaled(k));
    const auto ra = chebyshev_center(a, cfg());
    const auto rb = chebyshev_center(b, cfg());
    EXPECT_NEAR(rb.radius, k * ra.radius, 1e-6 * k);
    EXPECT_LT((rb.center - ra.center).norm(), 1e-4);
  }
}

TEST(ChebyshevProperties, VertexOracleOnRandomPolygons) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0.0, 2 * std::numbers::pi), off(0.5, 1.5);
  for (int trial = 0; trial < 6; ++trial) {
    std::vector<Halfspace> hs;
    const int m = 3 + trial % 4;
    for (int i = 0; i < m; ++i) {
      const double a = ang(rng);
      hs.push_back({vec({std::cos(a), std::sin(a)}), off(rng)});
    }
    ConstraintSet::Spec s{BoxDomain::cube(2, -2, 2), hs, {}, {}, {}};
    std::vector<Halfspace> all = hs;
    for (int j = 0; j < 2; ++j)
      for (double sg : {1.0, -1.0}) {
        Vec e = Vec::Zero(2);
        e[j] = sg;
        all.push_back({e, 2.0});
      }
    const auto [rad, c] = enclosing_circle(polygon_vertices(all));
    const auto r = chebyshev_center(make_task(s), cfg(trial + 1));
    EXPECT_NEAR(r.radius, rad, 1e-6) << trial;
    EXPECT_LT((r.center - c).norm(), 1e-4) << trial;
    EXPECT_TRUE(r.check.ok);
  }
}

TEST(ChebyshevProperties, LineSliceIsNormIndependent) {
  const std::vector<Norm> norms{Norm::l1(), Norm::l2(), Norm::weighted(triangle_weight())};
  for (bool ellipse : {false, true}) {
    // segment ends: x = -5, 3.5 for the rectangle, 13x^2 + 36x - 73 = 0 for the ellipse
    const Vec want = ellipse ? vec({-18.0 / 13, 3.0 / 13}) : vec({-0.75, 1.5});
    for (const Norm& n : norms) {
      const auto r = chebyshev_center(line_slice(ellipse, n), cfg());
      EXPECT_LT((r.center - want).norm(), 1e-4) << ellipse;
      EXPECT_TRUE(r.check.ok);
    }
  }
}

TEST(ChebyshevProperties, PlaneSliceCenterStaysOnPlane) {
  const Vec n = vec({1, 0.7, 0.49});
  ConstraintSet::Spec s{BoxDomain::cube(3, -15, 15), {}, {}, {}, AffineEqualities{n.transpose(), vec({n.sum()})}};
  ChebyshevTask t = make_task(s);
  const auto r = chebyshev_center(t, cfg());
  EXPECT_NEAR(n.dot(r.center) - n.sum(), 0.0, 1e-6);
  EXPECT_TRUE(r.check.ok);

  // grid oracle over the parametrized plane: radius of the vertex hull,
  // centers restricted to the plane
  const auto verts = enumerate_vertices(*t.set);
  ASSERT_TRUE(verts.has_value());
  EXPECT_EQ(verts->size(), 6u);
  const AffineParametrization& p = t.set->parametrization();
  double best = kInf;
  const int g = 400;
  for (int i = 0; i <= g; ++i)
    for (int j = 0; j <= g; ++j) {
      const Vec c = p.particular + p.basis * vec({-20.0 + 40.0 * i / g, -20.0 + 40.0 * j / g});
      double worst = 0.0;
      for (const Vec& v : *verts) worst = std::max(worst, (v - c).norm());
      best = std::min(best, worst);
    }
  EXPECT_LE(r.radius, best + 1e-9);
  EXPECT_GE(r.radius, best - 0.1 * std::sqrt(2.0));
}

TEST(ChebyshevProperties, RegularizationPathIsMonotone) {
  GlobalConfig nm = cfg();
  nm.strategy = Strategy::NelderMeadMultistart;
  for (const auto& [t, c] : {std::pair{l1_polytope(), cfg()}, std::pair{lens(), nm}}) {
    ChebyshevOptions o;
    o.path.stop_tol = 0.0;
    const auto r = chebyshev_center(t, c, o);
    ASSERT_EQ(r.path.steps.size(), 21u);
    for (std::size_t k = 1; k < r.path.steps.size(); ++k) {
      EXPECT_LE(r.path.steps[k].f, r.path.steps[k - 1].f + 1e-6);
      EXPECT_GE(r.path.steps[k].psi, r.path.steps[k - 1].psi - 1e-6);
    }
  }
}

TEST(Circumscription, RejectsBadCenterAndNeedsProbes) {
  const ChebyshevTask t = make_task({BoxDomain::cube(2, 0, 1), {}, {}, {}, {}});
  EXPECT_TRUE(circumscription_check(t, vec({0.5, 0.5}), std::sqrt(0.5) + 1e-9).ok);
  const auto r = circumscription_check(t, vec({0.4, 0.5}), std::sqrt(0.5));
  EXPECT_FALSE(r.ok);
  EXPECT_NEAR(r.worst, std::hypot(0.6, 0.5) - std::sqrt(0.5), 1e-9);
  EXPECT_THROW(circumscription_check(t, vec({0.5, 0.5}), 1.0, 999), Error);
}

TEST(Chebyshev, StrictModeThrowsOnStall) {
  GlobalConfig c = cfg(5, 3000);
  c.strategy = Strategy::SimulatedAnnealing;
  ChebyshevOptions o;
  o.regularized = false;
  o.strict = true;
  o.path.msa.seed_tuples = false;
  o.path.msa.exchange = false;
  EXPECT_THROW(chebyshev_center(lens(), c, o), Error);
}

TEST(ChebyshevSip, SeededDeterminism) {
  const auto a = chebyshev_center(l1_polytope(), cfg(7));
  const auto b = chebyshev_center(l1_polytope(), cfg(7));
  EXPECT_EQ(a.radius, b.radius);
  EXPECT_EQ(a.center, b.center);
}
