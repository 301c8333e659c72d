#include "chebsip/sip.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace chebsip;

namespace {

constexpr double kPi = std::numbers::pi;

// minimize f s.t. x cos(th) + y sin(th) <= 3 for th in [lo, hi]
SipProblem disk_sip(std::vector<ConvexFunction> objective, double lo = 0.0, double hi = 2 * kPi,
                    double box = 4.0) {
  SipProblem s;
  s.dim_x = 2;
  s.objective = std::move(objective);
  s.constraint = [](const Vec& th) { return ConvexFunction::affine(vec({std::cos(th[0]), std::sin(th[0])}), -3.0); };
  s.state_box = std::isfinite(box) ? BoxDomain::cube(2, -box, box) : BoxDomain::cube(2, -kInf, kInf);
  ConstraintSet::Spec u;
  u.box = BoxDomain(Vec::Constant(1, lo), Vec::Constant(1, hi));
  s.index_set = std::make_shared<ConstraintSet>(u);
  s.slater = vec({0, 0});
  s.label = "disk";
  s.separation = sampled_separation(s);
  return s;
}

ConvexFunction lin_y() { return ConvexFunction::affine(vec({0, 1}), 0.0); }
ConvexFunction psi_a() { return ConvexFunction::squared_distance(vec({0, 0}), Vec::Ones(2)); }
ConvexFunction psi_b() { return ConvexFunction::squared_distance(vec({1, 0}), Vec::Ones(2)); }

GlobalConfig de(std::uint64_t seed = 1) {
  GlobalConfig c;
  c.seed = seed;
  c.max_evals = 3000;
  return c;
}

std::vector<Vec> thetas(std::initializer_list<double> t) {
  std::vector<Vec> out;
  for (double v : t) out.push_back(Vec::Constant(1, v));
  return out;
}

}  // namespace

TEST(Rho, Examples) {
  const SipProblem s = disk_sip({lin_y()});
  validate_sip(s);
  EXPECT_NEAR(rho_eval(s, thetas({3 * kPi / 2, kPi, 0}), s.slater).value, -3.0, 1e-7);
  EXPECT_NEAR(rho_eval(s, thetas({kPi / 2, kPi / 2, kPi / 2}), s.slater).value, -4.0, 1e-7);
  EXPECT_THROW(rho_eval(s, thetas({7.0}), s.slater), Error);
}

TEST(Rho, TwoPointChebyshev) {
  SipProblem s;
  s.dim_x = 3;
  s.objective = {ConvexFunction::affine(vec({1, 0, 0}), 0.0)};
  Matrix sel = Matrix::Zero(2, 3);
  sel(0, 1) = sel(1, 2) = 1;
  s.constraint = [sel](const Vec& k) { return ConvexFunction::norm_ball(Norm::l2(), sel, k, vec({-1, 0, 0}), 0.0); };
  s.state_box = BoxDomain(vec({0, -5, -5}), vec({20, 5, 5}));
  ConstraintSet::Spec u;
  u.box = BoxDomain(vec({0, 0}), vec({2, 0}));
  s.index_set = std::make_shared<ConstraintSet>(u);
  s.slater = vec({20, 0, 0});
  EXPECT_NEAR(rho_eval(s, {vec({0, 0}), vec({2, 0})}, s.slater).value, 1.0, 1e-7);
}

TEST(SipValue, Disk) {
  const SipProblem s = disk_sip({lin_y()});
  const auto r = solve_sip_value(s, de());
  EXPECT_NEAR(r.value, -3.0, 1e-4);
  EXPECT_EQ(r.certificate.inner.status, InnerStatus::Optimal);
}

TEST(SipValue, SingletonIndexSetIsOneInnerSolve) {
  const SipProblem s = disk_sip({lin_y()}, 1.0, 1.0);
  const auto r = solve_sip_value(s, de());
  const auto one = rho_eval(s, thetas({1.0, 1.0}), s.slater, nullptr, 1e-10);
  EXPECT_NEAR(r.value, one.value, 1e-9);
  EXPECT_EQ(r.search.evals, 1);
}

TEST(SipValue, WeakRelaxation) {
  const SipProblem s = disk_sip({lin_y()});
  const double v = solve_sip_value(s, de()).value;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> th(0, 2 * kPi);
  for (int i = 0; i < 100; ++i) {
    const double r = rho_eval(s, thetas({th(rng), th(rng)}), s.slater).value;
    EXPECT_LE(r, v + 1e-6);
  }
}

TEST(SipRegularized, DiskBothRegularizers) {
  const SipProblem s = disk_sip({lin_y()});
  const auto a = solve_sip_regularized(s, psi_a(), 0.1, de());
  const auto b = solve_sip_regularized(s, psi_b(), 0.1, de());
  // psi_a is constant on the circle, so the point is (0,-3) exactly
  EXPECT_NEAR(a.x_eps[0], 0.0, 1e-6);
  EXPECT_NEAR(a.x_eps[1], -3.0, 1e-6);
  // psi_b pulls towards x = 1 along the arc
  EXPECT_GT(b.x_eps[0], 1e-3);
  EXPECT_NEAR(b.x_eps.norm(), 3.0, 1e-6);
  EXPECT_LE(a.probe_violation, 1e-6);
  EXPECT_LE(b.probe_violation, 1e-6);
  EXPECT_THROW(solve_sip_regularized(s, psi_a(), 0.0, de()), Error);
  // linear psi is not strictly convex
  EXPECT_THROW(solve_sip_regularized(s, ConvexFunction::affine(vec({1, 1}), 10.0), 0.1, de()), Error);
}

TEST(RegPath, DiskLimitsAndLemma) {
  const SipProblem s = disk_sip({lin_y()});
  PathOptions opt;
  opt.stop_tol = 0.0;
  const auto pa = extract_optimizer(s, psi_a(), default_schedule(), de(), opt);
  const auto pb = extract_optimizer(s, psi_b(), default_schedule(), de(), opt);
  for (const auto* p : {&pa, &pb}) {
    ASSERT_EQ(p->steps.size(), 21u);
    EXPECT_TRUE(p->monotone);
    EXPECT_NEAR(p->limit[0], 0.0, 1e-3);
    EXPECT_NEAR(p->limit[1], -3.0, 1e-3);
    for (std::size_t k = 1; k < p->steps.size(); ++k) {
      EXPECT_LE(p->steps[k].f, p->steps[k - 1].f + 1e-6);
      EXPECT_GE(p->steps[k].psi, p->steps[k - 1].psi - 1e-6);
    }
  }
  // Lemma bound: psi along the path never exceeds psi at the optimizer (0,-3)
  for (const auto& st : pa.steps) EXPECT_LE(st.psi, 4.5 + 1e-6);
  for (const auto& st : pb.steps) EXPECT_LE(st.psi, 5.0 + 1e-6);
  // unique optimizer: both regularizers lead to the same limit
  EXPECT_LE((pa.limit - pb.limit).norm(), 1e-4);
  // the interior phase: eps = 1 gives (0,-1), eps = 1/2 gives (0,-2)
  EXPECT_NEAR(pa.steps[0].x[1], -1.0, 1e-6);
  EXPECT_NEAR(pa.steps[1].x[1], -2.0, 1e-6);
}

TEST(RegPath, FeasibilityOfLimitOnDenseProbe) {
  const SipProblem s = disk_sip({lin_y()});
  const auto p = extract_optimizer(s, psi_b(), default_schedule(), de());
  EXPECT_LE(probe_violation(s, p.limit, 20000).worst, 1e-6);
  EXPECT_TRUE(p.converged || p.steps.size() == 21u);
}

TEST(RegPath, StrictlyConvexObjectiveGivesConstantPath) {
  // u x + (1-u) y <= 1 for u in [0,1] is the quadrant x, y <= 1;
  // minimizing 0.5|x - (3,3)|^2 gives x* = (1,1) and psi = 0.5|x|^2 keeps it there for eps < 2
  SipProblem s;
  s.dim_x = 2;
  s.objective = {ConvexFunction::squared_distance(vec({3, 3}), Vec::Ones(2))};
  s.constraint = [](const Vec& u) { return ConvexFunction::affine(vec({u[0], 1 - u[0]}), -1.0); };
  s.state_box = BoxDomain::cube(2, -4, 4);
  ConstraintSet::Spec us;
  us.box = BoxDomain::cube(1, 0, 1);
  s.index_set = std::make_shared<ConstraintSet>(us);
  s.slater = vec({0, 0});
  PathOptions opt;
  opt.stop_tol = 0.0;
  for (bool exchange : {false, true}) {
    if (exchange) s.separation = sampled_separation(s);
    const auto p = extract_optimizer(s, psi_a(), default_schedule(1.0, 21), de(), opt);
    for (const auto& st : p.steps) EXPECT_LE((st.x - vec({1, 1})).norm(), 1e-6) << st.eps;
    EXPECT_TRUE(p.monotone);
  }
}

TEST(RegPath, CurvedFeasibleSetRegularizerIndependentLimit) {
  // minimize 0.5|x - (3,3)|^2 over the disk: x* = (3,3)/sqrt 2
  const SipProblem s = disk_sip({ConvexFunction::squared_distance(vec({3, 3}), Vec::Ones(2))});
  PathOptions opt;
  opt.stop_tol = 0.0;
  const Vec xs = Vec::Constant(2, 3.0 / std::sqrt(2.0));
  for (const auto& psi : {psi_a(), psi_b()}) {
    const auto q = extract_optimizer(s, psi, default_schedule(), de(), opt);
    EXPECT_LE((q.limit - xs).norm(), 1e-5);
    EXPECT_TRUE(q.monotone);
  }
}

TEST(RegPath, ExchangeOffStillSolvesDiskToMsaAccuracy) {
  const SipProblem s = disk_sip({lin_y()});
  PathOptions opt;
  opt.msa.exchange = false;
  const auto p = extract_optimizer(s, psi_a(), default_schedule(), de(), opt);
  EXPECT_NEAR(p.limit[1], -3.0, 1e-3);
  EXPECT_LE(probe_violation(s, p.limit, 20000).worst, 1e-3);
}

TEST(RegPath, ScheduleValidation) {
  const SipProblem s = disk_sip({lin_y()});
  EXPECT_THROW(extract_optimizer(s, psi_a(), {0.5, 0.6}, de()), Error);
  EXPECT_THROW(extract_optimizer(s, psi_a(), {}, de()), Error);
  EXPECT_THROW(extract_optimizer(s, psi_a(), {0.5, 0.0}, de()), Error);
}

TEST(Compactify, DiskValueUnchanged) {
  const SipProblem s = disk_sip({lin_y()});
  const SipProblem c = compactify(s, vec({0, 0}));
  ASSERT_EQ(c.state_constraints.size(), 1u);
  // the added constraint reads y - 1 <= 0
  EXPECT_NEAR(c.state_constraints[0].value(vec({0, 1})), 0.0, 1e-15);
  EXPECT_NEAR(c.state_constraints[0].value(vec({5, 0})), -1.0, 1e-15);
  EXPECT_NEAR(solve_sip_value(c, de()).value, solve_sip_value(s, de()).value, 1e-9);
  // twice is idempotent on the value
  const SipProblem cc = compactify(c, vec({0, -1}));
  EXPECT_NEAR(solve_sip_value(cc, de()).value, -3.0, 1e-4);
}

TEST(Compactify, UnboundedStateSetNeedsIt) {
  // coercive objective 0.5(x^2 + (y+5)^2) on the whole plane
  const SipProblem s = disk_sip({ConvexFunction::squared_distance(vec({0, -5}), Vec::Ones(2))}, 0.0, 2 * kPi, kInf);
  EXPECT_THROW(extract_optimizer(s, psi_a(), default_schedule(1.0, 4), de()), Error);
  const SipProblem c = compactify(s, vec({0, 0}));
  const auto p = extract_optimizer(c, psi_a(), default_schedule(), de());
  EXPECT_NEAR(p.limit[0], 0.0, 1e-4);
  EXPECT_NEAR(p.limit[1], -3.0, 1e-4);
  EXPECT_NEAR(sip_objective(c, p.limit), 2.0, 1e-4);
}

TEST(Sip, SlaterValidation) {
  SipProblem s = disk_sip({lin_y()});
  s.slater = vec({3, 3});
  EXPECT_THROW(validate_sip(s), Error);
}
