#include "chebsip/global.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace chebsip;

namespace {

const Strategy kAll[] = {Strategy::DifferentialEvolution, Strategy::SimulatedAnnealing,
                         Strategy::NelderMeadMultistart};

GlobalConfig config(Strategy s, long evals = 4000) {
  GlobalConfig c;
  c.strategy = s;
  c.seed = 5;
  c.max_evals = evals;
  return c;
}

double wiggly(const Vec& u) { return std::sin(5 * u[0]) + 0.5 * std::sin(17 * u[0]); }

double rastrigin_neg(const Vec& u) {
  double s = 20.0;
  for (int i = 0; i < 2; ++i) s += u[i] * u[i] - 10 * std::cos(2 * std::numbers::pi * u[i]);
  return -s;
}

}  // namespace

TEST(Global, SmoothParabola) {
  auto f = [](const Vec& u) { return -(u[0] - 0.3) * (u[0] - 0.3); };
  for (Strategy s : kAll) {
    const auto r = maximize_box(f, BoxDomain::cube(1, 0, 1), config(s));
    EXPECT_NEAR(r.u_star[0], 0.3, 1e-4) << to_string(s);
    EXPECT_NEAR(r.value, 0.0, 1e-8) << to_string(s);
  }
}

TEST(Global, MultimodalMatchesDenseGrid) {
  double grid = -kInf;
  for (int i = 0; i <= 1000000; ++i) grid = std::max(grid, wiggly(Vec::Constant(1, 3.0 * i / 1e6)));
  for (Strategy s : {Strategy::DifferentialEvolution, Strategy::NelderMeadMultistart}) {
    const auto r = maximize_box(wiggly, BoxDomain::cube(1, 0, 3), config(s));
    EXPECT_NEAR(r.value, grid, 1e-4) << to_string(s);
  }
  auto sa = config(Strategy::SimulatedAnnealing, 20000);
  const auto r = maximize_with_restarts(wiggly, BoxDomain::cube(1, 0, 3), sa, 5);
  EXPECT_NEAR(r.value, grid, 1e-4);
}

TEST(Global, RastriginOrigin) {
  for (Strategy s : {Strategy::DifferentialEvolution, Strategy::NelderMeadMultistart}) {
    auto c = config(s, 20000);
    c.nm_restarts = 60;
    const auto r = maximize_box(rastrigin_neg, BoxDomain::cube(2, -2, 2), c);
    EXPECT_LE(r.u_star.norm(), 1e-3) << to_string(s);
    EXPECT_NEAR(r.value, 0.0, 1e-3) << to_string(s);
  }
}

TEST(Global, SeedDeterminismBitForBit) {
  for (Strategy s : kAll) {
    const auto a = maximize_box(rastrigin_neg, BoxDomain::cube(2, -2, 2), config(s));
    const auto b = maximize_box(rastrigin_neg, BoxDomain::cube(2, -2, 2), config(s));
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.u_star, b.u_star);
    EXPECT_EQ(a.evals, b.evals);
    EXPECT_EQ(a.history, b.history);
  }
}

TEST(Global, ThreadCountDoesNotChangeResult) {
  auto c = config(Strategy::DifferentialEvolution);
  const auto a = maximize_box(rastrigin_neg, BoxDomain::cube(2, -2, 2), c);
  c.threads = 3;
  const auto b = maximize_box(rastrigin_neg, BoxDomain::cube(2, -2, 2), c);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.u_star, b.u_star);
  EXPECT_EQ(a.history, b.history);
}

TEST(Global, HistoryMonotoneAndFinal) {
  for (Strategy s : kAll) {
    const auto r = maximize_box(wiggly, BoxDomain::cube(1, 0, 3), config(s));
    ASSERT_FALSE(r.history.empty());
    double hmax = -kInf;
    for (std::size_t i = 0; i < r.history.size(); ++i) {
      if (i > 0) {
        EXPECT_GE(r.history[i].second, r.history[i - 1].second);
        EXPECT_GE(r.history[i].first, r.history[i - 1].first);
      }
      hmax = std::max(hmax, r.history[i].second);
    }
    EXPECT_EQ(r.value, hmax);
    EXPECT_EQ(r.value, wiggly(r.u_star));
  }
}

TEST(Global, EvaluationsStayInsideBox) {
  const BoxDomain box(vec({-1, 2}), vec({0.5, 3}));
  for (Strategy s : kAll) {
    bool inside = true;
    auto f = [&](const Vec& u) {
      inside = inside && box.contains(u);
      return -(u - vec({0.7, 3.5})).squaredNorm();  // optimum outside: pushes against the walls
    };
    const auto r = maximize_box(f, box, config(s, 2000));
    EXPECT_TRUE(inside) << to_string(s);
    EXPECT_NEAR(r.u_star[0], 0.5, 1e-6);
    EXPECT_NEAR(r.u_star[1], 3.0, 1e-6);
  }
}

TEST(Global, RestartsAgreeOnSmoothAndBestOfFive) {
  auto f = [](const Vec& u) { return -(u[0] - 0.3) * (u[0] - 0.3) - (u[1] + 0.2) * (u[1] + 0.2); };
  const auto r = maximize_with_restarts(f, BoxDomain::cube(2, -1, 1), config(Strategy::DifferentialEvolution), 4);
  ASSERT_EQ(r.per_restart.size(), 4u);
  for (double v : r.per_restart) EXPECT_NEAR(v, r.per_restart[0], 1e-6);

  auto c = config(Strategy::SimulatedAnnealing, 300);
  const auto one = maximize_box(wiggly, BoxDomain::cube(1, 0, 3), c);
  const auto five = maximize_with_restarts(wiggly, BoxDomain::cube(1, 0, 3), c, 5);
  EXPECT_GE(five.value, one.value);
  EXPECT_EQ(five.per_restart[0], one.value);
  for (std::size_t i = 1; i < five.history.size(); ++i) EXPECT_GE(five.history[i].second, five.history[i - 1].second);
}

TEST(Global, InfeasibleRanksLast) {
  // -inf on the right half; the finite part peaks at the boundary x = 0.5
  auto f = [](const Vec& u) { return u[0] > 0.5 ? -kInf : u[0]; };
  for (Strategy s : kAll) {
    const auto r = maximize_box(f, BoxDomain::cube(1, 0, 1), config(s));
    EXPECT_TRUE(std::isfinite(r.value));
    EXPECT_LE(r.u_star[0], 0.5);
    EXPECT_GT(r.value, 0.45) << to_string(s);
  }
  auto all_bad = [](const Vec&) { return -kInf; };
  EXPECT_THROW(maximize_box(all_bad, BoxDomain::cube(1, 0, 1), config(Strategy::DifferentialEvolution, 100)), Error);
}

TEST(Global, TiesGoToEarliestEvaluation) {
  auto flat = [](const Vec&) { return 1.0; };
  auto c = config(Strategy::NelderMeadMultistart, 50);
  c.seeds = {vec({0.25})};
  const auto r = maximize_box(flat, BoxDomain::cube(1, 0, 1), c);
  EXPECT_EQ(r.u_star[0], 0.25);
  EXPECT_EQ(r.history.front().first, 1);
}

TEST(Global, DegenerateDimensionsFixed) {
  const BoxDomain box(vec({0, 2}), vec({1, 2}));
  auto f = [](const Vec& u) { return -(u[0] - 0.6) * (u[0] - 0.6) + u[1]; };
  const auto r = maximize_box(f, box, config(Strategy::DifferentialEvolution));
  EXPECT_EQ(r.u_star[1], 2.0);
  EXPECT_NEAR(r.u_star[0], 0.6, 1e-5);
  const auto point = maximize_box(f, BoxDomain(vec({1, 1}), vec({1, 1})), config(Strategy::SimulatedAnnealing));
  EXPECT_EQ(point.evals, 1);
}

TEST(Global, ConfigErrors) {
  auto c = config(Strategy::DifferentialEvolution);
  c.population = 3;
  EXPECT_THROW(maximize_box(wiggly, BoxDomain::cube(1, 0, 1), c), Error);
  c.population = 50;
  c.max_evals = 10;
  EXPECT_THROW(maximize_box(wiggly, BoxDomain::cube(1, 0, 1), c), Error);
  EXPECT_THROW(maximize_with_restarts(wiggly, BoxDomain::cube(1, 0, 1), config(Strategy::SimulatedAnnealing), 0),
               Error);
  EXPECT_THROW(strategy_from_string("pso"), Error);
}

TEST(Global, SeedsAreUsed) {
  // narrow spike that blind sampling misses
  auto spike = [](const Vec& u) { return std::abs(u[0] - 0.123456) < 1e-7 ? 1.0 : 0.0; };
  auto c = config(Strategy::DifferentialEvolution, 200);
  c.seeds = {vec({0.123456})};
  EXPECT_EQ(maximize_box(spike, BoxDomain::cube(1, 0, 1), c).value, 1.0);
}
