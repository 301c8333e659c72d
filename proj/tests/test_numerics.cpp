#include "chebsip/norm.hpp"
#include "chebsip/quadrature.hpp"
#include "chebsip/sets.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace chebsip;

namespace {

Matrix triangle_weight() {
  Matrix m(2, 2);
  m << 4.01933, -2.038, -2.038, 14.6273;
  return m;
}

std::vector<Norm> all_norms(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> g;
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  const Matrix spd = a * a.transpose() + Matrix::Identity(n, n);
  Matrix b(n + 2, n);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = g(rng);
  return {Norm::l1(), Norm::l2(), Norm::linf(), Norm::weighted(spd), Norm::gram(spd), Norm::gram_factor(b)};
}

Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 3.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

ConstraintSet l1_polytope() {
  ConstraintSet::Spec s;
  s.box = BoxDomain(Vec::Constant(2, -5), Vec::Constant(2, 5));
  s.halfspaces = {{vec({1, 2}), 2}, {vec({-1, 2}), 2}, {vec({1, -4}), 2}, {vec({-1, 0}), 2}};
  return ConstraintSet(s);
}

}  // namespace

TEST(Norm, Examples) {
  EXPECT_DOUBLE_EQ(Norm::l1()(Eigen::Vector2d(1, -2)), 3.0);
  EXPECT_DOUBLE_EQ(Norm::weighted(Matrix::Identity(2, 2))(Eigen::Vector2d(3, 4)), 5.0);
  EXPECT_NEAR(Norm::weighted(triangle_weight())(Eigen::Vector2d(1, 0)), 2.004827, 1e-6);
}

TEST(Norm, Errors) {
  Matrix bad(2, 2);
  bad << 1, 0, 0, -1;
  EXPECT_THROW(Norm::weighted(bad), Error);
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  EXPECT_THROW(Norm::weighted(asym), Error);
  EXPECT_THROW(Norm::weighted(triangle_weight())(Vec::Ones(3)), Error);
  try {
    Norm::weighted(bad);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotPositiveDefinite);
  }
}

TEST(Norm, SubgradientExamples) {
  const Vec s2 = Norm::l2().subgradient(Eigen::Vector2d(3, 4));
  EXPECT_NEAR(s2[0], 0.6, 1e-15);
  EXPECT_NEAR(s2[1], 0.8, 1e-15);
  EXPECT_EQ(Norm::l1().subgradient(Eigen::Vector2d(1, -2)), Eigen::Vector2d(1, -1));
  EXPECT_EQ(Norm::linf().subgradient(Eigen::Vector2d(0, 0)), Eigen::Vector2d(0, 0));

  // l1 at (0,5): the selection (0,1) must satisfy the subgradient inequality
  // on a grid of test points.
  const Vec v = Eigen::Vector2d(0, 5);
  const Vec s = Norm::l1().subgradient(v);
  EXPECT_EQ(s, Eigen::Vector2d(0, 1));
  for (int i = -40; i <= 40; ++i)
    for (int j = -40; j <= 40; ++j) {
      const Vec w = Eigen::Vector2d(0.25 * i, 0.25 * j);
      EXPECT_GE(Norm::l1()(w), Norm::l1()(v) + s.dot(w - v) - 1e-12);
    }
}

TEST(Norm, HomogeneityAndTriangle) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-4, 4);
  for (const Norm& n : all_norms(rng, 3)) {
    EXPECT_EQ(n(Vec::Zero(3)), 0.0);
    for (int k = 0; k < 1000; ++k) {
      const Vec a = random_vec(rng, 3), b = random_vec(rng, 3);
      const double t = c(rng);
      EXPECT_NEAR(n(t * a), std::abs(t) * n(a), 1e-9 * (1 + n(a) * std::abs(t)));
      EXPECT_LE(n(a + b), n(a) + n(b) + 1e-9);
      if (n.kind() != Norm::Kind::GramL2 || n.factor().rows() >= 3) EXPECT_GT(n(a), 0.0);
    }
  }
}

TEST(Norm, SubgradientInequality) {
  std::mt19937_64 rng(12);
  for (const Norm& n : all_norms(rng, 3)) {
    for (int k = 0; k < 1000; ++k) {
      Vec v = random_vec(rng, 3);
      if (k % 10 == 0) v[k % 3] = 0.0;  // kinks for l1
      if (k % 17 == 0) v[1] = v[0];     // ties for linf
      if (k % 50 == 0) v.setZero();
      const Vec w = random_vec(rng, 3);
      const Vec s = n.subgradient(v);
      EXPECT_GE(n(w), n(v) + s.dot(w - v) - 1e-9) << n.name();
    }
    // At the origin the selection is zero, whose dual norm is <= 1.
    EXPECT_LE(n.subgradient(Vec::Zero(3)).norm(), 0.0);
  }
}

TEST(Norm, SmoothGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(13);
  for (const Norm& n : all_norms(rng, 3)) {
    if (n.is_polyhedral()) continue;
    const Vec v = random_vec(rng, 3);
    const Vec s = n.subgradient(v);
    const Matrix h = n.hessian(v);
    for (int i = 0; i < 3; ++i) {
      Vec e = Vec::Zero(3);
      e[i] = 1e-6;
      EXPECT_NEAR((n(v + e) - n(v - e)) / 2e-6, s[i], 1e-6);
      const Vec ds = (n.subgradient(v + e) - n.subgradient(v - e)) / 2e-6;
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(ds[j], h(j, i), 1e-5);
    }
  }
}

TEST(Norm, ScaledNorm) {
  const Norm n = Norm::l1().scaled(2.5);
  EXPECT_DOUBLE_EQ(n(Eigen::Vector2d(1, -2)), 7.5);
  EXPECT_EQ(n.subgradient(Eigen::Vector2d(1, -2)), Eigen::Vector2d(2.5, -2.5));
  EXPECT_THROW(Norm::l2().scaled(0.0), Error);
}

TEST(Affine, Examples) {
  Matrix a1(1, 1);
  a1 << 1;
  const auto p1 = affine_parametrize(a1, Vec::Constant(1, 3));
  EXPECT_NEAR(p1.particular[0], 3.0, 1e-12);
  EXPECT_EQ(p1.free_dim(), 0);

  Matrix a2(1, 2);
  a2 << 2, -1;
  const auto p2 = affine_parametrize(a2, Vec::Constant(1, -3));
  EXPECT_NEAR(2 * p2.particular[0] - p2.particular[1], -3.0, 1e-10);
  ASSERT_EQ(p2.free_dim(), 1);
  const Vec dir = p2.basis.col(0) * (p2.basis(0, 0) > 0 ? 1.0 : -1.0);
  EXPECT_NEAR(dir[0], 1 / std::sqrt(5.0), 1e-10);
  EXPECT_NEAR(dir[1], 2 / std::sqrt(5.0), 1e-10);
  EXPECT_LE((a2 * p2.basis).cwiseAbs().maxCoeff(), 1e-10);

  const auto p3 = affine_parametrize(Matrix(0, 3), Vec(0));
  EXPECT_EQ(p3.particular, Vec::Zero(3));
  EXPECT_EQ(p3.basis, Matrix::Identity(3, 3));
}

TEST(Affine, Inconsistent) {
  Matrix a(2, 2);
  a << 1, 1, 2, 2;
  EXPECT_THROW(affine_parametrize(a, Eigen::Vector2d(1, 3)), Error);
}

TEST(Affine, RoundTripProperty) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index m = 1 + trial % 3, n = 4 + trial % 3;
    Matrix a(m, n);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
    if (trial % 5 == 0) a.row(m - 1) = a.row(0);  // rank deficient
    const Vec y = a * random_vec(rng, n);
    const auto p = affine_parametrize(a, y);
    Eigen::FullPivLU<Matrix> lu(a);
    EXPECT_EQ(p.free_dim(), n - lu.rank());
    EXPECT_LE((a * p.particular - y).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((p.basis.transpose() * p.basis - Matrix::Identity(p.free_dim(), p.free_dim())).cwiseAbs().maxCoeff(),
              1e-10);
    for (int k = 0; k < 20; ++k) {
      const Vec z = random_vec(rng, p.free_dim(), 10.0);
      EXPECT_LE((a * p.lift(z) - y).cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Gram, MonomialsMatchHilbert) {
  const Matrix g2 = gram_matrix(monomial_basis(2));
  EXPECT_NEAR(g2(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(g2(0, 1), 0.5, 1e-14);
  EXPECT_NEAR(g2(1, 1), 1.0 / 3.0, 1e-14);
  const Matrix g = gram_matrix(monomial_basis(9));
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 9; ++j) EXPECT_NEAR(g(i, j), 1.0 / (i + j + 1), 1e-10);
  const Matrix g1 = gram_matrix({FunctionDescriptor::monomial(0)});
  EXPECT_NEAR(g1(0, 0), 1.0, 1e-14);
}

TEST(Gram, OrthonormalBasisGivesIdentity) {
  std::vector<FunctionDescriptor> b;
  for (int d = 0; d < 12; ++d) b.push_back(FunctionDescriptor::legendre(d));
  const Matrix g = gram_matrix(b);
  EXPECT_LE((g - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Gram, NonFiniteRejected) {
  EXPECT_THROW(gram_matrix({FunctionDescriptor::from([](double x) { return 1.0 / (x - x); })}), Error);
}

TEST(Quadrature, ExactForHighDegree) {
  const QuadratureRule r = gauss_legendre(64, 0.0, 1.0);
  EXPECT_NEAR(r.weights.sum(), 1.0, 1e-14);
  double s = 0;
  for (Eigen::Index i = 0; i < 64; ++i) s += r.weights[i] * std::pow(r.nodes[i], 127);
  EXPECT_NEAR(s, 1.0 / 128.0, 1e-14);
}

TEST(Residual, Examples) {
  ConstraintSet::Spec unit;
  unit.box = BoxDomain::cube(1, 0, 1);
  const ConstraintSet s(unit);
  EXPECT_EQ(feasibility_residual(s, Vec::Constant(1, 0.5)), 0.0);
  EXPECT_DOUBLE_EQ(feasibility_residual(s, Vec::Constant(1, 1.5)), 0.5);
  EXPECT_EQ(feasibility_residual(l1_polytope(), Eigen::Vector2d(0, 0)), 0.0);
  EXPECT_GT(feasibility_residual(l1_polytope(), Eigen::Vector2d(0, 1.5)), 0.0);
}

TEST(Residual, ContinuityAlongSegments) {
  const ConstraintSet s = l1_polytope();
  const Vec a = Eigen::Vector2d(-4, -3), b = Eigen::Vector2d(4, 3);
  double prev = s.residual(a);
  for (int i = 1; i <= 1000; ++i) {
    const double r = s.residual(a + (b - a) * (i / 1000.0));
    EXPECT_LE(std::abs(r - prev), 0.1);
    prev = r;
  }
}

TEST(ConstraintSetTest, EmptySetRejected) {
  ConstraintSet::Spec s;
  s.box = BoxDomain::cube(2, 0, 1);
  s.halfspaces = {{vec({1, 1}), -1}};
  EXPECT_THROW(ConstraintSet{s}, Error);
}

TEST(ConstraintSetTest, AffineSliceParametrization) {
  ConstraintSet::Spec s;
  s.box = BoxDomain(Eigen::Vector2d(-5, -10), Eigen::Vector2d(5, 10));
  Matrix a(1, 2);
  a << 2, -1;
  s.equalities = AffineEqualities{a, Vec::Constant(1, -3)};
  const ConstraintSet set(s);
  EXPECT_EQ(set.param_dim(), 1);
  EXPECT_LE(set.residual(set.feasible_point()), ConstraintSet::kFeasTol);
  // every feasible point of the slice has parameter inside the parameter box
  for (double x = -5; x <= 3.5; x += 0.25) {
    const Vec u = Eigen::Vector2d(x, 2 * x + 3);
    EXPECT_TRUE(set.param_box().contains(set.coordinates(u), 1e-12));
    EXPECT_LE((set.lift(set.coordinates(u)) - u).norm(), 1e-12);
  }
}

TEST(Box, DiameterUnderNorms) {
  const BoxDomain b(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 2));
  EXPECT_DOUBLE_EQ(b.diameter(Norm::l1()), 3.0);
  EXPECT_DOUBLE_EQ(b.diameter(Norm::linf()), 2.0);
  const Norm w = Norm::weighted(triangle_weight());
  EXPECT_NEAR(b.diameter(w), std::max(w(Eigen::Vector2d(1, 2)), w(Eigen::Vector2d(1, -2))), 1e-14);
  EXPECT_THROW(BoxDomain(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)), Error);
}
