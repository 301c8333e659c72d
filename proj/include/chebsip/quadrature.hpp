#pragma once

#include "chebsip/core.hpp"

#include <functional>
#include <numbers>
#include <vector>

namespace chebsip {

struct QuadratureRule {
  Vec nodes;
  Vec weights;
};

/// n-point Gauss-Legendre rule mapped to [a, b] (Newton on P_n).
inline QuadratureRule gauss_legendre(int n, double a = 0.0, double b = 1.0) {
  require(n > 0, ErrorKind::Precondition, "quadrature order");
  QuadratureRule rule{Vec(n), Vec(n)};
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged node
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  const double half = 0.5 * (b - a);
  rule.nodes = (rule.nodes.array() * half + 0.5 * (a + b)).matrix();
  rule.weights *= half;
  return rule;
}

/// A real function on an interval, described either as a monomial x^degree,
/// an orthonormal shifted Legendre polynomial on [0,1], or an arbitrary callable.
struct FunctionDescriptor {
  enum class Kind { Monomial, ShiftedLegendre, Custom };
  Kind kind = Kind::Monomial;
  int degree = 0;
  std::function<double(double)> custom;

  static FunctionDescriptor monomial(int d) { return {Kind::Monomial, d, {}}; }
  static FunctionDescriptor legendre(int d) { return {Kind::ShiftedLegendre, d, {}}; }
  static FunctionDescriptor from(std::function<double(double)> f) { return {Kind::Custom, 0, std::move(f)}; }

  double operator()(double x) const {
    switch (kind) {
      case Kind::Monomial: return std::pow(x, degree);
      case Kind::ShiftedLegendre: {
        const double t = 2.0 * x - 1.0;
        double p0 = 1.0, p1 = t;
        if (degree == 0) return 1.0;
        for (int k = 2; k <= degree; ++k) {
          const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        return std::sqrt(2.0 * degree + 1.0) * p1;
      }
      case Kind::Custom: return custom(x);
    }
    return 0.0;
  }
};

/// L^2 inner product on [a, b].
struct L2InnerProduct {
  double a = 0.0;
  double b = 1.0;
};

inline constexpr int kGramNodes = 64;

/// Weighted sample matrix F with F(q, i) = sqrt(w_q) b_i(x_q); G = F^T F.
inline Matrix quadrature_factor(const std::vector<FunctionDescriptor>& basis, const L2InnerProduct& ip = {}) {
  const QuadratureRule rule = gauss_legendre(kGramNodes, ip.a, ip.b);
  Matrix f(kGramNodes, static_cast<Eigen::Index>(basis.size()));
  for (Eigen::Index q = 0; q < kGramNodes; ++q) {
    const double sw = std::sqrt(rule.weights[q]);
    for (std::size_t i = 0; i < basis.size(); ++i) f(q, static_cast<Eigen::Index>(i)) = sw * basis[i](rule.nodes[q]);
  }
  require(f.allFinite(), ErrorKind::NonFinite, "basis function values at quadrature nodes");
  return f;
}

inline Matrix gram_matrix(const std::vector<FunctionDescriptor>& basis, const L2InnerProduct& ip = {}) {
  const Matrix f = quadrature_factor(basis, ip);
  Matrix g = f.transpose() * f;
  g = 0.5 * (g + g.transpose()).eval();
  require(g.allFinite(), ErrorKind::NonFinite, "Gram matrix");
  return g;
}

inline std::vector<FunctionDescriptor> monomial_basis(int count) {
  std::vector<FunctionDescriptor> out;
  for (int d = 0; d < count; ++d) out.push_back(FunctionDescriptor::monomial(d));
  return out;
}

}  // namespace chebsip
