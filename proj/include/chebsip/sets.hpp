#pragma once

#include "chebsip/core.hpp"
#include "chebsip/lowdisc.hpp"
#include "chebsip/norm.hpp"

#include <Eigen/SVD>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace chebsip {

class BoxDomain {
 public:
  BoxDomain() = default;
  BoxDomain(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    require_dim(upper_.size(), lower_.size(), "box bounds");
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      require(!std::isnan(lower_[i]) && !std::isnan(upper_[i]), ErrorKind::NonFinite, "box bound");
      require(lower_[i] <= upper_[i], ErrorKind::Precondition, "box lower bound exceeds upper bound");
    }
  }

  static BoxDomain cube(Eigen::Index n, double lo, double hi) {
    return BoxDomain(Vec::Constant(n, lo), Vec::Constant(n, hi));
  }

  Eigen::Index dim() const { return lower_.size(); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }
  Vec width() const { return upper_ - lower_; }
  Vec center() const { return 0.5 * (lower_ + upper_); }
  bool bounded() const { return lower_.allFinite() && upper_.allFinite(); }

  bool contains(const Vec& u, double tol = 0.0) const {
    require_dim(u.size(), dim(), "box point");
    return ((u - lower_).array() >= -tol).all() && ((upper_ - u).array() >= -tol).all();
  }

  Vec clip(const Vec& u) const { return u.cwiseMax(lower_).cwiseMin(upper_); }

  /// Largest componentwise bound violation (0 inside).
  double violation(const Vec& u) const {
    require_dim(u.size(), dim(), "box point");
    double v = 0.0;
    for (Eigen::Index i = 0; i < dim(); ++i) v = std::max({v, lower_[i] - u[i], u[i] - upper_[i]});
    return v;
  }

  /// Map [0,1]^n onto the box.
  Vec from_unit(const Vec& s) const { return lower_ + width().cwiseProduct(s); }

  BoxDomain inflated(double fraction) const {
    const Vec pad = 0.5 * fraction * width();
    return BoxDomain(lower_ - pad, upper_ + pad);
  }

  /// Diameter under the given norm. Absolute norms attain it at opposite
  /// corners; for the weighted kinds all corner directions are checked up to
  /// dimension 16 and a spectral bound is used beyond.
  double diameter(const Norm& norm) const {
    const Vec w = width();
    if (!norm.is_inner_product() || norm.kind() == Norm::Kind::L2) return norm(w);
    if (dim() <= 16) {
      double best = 0.0;
      const long corners = 1L << dim();
      for (long mask = 0; mask < corners; ++mask) {
        Vec d = w;
        for (Eigen::Index i = 0; i < dim(); ++i)
          if (mask & (1L << i)) d[i] = -d[i];
        best = std::max(best, norm(d));
      }
      return best;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(norm.matrix());
    return norm.scale() * std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff())) * w.norm();
  }

 private:
  Vec lower_;
  Vec upper_;
};

/// Parametrizes {u : A u = y} as p + N z with orthonormal N.
struct AffineParametrization {
  Vec particular;
  Matrix basis;

  Eigen::Index ambient_dim() const { return particular.size(); }
  Eigen::Index free_dim() const { return basis.cols(); }
  Vec lift(const Vec& z) const { return particular + basis * z; }
  Vec coordinates(const Vec& u) const { return basis.transpose() * (u - particular); }
};

inline AffineParametrization affine_parametrize(const Matrix& a, const Vec& y) {
  require_dim(y.size(), a.rows(), "affine right-hand side");
  require(a.allFinite() && y.allFinite(), ErrorKind::NonFinite, "affine system");
  const Eigen::Index n = a.cols();
  AffineParametrization out;
  if (a.rows() == 0) {
    out.particular = Vec::Zero(n);
    out.basis = Matrix::Identity(n, n);
    return out;
  }
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec& sv = svd.singularValues();
  const double tol = static_cast<double>(std::max(a.rows(), n)) * std::numeric_limits<double>::epsilon() *
                     (sv.size() > 0 ? sv[0] : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol) ++rank;
  const Matrix& u = svd.matrixU();
  const Matrix& v = svd.matrixV();
  Vec p = Vec::Zero(n);
  for (Eigen::Index i = 0; i < rank; ++i) p += v.col(i) * (u.col(i).dot(y) / sv[i]);
  const double resid = (a * p - y).lpNorm<Eigen::Infinity>();
  require(resid <= 1e-8 * std::max(1.0, y.lpNorm<Eigen::Infinity>()), ErrorKind::Inconsistent,
          "A u = y has no solution (residual " + std::to_string(resid) + ")");
  out.particular = p;
  out.basis = v.rightCols(n - rank);
  return out;
}

/// normal . u <= offset
struct Halfspace {
  Vec normal;
  double offset = 0.0;
  double value(const Vec& u) const { return normal.dot(u) - offset; }
};

/// u^T Q u + linear . u + constant <= 0
struct QuadraticInequality {
  Matrix quad;
  Vec linear;
  double constant = 0.0;

  double value(const Vec& u) const { return u.dot(quad * u) + linear.dot(u) + constant; }

  /// ||u - c||^2 <= r^2 (inside) or >= r^2 (outside).
  static QuadraticInequality ball(const Vec& c, double radius_sq, bool outside) {
    const Eigen::Index n = c.size();
    const double s = outside ? -1.0 : 1.0;
    return {s * Matrix::Identity(n, n), -2.0 * s * c, s * (c.squaredNorm() - radius_sq)};
  }
};

struct ScalarInequality {
  std::function<double(const Vec&)> h;
  std::string label;
};

struct AffineEqualities {
  Matrix a;
  Vec y;
};

/// A compact index set: a box with optional halfspaces, quadratic and general
/// inequalities and an optional affine equality system. When equalities are
/// present the set is handled in null-space coordinates z with u = p + N z.
class ConstraintSet {
 public:
  struct Spec {
    BoxDomain box;
    std::vector<Halfspace> halfspaces;
    std::vector<QuadraticInequality> quadratics;
    std::vector<ScalarInequality> inequalities;
    std::optional<AffineEqualities> equalities;
  };

  static constexpr double kFeasTol = 1e-9;

  explicit ConstraintSet(Spec spec, std::uint64_t search_seed = 7) : spec_(std::move(spec)) {
    const Eigen::Index n = spec_.box.dim();
    require(n > 0, ErrorKind::Precondition, "constraint set needs a box of positive dimension");
    require(spec_.box.bounded(), ErrorKind::Precondition, "index box must be bounded");
    for (const auto& h : spec_.halfspaces) require_dim(h.normal.size(), n, "halfspace normal");
    for (const auto& q : spec_.quadratics) {
      require_dim(q.quad.rows(), n, "quadratic matrix");
      require_dim(q.linear.size(), n, "quadratic linear term");
    }
    if (spec_.equalities) {
      require_dim(spec_.equalities->a.cols(), n, "equality matrix");
      param_ = affine_parametrize(spec_.equalities->a, spec_.equalities->y);
    } else {
      param_ = AffineParametrization{Vec::Zero(n), Matrix::Identity(n, n)};
    }
    param_box_ = compute_param_box();
    feasible_point_ = search_feasible(search_seed);
  }

  const Spec& spec() const { return spec_; }
  const BoxDomain& box() const { return spec_.box; }
  Eigen::Index dim() const { return spec_.box.dim(); }
  bool has_equalities() const { return spec_.equalities.has_value(); }
  const AffineParametrization& parametrization() const { return param_; }
  Eigen::Index param_dim() const { return param_.free_dim(); }
  const BoxDomain& param_box() const { return param_box_; }
  const Vec& feasible_point() const { return feasible_point_; }

  /// Halfspace polytope (vertex enumeration applies).
  bool is_polytope() const { return spec_.quadratics.empty() && spec_.inequalities.empty(); }

  Vec lift(const Vec& z) const {
    if (!has_equalities()) return z;
    return param_.lift(z);
  }
  Vec coordinates(const Vec& u) const {
    if (!has_equalities()) return u;
    return param_.coordinates(u);
  }

  double residual(const Vec& u) const {
    require_dim(u.size(), dim(), "index point");
    double r = std::max(0.0, spec_.box.violation(u));
    for (const auto& h : spec_.halfspaces) r = std::max(r, h.value(u));
    for (const auto& q : spec_.quadratics) r = std::max(r, q.value(u));
    for (const auto& g : spec_.inequalities) r = std::max(r, g.h(u));
    if (spec_.equalities) {
      const Vec e = spec_.equalities->a * u - spec_.equalities->y;
      if (e.size() > 0) r = std::max(r, e.lpNorm<Eigen::Infinity>());
    }
    return std::isnan(r) ? kInf : r;
  }

  double residual_param(const Vec& z) const { return residual(lift(z)); }

  bool feasible(const Vec& u, double tol = kFeasTol) const { return residual(u) <= tol; }

  /// Halfspace description of the set in parameter coordinates (box rows
  /// included). Only meaningful for polytopes.
  std::vector<Halfspace> param_halfspaces() const {
    std::vector<Halfspace> out;
    const Matrix& nb = param_.basis;
    const Vec& p = param_.particular;
    for (const auto& h : spec_.halfspaces)
      out.push_back({nb.transpose() * h.normal, h.offset - h.normal.dot(p)});
    for (Eigen::Index j = 0; j < dim(); ++j) {
      const Vec row = nb.row(j).transpose();
      out.push_back({row, spec_.box.upper()[j] - p[j]});
      out.push_back({-row, p[j] - spec_.box.lower()[j]});
    }
    return out;
  }

 private:
  BoxDomain compute_param_box() const {
    const Eigen::Index k = param_.free_dim();
    if (!has_equalities()) return spec_.box;
    Vec lo = Vec::Zero(k), hi = Vec::Zero(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < dim(); ++j) {
        const double c = param_.basis(j, i);
        const double a = c * (spec_.box.lower()[j] - param_.particular[j]);
        const double b = c * (spec_.box.upper()[j] - param_.particular[j]);
        lo[i] += std::min(a, b);
        hi[i] += std::max(a, b);
      }
    }
    return BoxDomain(lo, hi);
  }

  // Gauss-Newton on 0.5 * sum of squared violations of the box (shrunk by
  // margin * width) and the halfspaces, in parameter coordinates. Finite
  // termination on consistent polyhedral systems; cyclic projections can crawl
  // on thin slices.
  Vec polyhedral_least_squares(Vec z, double margin) const {
    const std::vector<Halfspace> hs = param_halfspaces();
    const Vec w = spec_.box.width();
    const Eigen::Index k = z.size();
    auto residuals = [&](const Vec& zz, Matrix* jac) {
      Vec r = Vec::Zero(static_cast<Eigen::Index>(hs.size()));
      if (jac) *jac = Matrix::Zero(r.size(), k);
      for (std::size_t i = 0; i < hs.size(); ++i) {
        // box rows come last in pairs; shrink them by the margin
        const std::size_t nh = spec_.halfspaces.size();
        const double m = i >= nh ? margin * w[static_cast<Eigen::Index>((i - nh) / 2)] : 0.0;
        const double v = hs[i].value(zz) + m;
        if (v > 0) {
          r[static_cast<Eigen::Index>(i)] = v;
          if (jac) jac->row(static_cast<Eigen::Index>(i)) = hs[i].normal.transpose();
        }
      }
      return r;
    };
    for (int it = 0; it < 200; ++it) {
      Matrix j;
      const Vec r = residuals(z, &j);
      const double f = 0.5 * r.squaredNorm();
      if (r.maxCoeff() <= 0.0) break;
      const Vec dz = j.completeOrthogonalDecomposition().solve(-r);
      double step = 1.0;
      while (step > 1e-12 && 0.5 * residuals(z + step * dz, nullptr).squaredNorm() > (1.0 - 1e-4 * step) * f)
        step *= 0.5;
      if (step <= 1e-12) break;
      z += step * dz;
    }
    return z;
  }

  // Cyclic projections onto box, halfspaces and the affine set, followed by
  // low-discrepancy sampling of the parameter box.
  Vec search_feasible(std::uint64_t seed) const {
    Vec u = spec_.box.center();
    for (int it = 0; it < 5000; ++it) {
      u = spec_.box.clip(u);
      for (const auto& h : spec_.halfspaces) {
        const double v = h.value(u);
        const double nn = h.normal.squaredNorm();
        if (v > 0 && nn > 0) u -= (v / nn) * h.normal;
      }
      if (has_equalities()) u = param_.lift(param_.coordinates(u));
      if (residual(u) <= kFeasTol) return u;
    }
    const Eigen::Index k = param_dim();
    if (k == 0) {
      require(residual(param_.particular) <= kFeasTol, ErrorKind::EmptySet, "affine point outside bounds");
      return param_.particular;
    }
    for (double margin : {1e-3, 1e-6, 0.0}) {
      const Vec cand = lift(polyhedral_least_squares(coordinates(u), margin));
      if (residual(cand) <= kFeasTol) return cand;
    }
    ScrambledHalton seq(static_cast<std::size_t>(k), seed);
    for (std::uint64_t i = 0; i < 20000; ++i) {
      const Vec cand = lift(param_box_.from_unit(seq.point(i)));
      if (residual(cand) <= kFeasTol) return cand;
    }
    throw Error(ErrorKind::EmptySet, "no feasible point found in the index set");
  }

  Spec spec_;
  AffineParametrization param_;
  BoxDomain param_box_;
  Vec feasible_point_;
};

inline double feasibility_residual(const ConstraintSet& set, const Vec& u) { return set.residual(u); }

}  // namespace chebsip
