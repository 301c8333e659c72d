#pragma once

#include "chebsip/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <string>

namespace chebsip {

/// A norm on R^n with subgradient access.
///
/// The weighted kinds keep a factor R with M = R^T R so that ||v|| = ||R v||_2.
/// GramL2 may also be built directly from a factor, in which case the Gram
/// matrix is only required to be positive semidefinite (a seminorm on the
/// stacked coefficient space of two overlapping bases).
class Norm {
 public:
  enum class Kind { L1, L2, Linf, WeightedL2, GramL2 };

  static Norm l1() { return Norm(Kind::L1); }
  static Norm l2() { return Norm(Kind::L2); }
  static Norm linf() { return Norm(Kind::Linf); }

  static Norm weighted(const Matrix& m) { return from_spd(Kind::WeightedL2, m); }
  static Norm gram(const Matrix& g) { return from_spd(Kind::GramL2, g); }

  static Norm gram_factor(const Matrix& r) {
    require(r.allFinite(), ErrorKind::NonFinite, "Gram factor");
    Norm n(Kind::GramL2);
    n.factor_ = r;
    n.matrix_ = r.transpose() * r;
    n.dim_ = r.cols();
    return n;
  }

  Kind kind() const { return kind_; }
  double scale() const { return scale_; }
  /// 0 for the coordinate norms, which apply to any dimension.
  Eigen::Index dim() const { return dim_; }
  const Matrix& matrix() const { return matrix_; }
  const Matrix& factor() const { return factor_; }

  bool is_polyhedral() const { return kind_ == Kind::L1 || kind_ == Kind::Linf; }
  bool is_inner_product() const { return !is_polyhedral(); }

  Norm scaled(double c) const {
    require(c > 0 && std::isfinite(c), ErrorKind::Precondition, "norm scale must be positive");
    Norm n = *this;
    n.scale_ *= c;
    return n;
  }

  double operator()(const Vec& v) const {
    check(v);
    switch (kind_) {
      case Kind::L1: return scale_ * v.lpNorm<1>();
      case Kind::L2: return scale_ * v.norm();
      case Kind::Linf: return v.size() == 0 ? 0.0 : scale_ * v.lpNorm<Eigen::Infinity>();
      case Kind::WeightedL2:
      case Kind::GramL2: return scale_ * (factor_ * v).norm();
    }
    return 0.0;
  }

  /// An element of the subdifferential at v. At kinks the selection is the
  /// midpoint of the face (zero in the degenerate coordinates for l1, the
  /// average over tied maximizers for linf, zero at the origin).
  Vec subgradient(const Vec& v) const {
    check(v);
    Vec s = Vec::Zero(v.size());
    switch (kind_) {
      case Kind::L1:
        for (Eigen::Index i = 0; i < v.size(); ++i) s[i] = v[i] > 0 ? 1.0 : (v[i] < 0 ? -1.0 : 0.0);
        break;
      case Kind::L2: {
        const double r = v.norm();
        if (r > 0) s = v / r;
        break;
      }
      case Kind::Linf: {
        if (v.size() == 0) break;
        const double m = v.lpNorm<Eigen::Infinity>();
        if (m == 0) break;
        int ties = 0;
        for (Eigen::Index i = 0; i < v.size(); ++i)
          if (std::abs(v[i]) == m) ++ties;
        for (Eigen::Index i = 0; i < v.size(); ++i)
          if (std::abs(v[i]) == m) s[i] = (v[i] > 0 ? 1.0 : -1.0) / ties;
        break;
      }
      case Kind::WeightedL2:
      case Kind::GramL2: {
        const Vec rv = factor_ * v;
        const double r = rv.norm();
        if (r > 0) s = factor_.transpose() * rv / r;
        break;
      }
    }
    return scale_ * s;
  }

  /// Hessian where the norm is twice differentiable; zero for the polyhedral
  /// kinds (their curvature is concentrated on kinks) and at the origin.
  Matrix hessian(const Vec& v) const {
    check(v);
    const Eigen::Index n = v.size();
    switch (kind_) {
      case Kind::L1:
      case Kind::Linf: return Matrix::Zero(n, n);
      case Kind::L2: {
        const double r = v.norm();
        if (r == 0) return Matrix::Zero(n, n);
        const Vec u = v / r;
        return scale_ * (Matrix::Identity(n, n) - u * u.transpose()) / r;
      }
      case Kind::WeightedL2:
      case Kind::GramL2: {
        const Vec rv = factor_ * v;
        const double r = rv.norm();
        if (r == 0) return Matrix::Zero(n, n);
        const Vec g = factor_.transpose() * rv / r;
        return scale_ * (matrix_ / r - g * g.transpose() / r);
      }
    }
    return Matrix::Zero(n, n);
  }

  /// Dual norm; for the weighted kinds this needs M to be invertible.
  double dual(const Vec& s) const {
    check(s);
    switch (kind_) {
      case Kind::L1: return s.size() == 0 ? 0.0 : s.lpNorm<Eigen::Infinity>() / scale_;
      case Kind::L2: return s.norm() / scale_;
      case Kind::Linf: return s.lpNorm<1>() / scale_;
      case Kind::WeightedL2:
      case Kind::GramL2: return std::sqrt(std::max(0.0, s.dot(matrix_.ldlt().solve(s)))) / scale_;
    }
    return 0.0;
  }

  std::string name() const {
    switch (kind_) {
      case Kind::L1: return "l1";
      case Kind::L2: return "l2";
      case Kind::Linf: return "linf";
      case Kind::WeightedL2: return "weighted";
      case Kind::GramL2: return "gram";
    }
    return "?";
  }

 private:
  explicit Norm(Kind k) : kind_(k) {}

  static Norm from_spd(Kind kind, const Matrix& m) {
    require(m.rows() == m.cols() && m.rows() > 0, ErrorKind::DimensionMismatch,
            "weight matrix must be square");
    require(m.allFinite(), ErrorKind::NonFinite, "weight matrix");
    const double mag = m.cwiseAbs().maxCoeff();
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, mag),
            ErrorKind::NotPositiveDefinite, "weight matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
    const Vec ev = eig.eigenvalues();
    const double top = ev.maxCoeff();
    require(top > 0 && ev.minCoeff() > 1e-10 * top, ErrorKind::NotPositiveDefinite,
            "smallest eigenvalue below 1e-10 relative");
    Norm n(kind);
    n.matrix_ = m;
    // R = diag(sqrt(lambda)) V^T gives R^T R = M.
    n.factor_ = ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
    n.dim_ = m.rows();
    return n;
  }

  void check(const Vec& v) const {
    if (dim_ > 0) require_dim(v.size(), dim_, "norm argument");
  }

  Kind kind_;
  double scale_ = 1.0;
  Eigen::Index dim_ = 0;
  Matrix matrix_;
  Matrix factor_;
};

}  // namespace chebsip
