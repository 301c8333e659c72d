#pragma once

#include "chebsip/norm.hpp"
#include "chebsip/sets.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace chebsip {

/// Convex scalar function on R^n with (sub)gradient and, where available,
/// Hessian. Four concrete shapes:
///   affine      a.x + b
///   quadratic   0.5 x'Hx + g.x + c          (H positive semidefinite)
///   norm ball   norm(P x - a) + s.x + b
///   generic     user callables
class ConvexFunction {
 public:
  enum class Kind { Affine, Quadratic, NormBall, Generic };

  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;
  using HessFn = std::function<Matrix(const Vec&)>;

  static ConvexFunction affine(Vec a, double b) {
    ConvexFunction f(Kind::Affine, a.size());
    f.lin_ = std::move(a);
    f.off_ = b;
    return f;
  }

  static ConvexFunction quadratic(Matrix h, Vec g, double c) {
    require(h.rows() == h.cols() && h.rows() == g.size(), ErrorKind::DimensionMismatch, "quadratic term");
    ConvexFunction f(Kind::Quadratic, g.size());
    f.quad_ = std::move(h);
    f.lin_ = std::move(g);
    f.off_ = c;
    return f;
  }

  /// 0.5 * sum_i w_i (x_i - center_i)^2
  static ConvexFunction squared_distance(const Vec& center, const Vec& weights) {
    require_dim(weights.size(), center.size(), "squared distance weights");
    const Vec wc = weights.cwiseProduct(center);
    return quadratic(weights.asDiagonal().toDenseMatrix(), -wc, 0.5 * center.dot(wc));
  }

  static ConvexFunction norm_ball(Norm norm, Matrix p, Vec a, Vec s, double b) {
    require(p.rows() == a.size() && p.cols() == s.size(), ErrorKind::DimensionMismatch, "norm ball data");
    ConvexFunction f(Kind::NormBall, s.size());
    f.norm_ = std::make_shared<Norm>(std::move(norm));
    f.proj_ = std::move(p);
    f.anchor_ = std::move(a);
    f.lin_ = std::move(s);
    f.off_ = b;
    return f;
  }

  static ConvexFunction generic(Eigen::Index n, ValueFn value, GradFn grad, HessFn hess = {}) {
    ConvexFunction f(Kind::Generic, n);
    f.value_fn_ = std::move(value);
    f.grad_fn_ = std::move(grad);
    f.hess_fn_ = std::move(hess);
    return f;
  }

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  bool has_hessian() const { return kind_ != Kind::Generic || static_cast<bool>(hess_fn_); }

  const Vec& linear() const { return lin_; }
  double offset() const { return off_; }
  const Matrix& quad() const { return quad_; }
  const Norm& norm() const { return *norm_; }
  const Matrix& projection() const { return proj_; }
  const Vec& anchor() const { return anchor_; }

  double value(const Vec& x) const {
    switch (kind_) {
      case Kind::Affine: return lin_.dot(x) + off_;
      case Kind::Quadratic: return 0.5 * x.dot(quad_ * x) + lin_.dot(x) + off_;
      case Kind::NormBall: return (*norm_)(proj_ * x - anchor_) + lin_.dot(x) + off_;
      case Kind::Generic: return value_fn_(x);
    }
    return 0.0;
  }

  Vec gradient(const Vec& x) const {
    switch (kind_) {
      case Kind::Affine: return lin_;
      case Kind::Quadratic: return quad_ * x + lin_;
      case Kind::NormBall: return proj_.transpose() * norm_->subgradient(proj_ * x - anchor_) + lin_;
      case Kind::Generic: return grad_fn_(x);
    }
    return Vec();
  }

  /// h += w * Hessian(x)
  void add_hessian(const Vec& x, double w, Matrix& h) const {
    switch (kind_) {
      case Kind::Affine: return;
      case Kind::Quadratic: h.noalias() += w * quad_; return;
      case Kind::NormBall: {
        if (norm_->is_polyhedral()) return;
        h.noalias() += w * (proj_.transpose() * norm_->hessian(proj_ * x - anchor_) * proj_);
        return;
      }
      case Kind::Generic:
        if (hess_fn_) h.noalias() += w * hess_fn_(x);
        return;
    }
  }

  /// Same function of the first dim() coordinates, seen on R^n (n >= dim()).
  ConvexFunction padded(Eigen::Index n) const {
    require(n >= dim_, ErrorKind::DimensionMismatch, "padding to a smaller dimension");
    if (n == dim_) return *this;
    ConvexFunction f = *this;
    f.dim_ = n;
    const Eigen::Index k = dim_;
    switch (kind_) {
      case Kind::Affine:
      case Kind::NormBall:
      case Kind::Quadratic: {
        Vec lin = Vec::Zero(n);
        lin.head(k) = lin_;
        f.lin_ = lin;
        if (kind_ == Kind::Quadratic) {
          f.quad_ = Matrix::Zero(n, n);
          f.quad_.topLeftCorner(k, k) = quad_;
        }
        if (kind_ == Kind::NormBall) {
          f.proj_ = Matrix::Zero(proj_.rows(), n);
          f.proj_.leftCols(k) = proj_;
        }
        break;
      }
      case Kind::Generic: {
        auto v = value_fn_;
        auto g = grad_fn_;
        f.value_fn_ = [v, k](const Vec& x) { return v(x.head(k)); };
        f.grad_fn_ = [g, k, n](const Vec& x) {
          Vec out = Vec::Zero(n);
          out.head(k) = g(x.head(k));
          return out;
        };
        if (hess_fn_) {
          auto hf = hess_fn_;
          f.hess_fn_ = [hf, k, n](const Vec& x) {
            Matrix out = Matrix::Zero(n, n);
            out.topLeftCorner(k, k) = hf(x.head(k));
            return out;
          };
        }
        break;
      }
    }
    return f;
  }

 private:
  ConvexFunction(Kind k, Eigen::Index n) : kind_(k), dim_(n) {}

  Kind kind_;
  Eigen::Index dim_;
  Vec lin_;
  double off_ = 0.0;
  Matrix quad_;
  std::shared_ptr<const Norm> norm_;
  Matrix proj_;
  Vec anchor_;
  ValueFn value_fn_;
  GradFn grad_fn_;
  HessFn hess_fn_;
};

/// minimize sum(objective) s.t. constraints(x) <= 0, A x = y, x in state_box.
struct FiniteConvexProgram {
  std::vector<ConvexFunction> objective;
  std::vector<ConvexFunction> constraints;
  BoxDomain state_box;
  std::optional<AffineEqualities> equalities;
  /// Leading coordinates that belong to the caller; the rest are auxiliary
  /// variables introduced by polyhedral_reformulate. 0 means all.
  Eigen::Index original_dim = 0;

  Eigen::Index dim() const { return state_box.dim(); }

  double objective_value(const Vec& x) const {
    double v = 0.0;
    for (const auto& f : objective) v += f.value(x);
    return v;
  }
  Vec objective_gradient(const Vec& x) const {
    Vec g = Vec::Zero(x.size());
    for (const auto& f : objective) g += f.gradient(x);
    return g;
  }
};

enum class InnerStatus { Optimal, Infeasible, IterLimit, NonFinite };

inline const char* to_string(InnerStatus s) {
  switch (s) {
    case InnerStatus::Optimal: return "optimal";
    case InnerStatus::Infeasible: return "infeasible";
    case InnerStatus::IterLimit: return "iteration limit";
    case InnerStatus::NonFinite: return "non-finite";
  }
  return "?";
}

struct MeritRecord {
  int outer;
  double merit;
};

struct InnerSolution {
  Vec x_star;
  double value = kInf;
  double kkt_residual = kInf;
  double max_violation = kInf;
  InnerStatus status = InnerStatus::IterLimit;
  Vec multipliers;     // one per inequality of the program as given
  Vec eq_multipliers;  // one per equality row
  std::vector<MeritRecord> merit_trace;
  int outer_iterations = 0;
  int inner_iterations = 0;
};

struct InnerOptions {
  int max_outer = 500;
  int max_inner = 200;
  int stall_limit = 50;
  double rho0 = 10.0;
  double rho_max = 1e10;
  double prox = 1e-6;
  bool record_merit = true;
  bool reformulate_polyhedral = true;
};

/// Replace every l1/linf norm-ball constraint by affine ones.
/// linf: 2m rows per ball. l1: m auxiliary variables s with +-(Px-a)_r <= s_r and
/// c*sum(s) + s.x + b <= 0, i.e. 2m+1 rows.
inline FiniteConvexProgram polyhedral_reformulate(const FiniteConvexProgram& p) {
  const Eigen::Index n = p.dim();
  Eigen::Index aux = 0;
  for (const auto& g : p.constraints) {
    if (g.kind() == ConvexFunction::Kind::Affine) continue;
    require(g.kind() == ConvexFunction::Kind::NormBall && g.norm().is_polyhedral(), ErrorKind::Unsupported,
            "polyhedral_reformulate needs l1 or linf norm-ball constraints");
    if (g.norm().kind() == Norm::Kind::L1) aux += g.projection().rows();
  }
  const Eigen::Index n2 = n + aux;
  Vec lo(n2), hi(n2);
  lo.head(n) = p.state_box.lower();
  hi.head(n) = p.state_box.upper();

  FiniteConvexProgram out;
  out.original_dim = p.original_dim > 0 ? p.original_dim : n;
  for (const auto& f : p.objective) out.objective.push_back(f.padded(n2));
  if (p.equalities) {
    Matrix a = Matrix::Zero(p.equalities->a.rows(), n2);
    a.leftCols(n) = p.equalities->a;
    out.equalities = AffineEqualities{a, p.equalities->y};
  }

  Eigen::Index next = n;
  for (const auto& g : p.constraints) {
    if (g.kind() == ConvexFunction::Kind::Affine) {
      out.constraints.push_back(g.padded(n2));
      continue;
    }
    const Matrix& pm = g.projection();
    const Vec& a = g.anchor();
    const double c = g.norm().scale();
    Vec s = Vec::Zero(n2);
    s.head(n) = g.linear();
    if (g.norm().kind() == Norm::Kind::Linf) {
      for (Eigen::Index r = 0; r < pm.rows(); ++r) {
        for (double sign : {1.0, -1.0}) {
          Vec row = s;
          row.head(n) += sign * c * pm.row(r).transpose();
          out.constraints.push_back(ConvexFunction::affine(row, g.offset() - sign * c * a[r]));
        }
      }
    } else {
      Vec total = s;
      for (Eigen::Index r = 0; r < pm.rows(); ++r) {
        const Eigen::Index j = next++;
        // bound for s_r: the largest |(Px - a)_r| over the box
        double bound = std::abs(a[r]);
        for (Eigen::Index k = 0; k < n; ++k) {
          const double v = pm(r, k);
          bound += std::max(std::abs(v * lo[k]), std::abs(v * hi[k]));
        }
        lo[j] = 0.0;
        hi[j] = std::isfinite(bound) ? 1.0 + bound : kInf;
        for (double sign : {1.0, -1.0}) {
          Vec row = Vec::Zero(n2);
          row.head(n) = sign * pm.row(r).transpose();
          row[j] = -1.0;
          out.constraints.push_back(ConvexFunction::affine(row, -sign * a[r]));
        }
        total[j] = c;
      }
      out.constraints.push_back(ConvexFunction::affine(total, g.offset()));
    }
  }
  out.state_box = BoxDomain(lo, hi);
  return out;
}

namespace detail {

inline Vec project_box(const Vec& x, const Vec& lo, const Vec& hi) { return x.cwiseMax(lo).cwiseMin(hi); }

// Stationarity/complementarity measure for given multipliers, scaled by 1 + |grad f|.
inline double kkt_measure(const FiniteConvexProgram& p, const Vec& x, const Vec& lambda, const Vec& mu) {
  const Vec gf = p.objective_gradient(x);
  Vec gl = gf;
  double comp = 0.0;
  for (std::size_t i = 0; i < p.constraints.size(); ++i) {
    const double l = lambda[static_cast<Eigen::Index>(i)];
    if (l > 0) {
      gl += l * p.constraints[i].gradient(x);
      comp = std::max(comp, l * std::abs(std::min(0.0, p.constraints[i].value(x))));
    }
  }
  if (p.equalities && mu.size() > 0) gl += p.equalities->a.transpose() * mu;
  const double stat = (x - project_box(x - gl, p.state_box.lower(), p.state_box.upper())).cwiseAbs().maxCoeff();
  const double scale = 1.0 + (gf.size() ? gf.cwiseAbs().maxCoeff() : 0.0);
  return std::max(stat, comp) / scale;
}

inline double max_violation(const FiniteConvexProgram& p, const Vec& x) {
  double v = p.state_box.violation(x);
  for (const auto& g : p.constraints) v = std::max(v, g.value(x));
  if (p.equalities) v = std::max(v, (p.equalities->a * x - p.equalities->y).cwiseAbs().maxCoeff());
  return std::isnan(v) ? kInf : v;
}

struct KktGuess {
  Vec x, lambda, mu;
};

// Newton on the KKT system with constraints `act` held at zero and variables
// outside `fre` pinned. Returns false on breakdown.
inline bool kkt_newton(const FiniteConvexProgram& p, const std::vector<Eigen::Index>& act,
                       const std::vector<Eigen::Index>& fre, KktGuess& k) {
  const Eigen::Index n = p.dim();
  const Eigen::Index me = p.equalities ? p.equalities->a.rows() : 0;
  const Eigen::Index nf = static_cast<Eigen::Index>(fre.size()), na = static_cast<Eigen::Index>(act.size());
  const Eigen::Index dim = nf + na + me;
  auto at = [](const std::vector<Eigen::Index>& v, Eigen::Index i) { return v[static_cast<std::size_t>(i)]; };
  for (int it = 0; it < 8; ++it) {
    Matrix h = Matrix::Zero(n, n);
    for (const auto& f : p.objective) f.add_hessian(k.x, 1.0, h);
    Vec g = p.objective_gradient(k.x);
    Matrix jac(na, n);
    Vec ga(na);
    for (Eigen::Index r = 0; r < na; ++r) {
      const Eigen::Index i = at(act, r);
      const auto& c = p.constraints[static_cast<std::size_t>(i)];
      c.add_hessian(k.x, k.lambda[i], h);
      const Vec cg = c.gradient(k.x);
      g += k.lambda[i] * cg;
      jac.row(r) = cg.transpose();
      ga[r] = c.value(k.x);
    }
    if (me > 0) g += p.equalities->a.transpose() * k.mu;
    Matrix kkt = Matrix::Zero(dim, dim);
    Vec rhs(dim);
    for (Eigen::Index a = 0; a < nf; ++a) {
      rhs[a] = -g[at(fre, a)];
      for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = h(at(fre, a), at(fre, b));
      for (Eigen::Index r = 0; r < na; ++r) kkt(a, nf + r) = kkt(nf + r, a) = jac(r, at(fre, a));
      for (Eigen::Index r = 0; r < me; ++r) kkt(a, nf + na + r) = kkt(nf + na + r, a) = p.equalities->a(r, at(fre, a));
    }
    rhs.segment(nf, na) = -ga;
    if (me > 0) rhs.tail(me) = -(p.equalities->a * k.x - p.equalities->y);
    if (!kkt.allFinite() || !rhs.allFinite()) return false;
    if (rhs.cwiseAbs().maxCoeff() <= 1e-15) break;
    const Vec d = kkt.completeOrthogonalDecomposition().solve(rhs);
    if (!d.allFinite()) return false;
    for (Eigen::Index a = 0; a < nf; ++a) k.x[at(fre, a)] += d[a];
    for (Eigen::Index r = 0; r < na; ++r) k.lambda[at(act, r)] += d[nf + r];
    if (me > 0) k.mu += d.tail(me);
  }
  return true;
}

// Active-set polish: pin variables at their bounds, start from an independent
// set of constraints with positive multipliers, then swap (drop negative
// multipliers, add violated constraints) solving the KKT system by Newton each
// time. Kept only if at least as feasible and more stationary than the input.
inline void kkt_polish(const FiniteConvexProgram& p, InnerSolution& sol) {
  for (const auto& f : p.objective)
    if (!f.has_hessian()) return;
  for (const auto& g : p.constraints)
    if (!g.has_hessian()) return;
  const Eigen::Index n = p.dim();
  const Eigen::Index m = static_cast<Eigen::Index>(p.constraints.size());
  const Eigen::Index me = p.equalities ? p.equalities->a.rows() : 0;
  if (sol.multipliers.size() != m) return;
  const Vec& lo = p.state_box.lower();
  const Vec& hi = p.state_box.upper();
  const Vec mu0 = me > 0 && sol.eq_multipliers.size() == me ? sol.eq_multipliers : Vec(Vec::Zero(me));
  Vec gl = p.objective_gradient(sol.x_star);
  for (Eigen::Index i = 0; i < m; ++i)
    if (sol.multipliers[i] > 0)
      gl += sol.multipliers[i] * p.constraints[static_cast<std::size_t>(i)].gradient(sol.x_star);
  if (me > 0) gl += p.equalities->a.transpose() * mu0;
  Vec x0 = sol.x_star;
  std::vector<Eigen::Index> fre;
  for (Eigen::Index j = 0; j < n; ++j) {
    const bool at_lo = std::isfinite(lo[j]) && x0[j] - lo[j] <= 1e-9 * (1.0 + std::abs(lo[j])) && gl[j] > 0;
    const bool at_hi = std::isfinite(hi[j]) && hi[j] - x0[j] <= 1e-9 * (1.0 + std::abs(hi[j])) && gl[j] < 0;
    if (at_lo) x0[j] = lo[j];
    else if (at_hi) x0[j] = hi[j];
    else fre.push_back(j);
  }
  if (fre.empty()) return;

  // greedy independent start: largest multipliers first
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < m; ++i)
    if (sol.multipliers[i] > 0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return sol.multipliers[a] > sol.multipliers[b]; });
  const Eigen::Index nf = static_cast<Eigen::Index>(fre.size());
  auto restricted = [&](Eigen::Index i, const Vec& x) {
    const Vec g = p.constraints[static_cast<std::size_t>(i)].gradient(x);
    Vec r(nf + 0);
    for (Eigen::Index a = 0; a < nf; ++a) r[a] = g[fre[static_cast<std::size_t>(a)]];
    return r;
  };
  std::vector<Eigen::Index> act;
  Matrix rows(0, nf);
  const Eigen::Index cap = std::max<Eigen::Index>(0, nf - me);
  for (Eigen::Index i : order) {
    if (static_cast<Eigen::Index>(act.size()) >= cap) break;
    Matrix trial(rows.rows() + 1, nf);
    trial.topRows(rows.rows()) = rows;
    trial.row(rows.rows()) = restricted(i, x0).transpose();
    if (trial.fullPivLu().rank() == trial.rows()) {
      rows = trial;
      act.push_back(i);
    }
  }
  const double ftol = 1e-14 * (1.0 + x0.cwiseAbs().maxCoeff());
  for (int swap = 0; swap < 20; ++swap) {
    KktGuess k{x0, Vec::Zero(m), mu0};
    for (Eigen::Index i : act) k.lambda[i] = std::max(sol.multipliers[i], 0.0);
    if (!kkt_newton(p, act, fre, k)) return;
    // drop the most negative multiplier
    std::ptrdiff_t neg = -1;
    for (std::size_t r = 0; r < act.size(); ++r)
      if (k.lambda[act[r]] < 0 && (neg < 0 || k.lambda[act[r]] < k.lambda[act[static_cast<std::size_t>(neg)]]))
        neg = static_cast<std::ptrdiff_t>(r);
    if (neg >= 0) {
      act.erase(act.begin() + neg);
      continue;
    }
    // add the most violated inactive constraint
    Eigen::Index worst = -1;
    double wv = ftol;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::find(act.begin(), act.end(), i) != act.end()) continue;
      const double v = p.constraints[static_cast<std::size_t>(i)].value(k.x);
      if (v > wv) {
        wv = v;
        worst = i;
      }
    }
    if (worst >= 0) {
      if (static_cast<Eigen::Index>(act.size()) >= cap && !act.empty()) {
        std::size_t low = 0;
        for (std::size_t r = 1; r < act.size(); ++r)
          if (k.lambda[act[r]] < k.lambda[act[low]]) low = r;
        act.erase(act.begin() + static_cast<std::ptrdiff_t>(low));
      }
      act.push_back(worst);
      continue;
    }
    if (p.state_box.violation(k.x) > 0) return;
    const double viol = max_violation(p, k.x);
    const double kkt = kkt_measure(p, k.x, k.lambda, k.mu);
    if (viol <= std::max(sol.max_violation, ftol) && kkt <= sol.kkt_residual) {
      sol.x_star = k.x;
      sol.value = p.objective_value(k.x);
      sol.max_violation = viol;
      sol.kkt_residual = kkt;
      sol.multipliers = k.lambda;
      sol.eq_multipliers = k.mu;
    }
    return;
  }
}

class AugmentedLagrangian {
 public:
  AugmentedLagrangian(const FiniteConvexProgram& p, const InnerOptions& opt) : p_(p), opt_(opt) {
    n_ = p.dim();
    m_ = static_cast<Eigen::Index>(p.constraints.size());
    me_ = p.equalities ? p.equalities->a.rows() : 0;
    lo_ = p.state_box.lower();
    hi_ = p.state_box.upper();
    exact_hessian_ = true;
    for (const auto& f : p.objective) exact_hessian_ = exact_hessian_ && f.has_hessian();
    for (const auto& g : p.constraints) exact_hessian_ = exact_hessian_ && g.has_hessian();
  }

  InnerSolution run(const Vec& x0, double tol) {
    InnerSolution sol;
    Vec x = project_box(x0, lo_, hi_);
    lambda_ = Vec::Zero(m_);
    mu_ = Vec::Zero(me_);
    rho_ = opt_.rho0;
    double best_viol = kInf;
    int stall = 0;
    double prev_viol = kInf;
    for (int k = 0; k < opt_.max_outer; ++k) {
      anchor_ = x;
      const bool ok = minimize_inner(x, 0.1 * tol, k, sol);
      sol.outer_iterations = k + 1;
      if (!ok) {
        sol.status = InnerStatus::NonFinite;
        finish(x, sol);
        return sol;
      }
      // multiplier update
      Vec gv(m_);
      for (Eigen::Index i = 0; i < m_; ++i) gv[i] = p_.constraints[static_cast<std::size_t>(i)].value(x);
      for (Eigen::Index i = 0; i < m_; ++i) lambda_[i] = std::max(0.0, lambda_[i] + rho_ * gv[i]);
      if (me_ > 0) mu_ += rho_ * (p_.equalities->a * x - p_.equalities->y);
      const double viol = violation(x);
      const double kkt = kkt_residual(x);
      if (!std::isfinite(viol) || !std::isfinite(kkt)) {
        sol.status = InnerStatus::NonFinite;
        finish(x, sol);
        return sol;
      }
      if (viol <= tol && kkt <= tol) {
        sol.status = InnerStatus::Optimal;
        finish(x, sol);
        return sol;
      }
      if (exact_hessian_) {
        // once the active set is visible, the polish usually lands on the solution
        InnerSolution trial;
        trial.x_star = x;
        trial.multipliers = lambda_;
        trial.eq_multipliers = mu_;
        trial.max_violation = viol;
        trial.kkt_residual = kkt;
        kkt_polish(p_, trial);
        if (trial.max_violation <= tol && trial.kkt_residual <= tol) {
          lambda_ = trial.multipliers;
          mu_ = trial.eq_multipliers;
          sol.status = InnerStatus::Optimal;
          finish(trial.x_star, sol);
          return sol;
        }
      }
      if (viol > tol && viol > 0.25 * prev_viol) rho_ = std::min(rho_ * 10.0, opt_.rho_max);
      prev_viol = viol;
      if (viol < best_viol * (1.0 - 1e-3)) {
        best_viol = viol;
        stall = 0;
      } else if (viol > tol && ++stall >= opt_.stall_limit) {
        sol.status = InnerStatus::Infeasible;
        finish(x, sol);
        return sol;
      }
    }
    sol.status = InnerStatus::IterLimit;
    finish(x, sol);
    return sol;
  }

  double violation(const Vec& x) const {
    double v = 0.0;
    for (const auto& g : p_.constraints) v = std::max(v, g.value(x));
    if (me_ > 0) v = std::max(v, (p_.equalities->a * x - p_.equalities->y).cwiseAbs().maxCoeff());
    v = std::max(v, p_.state_box.violation(x));
    return std::isnan(v) ? kInf : v;
  }

  double kkt_residual(const Vec& x) const {
    const Vec gf = p_.objective_gradient(x);
    Vec gl = gf;
    double comp = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto& g = p_.constraints[static_cast<std::size_t>(i)];
      if (lambda_[i] > 0) {
        gl += lambda_[i] * g.gradient(x);
        comp = std::max(comp, lambda_[i] * std::abs(std::min(0.0, g.value(x))));
      }
    }
    if (me_ > 0) gl += p_.equalities->a.transpose() * mu_;
    const double stat = (x - project_box(x - gl, lo_, hi_)).cwiseAbs().maxCoeff();
    const double scale = 1.0 + (gf.size() ? gf.cwiseAbs().maxCoeff() : 0.0);
    return std::max(stat / scale, comp / scale);
  }

 private:
  // Augmented Lagrangian (PHR) plus proximal term around anchor_.
  double merit(const Vec& x, Vec* grad, Matrix* hess) const {
    double phi = 0.0;
    if (grad) grad->setZero(n_);
    if (hess) hess->setZero(n_, n_);
    for (const auto& f : p_.objective) {
      phi += f.value(x);
      if (grad) *grad += f.gradient(x);
      if (hess && exact_hessian_) f.add_hessian(x, 1.0, *hess);
    }
    for (Eigen::Index i = 0; i < m_; ++i) {
      const auto& g = p_.constraints[static_cast<std::size_t>(i)];
      const double gv = g.value(x);
      const double s = lambda_[i] + rho_ * gv;
      if (s > 0) {
        phi += (s * s - lambda_[i] * lambda_[i]) / (2.0 * rho_);
        if (grad || hess) {
          const Vec gg = g.gradient(x);
          if (grad) *grad += s * gg;
          if (hess) {
            hess->noalias() += rho_ * gg * gg.transpose();
            if (exact_hessian_) g.add_hessian(x, s, *hess);
          }
        }
      } else {
        phi -= lambda_[i] * lambda_[i] / (2.0 * rho_);
      }
    }
    if (me_ > 0) {
      const Matrix& a = p_.equalities->a;
      const Vec r = a * x - p_.equalities->y;
      phi += mu_.dot(r) + 0.5 * rho_ * r.squaredNorm();
      if (grad) *grad += a.transpose() * (mu_ + rho_ * r);
      if (hess) hess->noalias() += rho_ * a.transpose() * a;
    }
    const Vec d = x - anchor_;
    phi += 0.5 * opt_.prox * d.squaredNorm();
    if (grad) *grad += opt_.prox * d;
    if (hess) hess->diagonal().array() += opt_.prox;
    return phi;
  }

  // Projected Newton (exact Hessian) or projected BFGS on the box.
  bool minimize_inner(Vec& x, double tol, int outer, InnerSolution& sol) {
    Vec g(n_);
    Matrix h(n_, n_);
    Matrix bfgs;
    if (!exact_hessian_) bfgs = Matrix::Identity(n_, n_);
    double phi = merit(x, &g, exact_hessian_ ? &h : nullptr);
    if (!std::isfinite(phi) || !g.allFinite()) return false;
    if (opt_.record_merit) sol.merit_trace.push_back({outer, phi});
    for (int it = 0; it < opt_.max_inner; ++it) {
      const Vec pg = x - project_box(x - g, lo_, hi_);
      const double pgn = pg.cwiseAbs().maxCoeff();
      if (pgn <= tol) break;
      const double eps_act = std::min(1e-3, pgn);
      std::vector<Eigen::Index> free;
      std::vector<char> active(static_cast<std::size_t>(n_), 0);
      for (Eigen::Index j = 0; j < n_; ++j) {
        const bool at_lo = x[j] - lo_[j] <= eps_act && g[j] > 0;
        const bool at_hi = hi_[j] - x[j] <= eps_act && g[j] < 0;
        if (at_lo || at_hi)
          active[static_cast<std::size_t>(j)] = 1;
        else
          free.push_back(j);
      }
      const Matrix& hm = exact_hessian_ ? h : bfgs;
      Vec d = Vec::Zero(n_);
      const auto nf = static_cast<Eigen::Index>(free.size());
      if (nf > 0) {
        Matrix hf(nf, nf);
        Vec gf(nf);
        for (Eigen::Index a = 0; a < nf; ++a) {
          gf[a] = g[free[static_cast<std::size_t>(a)]];
          for (Eigen::Index b = 0; b < nf; ++b)
            hf(a, b) = hm(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
        }
        const double diag = std::max(1e-12, hf.diagonal().cwiseAbs().maxCoeff());
        double shift = 0.0;
        Vec df;
        for (int tries = 0; tries < 12; ++tries) {
          Eigen::LLT<Matrix> llt(hf + shift * Matrix::Identity(nf, nf));
          if (llt.info() == Eigen::Success) {
            df = llt.solve(-gf);
            if (df.allFinite()) break;
          }
          shift = shift == 0.0 ? 1e-12 * diag : shift * 100.0;
          df.resize(0);
        }
        if (df.size() != nf) df = -gf / diag;
        for (Eigen::Index a = 0; a < nf; ++a) d[free[static_cast<std::size_t>(a)]] = df[a];
      }
      for (Eigen::Index j = 0; j < n_; ++j) {
        if (active[static_cast<std::size_t>(j)]) {
          const double hjj = hm(j, j);
          d[j] = -g[j] / (hjj > 1e-12 ? hjj : 1.0);
        }
      }
      bool accepted = false;
      Vec xn, gn(n_);
      Matrix hn(n_, n_);
      double phin = 0.0;
      for (int pass = 0; pass < 2 && !accepted; ++pass) {
        if (pass == 1) d = -g;  // fall back to projected gradient
        double alpha = 1.0;
        const double floor = 1e-15 * (1.0 + x.cwiseAbs().maxCoeff());
        for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
          if (alpha * d.cwiseAbs().maxCoeff() < floor) break;
          xn = project_box(x + alpha * d, lo_, hi_);
          const double dec = g.dot(xn - x);
          if (!(dec < 0)) {
            if ((xn - x).cwiseAbs().maxCoeff() == 0.0) break;
            continue;
          }
          phin = merit(xn, nullptr, nullptr);
          if (std::isfinite(phin) && phin <= phi + 1e-4 * dec) {
            accepted = true;
            break;
          }
        }
      }
      ++sol.inner_iterations;
      if (!accepted) break;  // at the precision floor
      phin = merit(xn, &gn, exact_hessian_ ? &hn : nullptr);
      if (!std::isfinite(phin) || !gn.allFinite()) return false;
      if (!exact_hessian_) {
        const Vec s = xn - x, y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
          const Vec bs = bfgs * s;
          bfgs += y * y.transpose() / sy - bs * bs.transpose() / s.dot(bs);
        }
      }
      x = xn;
      g = gn;
      if (exact_hessian_) h = hn;
      phi = phin;
      if (opt_.record_merit) sol.merit_trace.push_back({outer, phi});
    }
    return true;
  }

  void finish(const Vec& x, InnerSolution& sol) const {
    sol.x_star = x;
    sol.value = p_.objective_value(x);
    sol.max_violation = violation(x);
    sol.kkt_residual = kkt_residual(x);
    sol.multipliers = lambda_;
    sol.eq_multipliers = mu_;
    if (!std::isfinite(sol.value)) sol.status = InnerStatus::NonFinite;
  }

  const FiniteConvexProgram& p_;
  const InnerOptions& opt_;
  Eigen::Index n_ = 0, m_ = 0, me_ = 0;
  Vec lo_, hi_;
  bool exact_hessian_ = true;
  Vec lambda_, mu_, anchor_;
  double rho_ = 10.0;
};

inline bool has_polyhedral_ball(const FiniteConvexProgram& p) {
  for (const auto& g : p.constraints)
    if (g.kind() == ConvexFunction::Kind::NormBall && g.norm().is_polyhedral()) return true;
  return false;
}

}  // namespace detail

/// Solve a finitely constrained convex program.
inline InnerSolution solve_finite_convex(const FiniteConvexProgram& p, const Vec& x0, double tol = 1e-8,
                                         const InnerOptions& opt = {}) {
  require(tol > 0, ErrorKind::Precondition, "tolerance must be positive");
  require_dim(x0.size(), p.dim(), "initial point");
  for (const auto& f : p.objective) require_dim(f.dim(), p.dim(), "objective term");
  for (const auto& g : p.constraints) require_dim(g.dim(), p.dim(), "constraint");
  require(p.state_box.contains(x0, 1e-9), ErrorKind::Precondition, "initial point outside the state box");

  if (opt.reformulate_polyhedral && detail::has_polyhedral_ball(p)) {
    // keep balls with smooth norms as they are, rewrite the polyhedral ones
    FiniteConvexProgram poly = p, rest = p;
    poly.constraints.clear();
    rest.constraints.clear();
    std::vector<std::size_t> poly_idx, rest_idx;
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      const auto& g = p.constraints[i];
      const bool polyhedral = g.kind() == ConvexFunction::Kind::Affine ||
                              (g.kind() == ConvexFunction::Kind::NormBall && g.norm().is_polyhedral());
      if (polyhedral) {
        poly.constraints.push_back(g);
        poly_idx.push_back(i);
      } else {
        rest_idx.push_back(i);
      }
    }
    FiniteConvexProgram q = polyhedral_reformulate(poly);
    const Eigen::Index n = p.dim(), n2 = q.dim();
    for (std::size_t i : rest_idx) q.constraints.push_back(p.constraints[i].padded(n2));
    Vec z0(n2);
    z0.head(n) = x0;
    // auxiliaries start at |Px - a| so the reformulated start is as feasible as x0
    Eigen::Index next = n;
    for (std::size_t i : poly_idx) {
      const auto& g = p.constraints[i];
      if (g.kind() != ConvexFunction::Kind::NormBall || g.norm().kind() != Norm::Kind::L1) continue;
      const Vec r = (g.projection() * x0 - g.anchor()).cwiseAbs();
      for (Eigen::Index k = 0; k < r.size(); ++k, ++next) z0[next] = std::min(r[k], q.state_box.upper()[next]);
    }
    InnerOptions o2 = opt;
    o2.reformulate_polyhedral = false;
    InnerSolution s = solve_finite_convex(q, z0, tol, o2);
    // map back: value, violation and multipliers of the original constraints
    s.x_star = s.x_star.head(n).eval();
    s.value = p.objective_value(s.x_star);
    double viol = p.state_box.violation(s.x_star);
    for (const auto& g : p.constraints) viol = std::max(viol, g.value(s.x_star));
    if (p.equalities)
      viol = std::max(viol, (p.equalities->a * s.x_star - p.equalities->y).cwiseAbs().maxCoeff());
    s.max_violation = viol;
    Vec lam = Vec::Zero(static_cast<Eigen::Index>(p.constraints.size()));
    // multipliers of the reformulated rows are summed per original ball
    Eigen::Index row = 0;
    for (std::size_t i : poly_idx) {
      const auto& g = p.constraints[i];
      Eigen::Index rows = 1;
      if (g.kind() == ConvexFunction::Kind::NormBall)
        rows = g.norm().kind() == Norm::Kind::Linf ? 2 * g.projection().rows() : 2 * g.projection().rows() + 1;
      const Eigen::Index take = g.kind() == ConvexFunction::Kind::NormBall && g.norm().kind() == Norm::Kind::L1
                                    ? 1
                                    : rows;
      if (take == 1 && rows > 1)
        lam[static_cast<Eigen::Index>(i)] = s.multipliers[row + rows - 1];
      else
        lam[static_cast<Eigen::Index>(i)] = s.multipliers.segment(row, rows).sum();
      row += rows;
    }
    for (std::size_t k = 0; k < rest_idx.size(); ++k)
      lam[static_cast<Eigen::Index>(rest_idx[k])] = s.multipliers[row + static_cast<Eigen::Index>(k)];
    s.multipliers = lam;
    if (s.status == InnerStatus::Optimal && s.max_violation > tol) s.status = InnerStatus::IterLimit;
    return s;
  }

  // below ~1e-10 the penalty gets too stiff; the active-set polish does the rest
  detail::AugmentedLagrangian al(p, opt);
  InnerSolution sol = al.run(x0, std::max(tol, 1e-10));
  if (sol.status == InnerStatus::Optimal) {
    detail::kkt_polish(p, sol);
    if (sol.max_violation > tol || sol.kkt_residual > tol) sol.status = InnerStatus::IterLimit;
  }
  if (sol.status == InnerStatus::Infeasible) {
    // Phase one: minimize the largest violation s over the box.
    const Eigen::Index n = p.dim();
    FiniteConvexProgram ph;
    Vec lo(n + 1), hi(n + 1);
    lo.head(n) = p.state_box.lower();
    hi.head(n) = p.state_box.upper();
    lo[n] = 0.0;
    hi[n] = kInf;
    ph.state_box = BoxDomain(lo, hi);
    Vec e = Vec::Zero(n + 1);
    e[n] = 1.0;
    ph.objective.push_back(ConvexFunction::affine(e, 0.0));
    for (const auto& g : p.constraints) {
      ConvexFunction gp = g.padded(n + 1);
      // g(x) - s <= 0
      if (gp.kind() == ConvexFunction::Kind::Affine) {
        ph.constraints.push_back(ConvexFunction::affine(gp.linear() - e, gp.offset()));
      } else if (gp.kind() == ConvexFunction::Kind::NormBall) {
        ph.constraints.push_back(
            ConvexFunction::norm_ball(gp.norm(), gp.projection(), gp.anchor(), gp.linear() - e, gp.offset()));
      } else {
        ph.constraints.push_back(ConvexFunction::generic(
            n + 1, [gp](const Vec& z) { return gp.value(z) - z[z.size() - 1]; },
            [gp](const Vec& z) {
              Vec gr = gp.gradient(z);
              gr[gr.size() - 1] -= 1.0;
              return gr;
            },
            gp.has_hessian() ? ConvexFunction::HessFn([gp](const Vec& z) {
              Matrix h = Matrix::Zero(z.size(), z.size());
              gp.add_hessian(z, 1.0, h);
              return h;
            })
                             : ConvexFunction::HessFn{}));
      }
    }
    if (p.equalities) {
      Matrix a = Matrix::Zero(p.equalities->a.rows(), n + 1);
      a.leftCols(n) = p.equalities->a;
      ph.equalities = AffineEqualities{a, p.equalities->y};
    }
    Vec z0(n + 1);
    z0.head(n) = sol.x_star;
    z0[n] = std::max(0.0, al.violation(sol.x_star)) + 1.0;
    InnerOptions o2 = opt;
    o2.record_merit = false;
    detail::AugmentedLagrangian al2(ph, o2);
    const InnerSolution s2 = al2.run(z0, tol);
    const Vec xs = s2.x_star.head(n);
    const double v2 = al.violation(xs);
    if (v2 < sol.max_violation) {
      sol.x_star = xs;
      sol.value = p.objective_value(xs);
      sol.max_violation = v2;
    }
    if (sol.max_violation <= tol) sol.status = InnerStatus::IterLimit;
  }
  return sol;
}

}  // namespace chebsip
