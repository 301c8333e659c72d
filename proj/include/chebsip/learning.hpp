#pragma once

#include "chebsip/chebyshev.hpp"
#include "chebsip/quadrature.hpp"

#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace chebsip {

/// Optimal learning from linear measurements: the model class is
/// K = {w in Q : Lambda w = y} in the span of the model basis, and the center
/// is sought in the span of the search basis under the joint L2 norm.
struct LearningTask {
  std::vector<FunctionDescriptor> search_basis;
  std::vector<FunctionDescriptor> model_basis;
  Matrix measurements;  // Lambda, S x D
  Vec data;             // y
  BoxDomain coeff_bounds;
  L2InnerProduct inner_product;
  /// Gram of (search, model) stacked; default from quadrature.
  std::optional<Matrix> joint_gram;
  std::string label;
};

/// Point-evaluation measurements: Lambda(i, j) = psi_j(x_i).
struct RkhsTask {
  std::vector<double> points;
  Vec data;
  std::vector<FunctionDescriptor> search_basis;
  std::vector<FunctionDescriptor> model_basis;
  BoxDomain coeff_bounds;
  L2InnerProduct inner_product;
  std::string label;
};

inline Matrix evaluation_matrix(const std::vector<FunctionDescriptor>& basis, const std::vector<double>& points) {
  Matrix k(static_cast<Eigen::Index>(points.size()), static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < basis.size(); ++j)
      k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = basis[j](points[i]);
  require(k.allFinite(), ErrorKind::NonFinite, "kernel evaluation matrix");
  return k;
}

inline LearningTask to_learning_task(const RkhsTask& r) {
  require_dim(static_cast<Eigen::Index>(r.points.size()), r.data.size(), "sample points vs data");
  LearningTask t;
  t.search_basis = r.search_basis;
  t.model_basis = r.model_basis;
  t.measurements = evaluation_matrix(r.model_basis, r.points);
  t.data = r.data;
  t.coeff_bounds = r.coeff_bounds;
  t.inner_product = r.inner_product;
  t.label = r.label;
  return t;
}

/// The learning task as a Chebyshev task. Centers live in orthonormalized
/// search coordinates c~ (c = to_search * c~); the norm is the Gram seminorm of
/// the stacked difference (c~, -w).
struct LearningSetup {
  ChebyshevTask cheb;
  Matrix to_search;  // L x L, upper triangular inverse
  bool same_basis = false;
  Matrix search_factor;  // quadrature rows of the search basis
  Matrix model_factor;
};

namespace detail {

inline bool same_descriptors(const std::vector<FunctionDescriptor>& a, const std::vector<FunctionDescriptor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].kind != b[i].kind || a[i].kind == FunctionDescriptor::Kind::Custom || a[i].degree != b[i].degree)
      return false;
  return true;
}

}  // namespace detail

inline LearningSetup prepare_learning(const LearningTask& task) {
  const auto l = static_cast<Eigen::Index>(task.search_basis.size());
  const auto d = static_cast<Eigen::Index>(task.model_basis.size());
  require(l > 0 && d > 0, ErrorKind::Precondition, "learning task needs nonempty bases");
  require_dim(task.coeff_bounds.dim(), d, "coefficient bounds");
  require_dim(task.measurements.cols(), task.measurements.rows() > 0 ? d : task.measurements.cols(), "measurements");
  require_dim(task.data.size(), task.measurements.rows(), "data");

  ConstraintSet::Spec spec{task.coeff_bounds, {}, {}, {}, std::nullopt};
  if (task.measurements.rows() > 0) spec.equalities = AffineEqualities{task.measurements, task.data};
  auto set = std::make_shared<ConstraintSet>(spec);

  std::vector<FunctionDescriptor> joint = task.search_basis;
  joint.insert(joint.end(), task.model_basis.begin(), task.model_basis.end());
  Matrix f;
  if (task.joint_gram) {
    require(task.joint_gram->rows() == l + d && task.joint_gram->cols() == l + d, ErrorKind::DimensionMismatch,
            "joint Gram");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (*task.joint_gram + task.joint_gram->transpose()));
    const Vec ev = eig.eigenvalues();
    require(ev.minCoeff() > 1e-10 * ev.maxCoeff(), ErrorKind::NotPositiveDefinite, "joint Gram");
    f = ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
  } else {
    f = quadrature_factor(joint, task.inner_product);
  }

  LearningSetup s;
  s.search_factor = f.leftCols(l);
  s.model_factor = f.rightCols(d);
  Eigen::HouseholderQR<Matrix> qr(s.search_factor);
  const Matrix r1 = qr.matrixQR().topRows(l).triangularView<Eigen::Upper>();
  require(r1.diagonal().cwiseAbs().minCoeff() > 1e-14 * r1.diagonal().cwiseAbs().maxCoeff(),
          ErrorKind::NotPositiveDefinite, "search basis is linearly dependent");
  const Matrix q1 = qr.householderQ() * Matrix::Identity(f.rows(), l);
  Matrix stacked(f.rows(), l + d);
  stacked << q1, s.model_factor;
  Eigen::HouseholderQR<Matrix> qr2(stacked);
  const Eigen::Index rows = std::min(stacked.rows(), l + d);
  const Matrix rc = qr2.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
  s.to_search = r1.triangularView<Eigen::Upper>().solve(Matrix::Identity(l, l));
  s.same_basis = detail::same_descriptors(task.search_basis, task.model_basis) && !task.joint_gram;

  ChebyshevTask& c = s.cheb;
  c.set = set;
  c.norm = Norm::gram_factor(rc);
  c.center_map = Matrix::Zero(l + d, l);
  c.center_map.topRows(l) = Matrix::Identity(l, l);
  c.index_map = Matrix::Zero(l + d, d);
  c.index_map.bottomRows(d) = Matrix::Identity(d, d);
  // the center effectively moves in the affine hull of K: 1 + dim K active points
  c.sample_count = static_cast<int>(1 + std::min(l, set->param_dim()));
  c.label = task.label;
  return s;
}

inline SipProblem build_learning_sip(const LearningTask& task) { return build_chebyshev_sip(prepare_learning(task).cheb); }
inline SipProblem build_rkhs_sip(const RkhsTask& task) { return build_learning_sip(to_learning_task(task)); }

struct LearningResult {
  ChebyshevResult cheb;
  Vec coefficients;  // center in the search basis
  Vec w_projection;  // L2 projection of the center onto the model space
  double interpolation_residual = kInf;
};

/// Search-basis coefficients and model projection of a center given in
/// orthonormalized coordinates.
inline LearningResult finish_learning(const LearningTask& task, const LearningSetup& s, ChebyshevResult cheb) {
  LearningResult r;
  r.coefficients = s.to_search.triangularView<Eigen::Upper>() * cheb.center;
  if (s.same_basis)
    r.w_projection = r.coefficients;
  else
    r.w_projection = s.model_factor.completeOrthogonalDecomposition().solve(s.search_factor * r.coefficients);
  r.interpolation_residual =
      task.measurements.rows() > 0 ? (task.measurements * r.w_projection - task.data).lpNorm<Eigen::Infinity>() : 0.0;
  r.cheb = std::move(cheb);
  return r;
}

inline LearningResult learning_center(const LearningTask& task, const GlobalConfig& cfg,
                                      const ChebyshevOptions& opt = {}) {
  const LearningSetup s = prepare_learning(task);
  return finish_learning(task, s, chebyshev_center(s.cheb, cfg, opt));
}

inline LearningResult rkhs_center(const RkhsTask& task, const GlobalConfig& cfg, const ChebyshevOptions& opt = {}) {
  return learning_center(to_learning_task(task), cfg, opt);
}

/// Component of v in ker Lambda.
inline Vec kernel_projection(const LearningTask& task, const Vec& v) {
  require_dim(v.size(), task.coeff_bounds.dim(), "shift");
  if (task.measurements.rows() == 0) return v;
  const Matrix n = affine_parametrize(task.measurements, task.data).basis;
  return n * (n.transpose() * v);
}

/// Shifts the coefficient box by the part of v in ker Lambda, which moves K
/// by exactly that vector (the data stay satisfied). Returns the shift.
inline Vec shift_in_kernel(LearningTask& task, const Vec& v) {
  const Vec s = kernel_projection(task, v);
  task.coeff_bounds = BoxDomain(task.coeff_bounds.lower() + s, task.coeff_bounds.upper() + s);
  task.label += "-shifted";
  return s;
}

/// The kernel direction closest to the all-ones vector, scaled to a largest
/// entry of `amount`. With samples bunched together, ones is nearly in the
/// row space of Lambda, so its plain projection is tiny.
inline Vec ones_kernel_shift(const LearningTask& task, double amount) {
  const Vec p = kernel_projection(task, Vec::Ones(task.coeff_bounds.dim()));
  const double m = p.lpNorm<Eigen::Infinity>();
  require(m > 0, ErrorKind::Precondition, "no free coordinates to shift");
  return amount / m * p;
}

/// f(x) = 10 sin(2 pi x) sampled at S equispaced points of [a, b] (both ends
/// included), monomial bases of size D for both search and model. Samples
/// spread over all of [0,1] leave no polynomial with |w_j| <= 100 for S >= 5,
/// hence the default window near x = 1.
inline RkhsTask sine_rkhs_task(int s, int d, double lo = -100.0, double hi = 100.0, double a = 0.9, double b = 0.95) {
  require(s >= 1 && d >= 1, ErrorKind::Precondition, "sine task needs S >= 1 and D >= 1");
  RkhsTask t;
  for (int k = 0; k < s; ++k) t.points.push_back(s == 1 ? 0.5 * (a + b) : a + (b - a) * k / (s - 1));
  t.data = Vec(s);
  for (int k = 0; k < s; ++k) t.data[k] = 10.0 * std::sin(2.0 * std::numbers::pi * t.points[static_cast<std::size_t>(k)]);
  t.search_basis = monomial_basis(d);
  t.model_basis = monomial_basis(d);
  t.coeff_bounds = BoxDomain::cube(d, lo, hi);
  t.label = "poly-" + std::to_string(d);
  return t;
}

}  // namespace chebsip
