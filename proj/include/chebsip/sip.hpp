#pragma once

#include "chebsip/global.hpp"
#include "chebsip/inner.hpp"
#include "chebsip/lowdisc.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chebsip {

/// Convex SIP: minimize f(x) s.t. g(x, u) <= 0 for all u in U, x in X.
/// X is a box plus optional affine equalities and extra convex constraints;
/// U is a ConstraintSet whose points are handled in its parameter coordinates.
struct SipProblem {
  Eigen::Index dim_x = 0;
  std::vector<ConvexFunction> objective;
  /// g(., u) as a convex function of x
  std::function<ConvexFunction(const Vec& u)> constraint;
  BoxDomain state_box;
  std::optional<AffineEqualities> state_equalities;
  std::vector<ConvexFunction> state_constraints;
  std::shared_ptr<const ConstraintSet> index_set;
  Vec slater;
  /// Number of sampled index points N; 0 means dim_x.
  int sample_count = 0;
  double inner_tol = 1e-8;
  /// Candidate index tuples (ambient coordinates) injected as global seeds.
  std::vector<std::vector<Vec>> seed_tuples;
  /// Optional separation oracle: an index point (approximately) maximizing g(x, .).
  std::function<Vec(const Vec& x)> separation;
  /// Extra index points always included when probing U.
  std::vector<Vec> probe_extras;
  std::string label;

  Eigen::Index tuple_size() const { return sample_count > 0 ? sample_count : dim_x; }
};

struct RhoResult {
  std::vector<Vec> tuple;
  double value = -kInf;
  Vec x_relaxed;
  InnerSolution inner;
};

struct Regularizer {
  ConvexFunction psi;
  double eps = 0.0;
};

inline constexpr double kTupleFeasTol = 1e-8;

/// Knobs of one MSA solve.
struct MsaOptions {
  int restarts = 1;
  /// Inject sip.seed_tuples (vertex / corner tuples) into the outer search.
  bool seed_tuples = true;
  /// Exchange refinement around the outer-search result (needs sip.separation).
  bool exchange = true;
  double exchange_tol = 1e-11;
  int exchange_rounds = 100;
  /// Separation cuts added on top of the certificate tuple when computing x.
  int cut_rounds = 40;
  double certificate_tol = 1e-10;
  std::size_t probes = 2000;
};
inline constexpr double kPenalty = 1e12;

/// Objective value f(x).
inline double sip_objective(const SipProblem& sip, const Vec& x) {
  double v = 0.0;
  for (const auto& f : sip.objective) v += f.value(x);
  return v;
}

/// Sum of convex terms as one function.
inline ConvexFunction sum_function(const std::vector<ConvexFunction>& terms, Eigen::Index n, double offset = 0.0) {
  bool affine = true, quad = true;
  for (const auto& t : terms) {
    affine = affine && t.kind() == ConvexFunction::Kind::Affine;
    quad = quad && (t.kind() == ConvexFunction::Kind::Affine || t.kind() == ConvexFunction::Kind::Quadratic);
  }
  if (affine || quad) {
    Matrix h = Matrix::Zero(n, n);
    Vec g = Vec::Zero(n);
    double c = offset;
    for (const auto& t : terms) {
      if (t.kind() == ConvexFunction::Kind::Quadratic) h += t.quad();
      g += t.linear();
      c += t.offset();
    }
    return affine ? ConvexFunction::affine(g, c) : ConvexFunction::quadratic(h, g, c);
  }
  return ConvexFunction::generic(
      n,
      [terms, offset](const Vec& x) {
        double v = offset;
        for (const auto& t : terms) v += t.value(x);
        return v;
      },
      [terms, n](const Vec& x) {
        Vec g = Vec::Zero(n);
        for (const auto& t : terms) g += t.gradient(x);
        return g;
      },
      [terms, n](const Vec& x) {
        Matrix h = Matrix::Zero(n, n);
        for (const auto& t : terms) t.add_hessian(x, 1.0, h);
        return h;
      });
}

/// Feasible low-discrepancy sample of U in ambient coordinates. Draws until
/// `count` feasible points are found or 50*count candidates were tried.
inline std::vector<Vec> sample_index_set(const ConstraintSet& set, std::size_t count, std::uint64_t seed = 3) {
  std::vector<Vec> out;
  const Eigen::Index k = set.param_dim();
  if (k == 0) {
    out.push_back(set.feasible_point());
    return out;
  }
  ScrambledHalton seq(static_cast<std::size_t>(k), seed);
  for (std::uint64_t i = 0; out.size() < count && i < 50 * static_cast<std::uint64_t>(count); ++i) {
    const Vec u = set.lift(set.param_box().from_unit(seq.point(i)));
    if (set.residual(u) <= ConstraintSet::kFeasTol) out.push_back(u);
  }
  return out;
}

/// Checks the SIP data and the Slater point against a probe sample of U.
inline void validate_sip(const SipProblem& sip) {
  require(sip.dim_x > 0, ErrorKind::Precondition, "SIP needs a positive decision dimension");
  require(static_cast<bool>(sip.constraint), ErrorKind::Precondition, "SIP constraint family missing");
  require(sip.index_set != nullptr, ErrorKind::Precondition, "SIP index set missing");
  require_dim(sip.state_box.dim(), sip.dim_x, "state box");
  require_dim(sip.slater.size(), sip.dim_x, "Slater point");
  require(sip.state_box.contains(sip.slater, 1e-12), ErrorKind::Precondition, "Slater point outside the state box");
  for (const auto& f : sip.objective) require_dim(f.dim(), sip.dim_x, "objective term");
  std::vector<Vec> probes = sample_index_set(*sip.index_set, 256);
  probes.push_back(sip.index_set->feasible_point());
  for (const Vec& u : probes) {
    const double g = sip.constraint(u).value(sip.slater);
    require(g < 0, ErrorKind::Precondition, "Slater point is not strictly feasible on the probe sample");
  }
  for (const auto& c : sip.state_constraints)
    require(c.value(sip.slater) < 0, ErrorKind::Precondition, "Slater point violates a state constraint");
}

inline FiniteConvexProgram relaxed_program(const SipProblem& sip, const std::vector<Vec>& tuple,
                                           const Regularizer* reg) {
  FiniteConvexProgram p;
  p.objective = sip.objective;
  if (reg && reg->eps > 0) {
    const ConvexFunction& psi = reg->psi;
    const double e = reg->eps;
    switch (psi.kind()) {
      case ConvexFunction::Kind::Affine: p.objective.push_back(ConvexFunction::affine(e * psi.linear(), e * psi.offset())); break;
      case ConvexFunction::Kind::Quadratic:
        p.objective.push_back(ConvexFunction::quadratic(e * psi.quad(), e * psi.linear(), e * psi.offset()));
        break;
      default:
        p.objective.push_back(ConvexFunction::generic(
            psi.dim(), [psi, e](const Vec& x) { return e * psi.value(x); },
            [psi, e](const Vec& x) { return Vec(e * psi.gradient(x)); },
            [psi, e](const Vec& x) {
              Matrix h = Matrix::Zero(x.size(), x.size());
              psi.add_hessian(x, e, h);
              return h;
            }));
    }
  }
  for (const Vec& u : tuple) p.constraints.push_back(sip.constraint(u));
  for (const auto& c : sip.state_constraints) p.constraints.push_back(c);
  p.state_box = sip.state_box;
  p.equalities = sip.state_equalities;
  return p;
}

/// rho(u_1..u_N): optimal value of the N-constraint relaxation (plus eps*psi).
inline RhoResult rho_eval(const SipProblem& sip, const std::vector<Vec>& tuple, const Vec& x0,
                          const Regularizer* reg = nullptr, double tol = 0.0) {
  for (const Vec& u : tuple) {
    require_dim(u.size(), sip.index_set->dim(), "index point");
    require(sip.index_set->residual(u) <= kTupleFeasTol, ErrorKind::Precondition,
            "tuple point outside the index set");
  }
  RhoResult r;
  r.tuple = tuple;
  const FiniteConvexProgram p = relaxed_program(sip, tuple, reg);
  r.inner = solve_finite_convex(p, x0, tol > 0 ? tol : sip.inner_tol);
  r.x_relaxed = r.inner.x_star;
  switch (r.inner.status) {
    case InnerStatus::Optimal:
    case InnerStatus::IterLimit: r.value = r.inner.value; break;
    case InnerStatus::Infeasible:
    case InnerStatus::NonFinite: r.value = -kInf; break;
  }
  return r;
}

/// Tuple encoding for the outer search: N parameter points concatenated.
struct TupleCodec {
  const ConstraintSet* set;
  Eigen::Index n;

  Eigen::Index k() const { return set->param_dim(); }

  BoxDomain box() const {
    const BoxDomain& pb = set->param_box();
    Vec lo(n * k()), hi(n * k());
    for (Eigen::Index i = 0; i < n; ++i) {
      lo.segment(i * k(), k()) = pb.lower();
      hi.segment(i * k(), k()) = pb.upper();
    }
    return BoxDomain(lo, hi);
  }

  std::vector<Vec> decode(const Vec& v) const {
    std::vector<Vec> t;
    for (Eigen::Index i = 0; i < n; ++i) t.push_back(set->lift(v.segment(i * k(), k())));
    return t;
  }

  Vec encode(const std::vector<Vec>& tuple) const {
    Vec v(n * k());
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec& u = tuple[static_cast<std::size_t>(std::min<Eigen::Index>(i, static_cast<Eigen::Index>(tuple.size()) - 1))];
      v.segment(i * k(), k()) = set->coordinates(u);
    }
    return box().clip(v);
  }
};

/// rho as a function on the encoded tuple box; infeasible tuples get a large
/// negative value with a slope in the total residual.
inline std::function<double(const Vec&)> rho_objective(const SipProblem& sip, const Regularizer* reg) {
  const TupleCodec codec{sip.index_set.get(), sip.tuple_size()};
  return [&sip, reg, codec](const Vec& v) {
    const std::vector<Vec> t = codec.decode(v);
    double res = 0.0;
    for (const Vec& u : t) {
      const double r = sip.index_set->residual(u);
      if (r > kTupleFeasTol) res += r;
    }
    if (res > 0) return -kPenalty * (1.0 + res);
    return rho_eval(sip, t, sip.slater, reg).value;
  };
}

struct SipValueResult {
  double value = -kInf;
  RhoResult certificate;
  /// certificate tuple plus separation cuts; x_relaxed of this is the reported point
  RhoResult refined;
  GlobalResult search;
};

inline GlobalConfig with_seed_tuples(const SipProblem& sip, GlobalConfig cfg,
                                     const std::vector<std::vector<Vec>>& extra, bool use_sip_seeds = true) {
  const TupleCodec codec{sip.index_set.get(), sip.tuple_size()};
  std::vector<Vec> seeds;
  for (const auto& t : extra) seeds.push_back(codec.encode(t));
  if (use_sip_seeds)
    for (const auto& t : sip.seed_tuples) seeds.push_back(codec.encode(t));
  for (const Vec& s : cfg.seeds) seeds.push_back(s);
  cfg.seeds = seeds;
  return cfg;
}

inline SipValueResult exchange_refine(const SipProblem& sip, const Regularizer* reg, std::vector<Vec> tuple,
                                      const MsaOptions& opt);
inline RhoResult cut_refine(const SipProblem& sip, const Regularizer* reg, const RhoResult& cert,
                            const MsaOptions& opt);

/// max over tuples of rho_eps (eps = 0 gives the SIP value). The outer search
/// result is optionally refined by exchange steps and then re-solved at
/// certificate_tol.
inline SipValueResult solve_sip_max(const SipProblem& sip, const GlobalConfig& cfg, const Regularizer* reg,
                                    const std::vector<std::vector<Vec>>& extra_seeds = {},
                                    const MsaOptions& opt = {}) {
  const TupleCodec codec{sip.index_set.get(), sip.tuple_size()};
  std::vector<std::vector<Vec>> seeds = extra_seeds;
  const bool exchange = opt.exchange && static_cast<bool>(sip.separation);
  if (exchange) {
    std::vector<Vec> start;
    if (!seeds.empty())
      start = seeds.front();
    else if (opt.seed_tuples && !sip.seed_tuples.empty())
      start = sip.seed_tuples.front();
    seeds.insert(seeds.begin(), exchange_refine(sip, reg, start, opt).certificate.tuple);
  }
  const GlobalConfig c = with_seed_tuples(sip, cfg, seeds, opt.seed_tuples);
  SipValueResult out;
  out.search = maximize_with_restarts(rho_objective(sip, reg), codec.box(), c, opt.restarts);
  require(out.search.value > -kPenalty, ErrorKind::SolverFailure, "global search found no feasible index tuple");
  std::vector<Vec> best = codec.decode(out.search.u_star);
  if (exchange) {
    const SipValueResult ex = exchange_refine(sip, reg, best, opt);
    if (ex.value >= out.search.value - 1e-9 * (1.0 + std::abs(out.search.value))) best = ex.certificate.tuple;
  }
  out.certificate = rho_eval(sip, best, sip.slater, reg, opt.certificate_tol);
  out.value = out.certificate.value;
  out.refined = exchange ? cut_refine(sip, reg, out.certificate, opt) : out.certificate;
  return out;
}

inline SipValueResult solve_sip_value(const SipProblem& sip, const GlobalConfig& cfg, const MsaOptions& opt = {}) {
  return solve_sip_max(sip, cfg, nullptr, {}, opt);
}

/// Largest constraint value over a probe sample of U (plus the extras).
struct ProbeResult {
  double worst = -kInf;
  Vec argmax;
  std::size_t probes = 0;
};

inline ProbeResult probe_violation(const SipProblem& sip, const Vec& x, std::size_t count = 10000,
                                   const std::vector<Vec>& extras = {}) {
  ProbeResult r;
  std::vector<Vec> pts = sample_index_set(*sip.index_set, count, 17);
  for (const Vec& u : sip.probe_extras) pts.push_back(u);
  for (const Vec& u : extras) pts.push_back(u);
  for (const Vec& u : pts) {
    const double g = sip.constraint(u).value(x);
    if (g > r.worst) {
      r.worst = g;
      r.argmax = u;
    }
  }
  r.probes = pts.size();
  return r;
}

struct RegSolution {
  Vec x_eps;
  double value = kInf;  // f + eps psi
  double f = kInf;
  double psi = kInf;
  double eps = 0.0;
  SipValueResult max;
  double probe_violation = kInf;
};

inline void check_regularizer(const SipProblem& sip, const ConvexFunction& psi) {
  require_dim(psi.dim(), sip.dim_x, "regularizer");
  BoxDomain b = sip.state_box;
  Vec lo = b.lower(), hi = b.upper();
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo[i])) lo[i] = sip.slater[i] - 10.0;
    if (!std::isfinite(hi[i])) hi[i] = sip.slater[i] + 10.0;
  }
  const BoxDomain probe(lo, hi);
  ScrambledHalton seq(static_cast<std::size_t>(2 * sip.dim_x), 29);
  for (std::uint64_t i = 0; i < 64; ++i) {
    const Vec s = seq.point(i);
    const Vec a = probe.from_unit(s.head(sip.dim_x)), c = probe.from_unit(s.tail(sip.dim_x));
    if ((a - c).norm() < 1e-9) continue;
    const double mid = psi.value(0.5 * (a + c));
    require(mid < 0.5 * (psi.value(a) + psi.value(c)) - 1e-12, ErrorKind::Precondition,
            "regularizer is not strictly convex on the state set");
    require(psi.value(a) >= 0, ErrorKind::Precondition, "regularizer must be nonnegative");
  }
}

/// Unique minimizer of f + eps psi over the SIP feasible set.
inline RegSolution solve_sip_regularized(const SipProblem& sip, const ConvexFunction& psi, double eps,
                                         const GlobalConfig& cfg,
                                         const std::vector<std::vector<Vec>>& extra_seeds = {},
                                         const MsaOptions& opt = {}) {
  require(eps > 0 && std::isfinite(eps), ErrorKind::Precondition, "eps must be positive");
  check_regularizer(sip, psi);
  const Regularizer reg{psi, eps};
  RegSolution s;
  s.eps = eps;
  s.max = solve_sip_max(sip, cfg, &reg, extra_seeds, opt);
  s.x_eps = s.max.refined.x_relaxed;
  s.f = sip_objective(sip, s.x_eps);
  s.psi = psi.value(s.x_eps);
  s.value = s.f + eps * s.psi;
  if (opt.probes > 0) s.probe_violation = probe_violation(sip, s.x_eps, opt.probes).worst;
  return s;
}

struct RegStep {
  double eps;
  Vec x;
  double f;
  double psi;
  double rho;
  std::vector<Vec> tuple;
  double probe_violation;
  std::vector<double> per_restart;
};

struct RegPath {
  std::vector<RegStep> steps;
  Vec limit;
  bool converged = false;    // consecutive iterates within stop_tol
  bool monotone = true;      // Lemma: f non-increasing, psi non-decreasing
  std::vector<std::string> diagnostics;

  std::vector<double> epsilons() const {
    std::vector<double> e;
    for (const auto& s : steps) e.push_back(s.eps);
    return e;
  }
};

struct PathOptions {
  double stop_tol = 1e-6;  // 0: run the whole schedule
  double path_tol = 1e-6;
  MsaOptions msa;
};

/// eps_k = start * 2^-k, k = 0..steps-1
inline std::vector<double> default_schedule(double start = 1.0, int steps = 21) {
  std::vector<double> s;
  for (int k = 0; k < steps; ++k) s.push_back(std::ldexp(start, -k));
  return s;
}

inline RegPath extract_optimizer(const SipProblem& sip, const ConvexFunction& psi, const std::vector<double>& schedule,
                                 const GlobalConfig& cfg, const PathOptions& opt = {}) {
  require(!schedule.empty(), ErrorKind::Precondition, "empty eps schedule");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    require(schedule[i] > 0, ErrorKind::Precondition, "eps schedule must be positive");
    if (i > 0) require(schedule[i] < schedule[i - 1], ErrorKind::Precondition, "eps schedule must decrease");
  }
  require(sip.state_box.bounded() || !sip.state_constraints.empty(), ErrorKind::Precondition,
          "unbounded state set: compactify first");
  RegPath path;
  std::vector<std::vector<Vec>> carry;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    GlobalConfig c = cfg;
    c.seed = derive_seed(cfg.seed, 100 + k);
    const RegSolution s = solve_sip_regularized(sip, psi, schedule[k], c, carry, opt.msa);
    carry = {s.max.certificate.tuple};
    path.steps.push_back({schedule[k], s.x_eps, s.f, s.psi, s.max.value, s.max.certificate.tuple,
                          s.probe_violation, s.max.search.per_restart});
    if (k > 0) {
      const RegStep& a = path.steps[k - 1];
      const RegStep& b = path.steps[k];
      if (b.f > a.f + opt.path_tol) {
        path.monotone = false;
        path.diagnostics.push_back("f increased at eps=" + std::to_string(b.eps) + " (global search failure?)");
      }
      if (b.psi < a.psi - opt.path_tol) {
        path.monotone = false;
        path.diagnostics.push_back("psi decreased at eps=" + std::to_string(b.eps) + " (global search failure?)");
      }
      if (opt.stop_tol > 0 && (b.x - a.x).norm() <= opt.stop_tol) {
        path.converged = true;
        break;
      }
    }
  }
  path.limit = path.steps.back().x;
  return path;
}

/// Adds f(x) <= f(x_tilde) + 1 to the state description.
inline SipProblem compactify(const SipProblem& sip, const Vec& x_tilde) {
  require_dim(x_tilde.size(), sip.dim_x, "x_tilde");
  require(sip.state_box.contains(x_tilde, 1e-12), ErrorKind::Precondition, "x_tilde outside the state set");
  SipProblem out = sip;
  const double level = sip_objective(sip, x_tilde) + 1.0;
  out.state_constraints.push_back(sum_function(sip.objective, sip.dim_x, -level));
  return out;
}

/// Exchange refinement: add the most violated index point, drop the point with
/// the smallest multiplier, while rho increases and a violation remains.
inline SipValueResult exchange_refine(const SipProblem& sip, const Regularizer* reg, std::vector<Vec> tuple,
                                      const MsaOptions& opt) {
  const std::size_t n = static_cast<std::size_t>(sip.tuple_size());
  while (tuple.size() < n) tuple.push_back(tuple.empty() ? sip.index_set->feasible_point() : tuple.back());
  tuple.resize(n);
  const double tol = std::min(sip.inner_tol, opt.certificate_tol);
  SipValueResult out;
  out.certificate = rho_eval(sip, tuple, sip.slater, reg, tol);
  for (int round = 0; round < opt.exchange_rounds; ++round) {
    const Vec& x = out.certificate.x_relaxed;
    const Vec u = sip.separation(x);
    const double g = sip.constraint(u).value(x);
    if (!(g > opt.exchange_tol * (1.0 + std::abs(sip_objective(sip, x))))) break;
    std::vector<Vec> grown = tuple;
    grown.push_back(u);
    const RhoResult r = rho_eval(sip, grown, sip.slater, reg, tol);
    const Vec& lam = r.inner.multipliers;
    if (!std::isfinite(r.value) || lam.size() < static_cast<Eigen::Index>(n + 1)) break;
    std::size_t drop = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (lam[static_cast<Eigen::Index>(i)] < lam[static_cast<Eigen::Index>(drop)]) drop = i;
    if (lam[static_cast<Eigen::Index>(n)] < lam[static_cast<Eigen::Index>(drop)]) break;
    grown.erase(grown.begin() + static_cast<std::ptrdiff_t>(drop));
    const RhoResult next = rho_eval(sip, grown, sip.slater, reg, tol);
    if (!(next.value >= out.certificate.value - 1e-12 * (1.0 + std::abs(out.certificate.value)))) break;
    tuple = grown;
    out.certificate = next;
  }
  out.value = out.certificate.value;
  return out;
}

/// Cutting planes on top of a certificate: keep adding the most violated index
/// point (nothing is dropped) while it is violated and new. The relaxed point
/// of a tuple is badly determined when a curved part of U is active (it slides
/// along the supporting cut); cuts on both sides pin it down.
inline RhoResult cut_refine(const SipProblem& sip, const Regularizer* reg, const RhoResult& cert,
                            const MsaOptions& opt) {
  RhoResult cur = cert;
  const std::size_t n = cert.tuple.size();
  const double tol = 1e-13;
  const Vec w = sip.index_set->param_box().width();
  const double scale = 1e-13 * (1.0 + (w.size() > 0 ? w.cwiseAbs().maxCoeff() : 0.0));
  for (int round = 0; round < opt.cut_rounds; ++round) {
    const Vec& x = cur.x_relaxed;
    const Vec u = sip.separation(x);
    if (!(sip.constraint(u).value(x) > 1e-15 * (1.0 + x.cwiseAbs().maxCoeff()))) break;
    bool known = false;
    for (const Vec& v : cur.tuple) known = known || (v - u).cwiseAbs().maxCoeff() <= scale;
    if (known) break;
    // keep the certificate points and the cuts that are still active
    std::vector<Vec> grown(cur.tuple.begin(), cur.tuple.begin() + static_cast<std::ptrdiff_t>(n));
    for (std::size_t i = n; i < cur.tuple.size(); ++i)
      if (cur.inner.multipliers.size() > static_cast<Eigen::Index>(i) &&
          cur.inner.multipliers[static_cast<Eigen::Index>(i)] > 0)
        grown.push_back(cur.tuple[i]);
    grown.push_back(u);
    RhoResult next = rho_eval(sip, grown, sip.slater, reg, tol);
    if (!std::isfinite(next.value)) break;
    cur = std::move(next);
  }
  return cur;
}

/// Separation oracle by search over U: best point of a fixed feasible sample
/// (plus sip.probe_extras), then Nelder-Mead in parameter coordinates from the
/// three best sample points.
inline std::function<Vec(const Vec&)> sampled_separation(const SipProblem& sip, std::size_t sample = 512) {
  auto set = sip.index_set;
  auto pts = std::make_shared<std::vector<Vec>>(sample_index_set(*set, sample, 41));
  for (const Vec& u : sip.probe_extras) pts->push_back(u);
  pts->push_back(set->feasible_point());
  auto family = sip.constraint;
  return [set, pts, family](const Vec& x) {
    std::vector<std::pair<double, std::size_t>> vals;
    for (std::size_t i = 0; i < pts->size(); ++i) vals.emplace_back(family((*pts)[i]).value(x), i);
    std::stable_sort(vals.begin(), vals.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    Vec best = (*pts)[vals.front().second];
    double best_v = vals.front().first;
    if (set->param_dim() == 0) return best;
    const BoxDomain& pb = set->param_box();
    auto f = [&](const Vec& z) {
      const Vec u = set->lift(z);
      if (set->residual(u) > ConstraintSet::kFeasTol) return -kInf;
      return family(u).value(x);
    };
    GlobalConfig nm;
    nm.strategy = Strategy::NelderMeadMultistart;
    nm.nm_simplex = 0.02;
    nm.nm_xtol = 1e-13;
    nm.nm_restarts = 1;
    nm.max_evals = 400 * (set->param_dim() + 1);
    for (std::size_t j = 0; j < std::min<std::size_t>(3, vals.size()); ++j) {
      nm.seeds = {set->coordinates((*pts)[vals[j].second])};
      const GlobalResult r = maximize_box(f, pb, nm);
      if (r.value > best_v) {
        best_v = r.value;
        best = set->lift(r.u_star);
      }
    }
    return best;
  };
}

}  // namespace chebsip
