#pragma once

#include "chebsip/learning.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace chebsip::bench {

using json = nlohmann::json;

/// Strict reader over one JSON object: every key must be consumed, every
/// number finite.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) fail("expected an object");
  }

  bool has(const std::string& key) const { return j_->contains(key); }

  const json& at(const std::string& key) {
    if (!has(key)) fail("missing key '" + key + "'");
    seen_.insert(key);
    return (*j_)[key];
  }

  Reader child(const std::string& key) { return Reader(at(key), where(key)); }

  double num(const std::string& key) { return to_num(at(key), where(key)); }
  double num(const std::string& key, double def) { return has(key) ? num(key) : def; }

  long integer(const std::string& key) {
    const json& v = at(key);
    if (!v.is_number_integer()) fail_at(key, "expected an integer");
    return v.get<long>();
  }
  long integer(const std::string& key, long def) { return has(key) ? integer(key) : def; }

  bool flag(const std::string& key, bool def) {
    if (!has(key)) return def;
    const json& v = at(key);
    if (!v.is_boolean()) fail_at(key, "expected true or false");
    return v.get<bool>();
  }

  std::string str(const std::string& key) {
    const json& v = at(key);
    if (!v.is_string()) fail_at(key, "expected a string");
    return v.get<std::string>();
  }
  std::string str(const std::string& key, const std::string& def) { return has(key) ? str(key) : def; }

  Vec vec(const std::string& key) { return to_vec(at(key), where(key)); }
  Matrix mat(const std::string& key) { return to_mat(at(key), where(key)); }

  std::vector<Reader> list(const std::string& key) {
    const json& v = at(key);
    if (!v.is_array()) fail_at(key, "expected an array");
    std::vector<Reader> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], where(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  void done() const {
    for (const auto& [k, v] : j_->items())
      if (!seen_.count(k)) fail("unknown key '" + k + "'");
  }

  const std::string& path() const { return path_; }
  [[noreturn]] void fail(const std::string& what) const { throw Error(ErrorKind::Schema, path_ + ": " + what); }

  static double to_num(const json& v, const std::string& path) {
    if (!v.is_number()) throw Error(ErrorKind::Schema, path + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorKind::Schema, path + ": number must be finite");
    return x;
  }

  static Vec to_vec(const json& v, const std::string& path) {
    if (!v.is_array()) throw Error(ErrorKind::Schema, path + ": expected an array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i)
      out[static_cast<Eigen::Index>(i)] = to_num(v[i], path + "[" + std::to_string(i) + "]");
    return out;
  }

  static Matrix to_mat(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) throw Error(ErrorKind::Schema, path + ": expected a nonempty array of rows");
    Matrix m;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const Vec row = to_vec(v[i], path + "[" + std::to_string(i) + "]");
      if (i == 0) m.resize(static_cast<Eigen::Index>(v.size()), row.size());
      if (row.size() != m.cols()) throw Error(ErrorKind::Schema, path + ": ragged matrix");
      m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
  }

 private:
  std::string where(const std::string& key) const { return path_ + "." + key; }
  [[noreturn]] void fail_at(const std::string& key, const std::string& what) const {
    throw Error(ErrorKind::Schema, where(key) + ": " + what);
  }

  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json load_json(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorKind::Schema, "cannot open '" + file + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Schema, file + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

inline Norm read_norm(Reader r, Eigen::Index dim) {
  const std::string kind = r.str("kind");
  Norm n = Norm::l2();
  if (kind == "l1")
    n = Norm::l1();
  else if (kind == "l2")
    n = Norm::l2();
  else if (kind == "linf")
    n = Norm::linf();
  else if (kind == "weighted" || kind == "gram") {
    const Matrix m = r.mat("matrix");
    if (dim > 0 && m.rows() != dim) r.fail("norm matrix must be " + std::to_string(dim) + " x " + std::to_string(dim));
    n = kind == "weighted" ? Norm::weighted(m) : Norm::gram(m);
  } else {
    r.fail("unknown norm kind '" + kind + "'");
  }
  if (r.has("scale")) n = n.scaled(r.num("scale"));
  r.done();
  return n;
}

inline BoxDomain read_box(Reader r) {
  const Vec lo = r.vec("lower"), hi = r.vec("upper");
  r.done();
  if (lo.size() != hi.size()) r.fail("lower and upper differ in length");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (lo[i] > hi[i]) r.fail("lower > upper in coordinate " + std::to_string(i));
  return BoxDomain(lo, hi);
}

inline ConstraintSet::Spec read_set(Reader r) {
  ConstraintSet::Spec s;
  s.box = read_box(r.child("box"));
  const Eigen::Index n = s.box.dim();
  auto need = [&](const Reader& at, Eigen::Index got) {
    if (got != n) at.fail("expected length " + std::to_string(n));
  };
  if (r.has("halfspaces"))
    for (Reader h : r.list("halfspaces")) {
      Halfspace hs{h.vec("normal"), h.num("offset")};
      need(h, hs.normal.size());
      h.done();
      s.halfspaces.push_back(hs);
    }
  if (r.has("balls"))
    for (Reader b : r.list("balls")) {
      const Vec c = b.vec("center");
      need(b, c.size());
      const double rad = b.num("radius");
      if (rad < 0) b.fail("radius must be nonnegative");
      s.quadratics.push_back(QuadraticInequality::ball(c, rad * rad, b.flag("outside", false)));
      b.done();
    }
  if (r.has("quadratics"))
    for (Reader q : r.list("quadratics")) {
      QuadraticInequality qi{q.mat("quad"), q.vec("linear"), q.num("constant", 0.0)};
      need(q, qi.linear.size());
      if (qi.quad.rows() != n || qi.quad.cols() != n) q.fail("quad must be square of the set dimension");
      q.done();
      s.quadratics.push_back(qi);
    }
  if (r.has("equalities")) {
    Reader e = r.child("equalities");
    AffineEqualities eq{e.mat("matrix"), e.vec("rhs")};
    if (eq.a.cols() != n || eq.y.size() != eq.a.rows()) e.fail("equality dimensions");
    e.done();
    s.equalities = eq;
  }
  r.done();
  return s;
}

struct SolverSettings {
  GlobalConfig global;
  ChebyshevOptions cheb;
  double eps_start = 1.0;
  int eps_steps = 21;
  std::optional<Vec> psi_center;
};

inline SolverSettings read_solver(const json& j) {
  SolverSettings s;
  if (j.is_null()) {
    s.cheb.schedule = default_schedule();
    return s;
  }
  Reader r(j, "solver");
  s.global.strategy = strategy_from_string(r.str("strategy", "de"));
  s.global.seed = static_cast<std::uint64_t>(r.integer("seed", 1));
  s.global.population = static_cast<int>(r.integer("population", 0));
  s.global.max_evals = r.integer("max_evals", s.global.max_evals);
  s.global.nm_restarts = static_cast<int>(r.integer("nm_restarts", s.global.nm_restarts));
  s.global.threads = static_cast<int>(r.integer("threads", 1));
  s.cheb.path.msa.restarts = static_cast<int>(r.integer("restarts", 1));
  s.cheb.path.msa.seed_tuples = r.flag("seed_tuples", true);
  s.cheb.path.msa.exchange = r.flag("exchange", true);
  s.cheb.regularized = r.flag("regularized", true);
  s.cheb.path.stop_tol = r.num("stop_tol", s.cheb.path.stop_tol);
  s.cheb.probes = static_cast<std::size_t>(r.integer("probes", 10000));
  s.eps_start = r.num("eps_start", 1.0);
  s.eps_steps = static_cast<int>(r.integer("eps_steps", 21));
  if (r.has("psi_center")) s.psi_center = r.vec("psi_center");
  r.done();
  if (s.global.seed < 1 || s.global.max_evals < 1 || s.eps_steps < 1 || !(s.eps_start > 0))
    throw Error(ErrorKind::Schema, "solver: seed, max_evals, eps_steps and eps_start must be positive");
  if (s.cheb.probes < 1000) throw Error(ErrorKind::Schema, "solver.probes must be at least 1000");
  s.cheb.schedule = default_schedule(s.eps_start, s.eps_steps);
  return s;
}

// ---------------------------------------------------------------------------
// SIP problems: linear objective, constraint families that are affine in x
// with index-dependent coefficients, or norm balls.

struct Term {
  double coef = 1.0;
  enum class Fn { Const, Identity, Cos, Sin } fn = Fn::Const;
  Eigen::Index index = 0;
  double freq = 1.0;

  double operator()(const Vec& u) const {
    switch (fn) {
      case Fn::Const: return coef;
      case Fn::Identity: return coef * u[index];
      case Fn::Cos: return coef * std::cos(freq * u[index]);
      case Fn::Sin: return coef * std::sin(freq * u[index]);
    }
    return 0.0;
  }
};

inline std::vector<Term> read_terms(const json& j, const std::string& path, Eigen::Index index_dim) {
  if (!j.is_array()) throw Error(ErrorKind::Schema, path + ": expected a list of terms");
  std::vector<Term> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Reader r(j[i], path + "[" + std::to_string(i) + "]");
    Term t;
    t.coef = r.num("coef", 1.0);
    const std::string fn = r.str("fn", "const");
    if (fn == "const")
      t.fn = Term::Fn::Const;
    else if (fn == "identity")
      t.fn = Term::Fn::Identity;
    else if (fn == "cos")
      t.fn = Term::Fn::Cos;
    else if (fn == "sin")
      t.fn = Term::Fn::Sin;
    else
      r.fail("unknown term function '" + fn + "' (const, identity, cos, sin)");
    t.index = static_cast<Eigen::Index>(r.integer("index", 0));
    t.freq = r.num("freq", 1.0);
    r.done();
    if (t.index < 0 || t.index >= index_dim) r.fail("index out of range");
    out.push_back(t);
  }
  return out;
}

struct NamedRegularizer {
  std::string name;
  ConvexFunction psi;
};

struct SipSpec {
  SipProblem sip;
  std::vector<NamedRegularizer> regularizers;
};

inline SipSpec read_sip(Reader r, std::shared_ptr<const ConstraintSet> index_set) {
  SipSpec out;
  SipProblem& s = out.sip;
  s.state_box = read_box(r.child("state_box"));
  s.dim_x = s.state_box.dim();
  s.index_set = index_set;
  const Eigen::Index m = index_set->dim();
  s.slater = r.has("slater") ? r.vec("slater") : s.state_box.center();
  if (s.slater.size() != s.dim_x) r.fail("slater point has the wrong length");

  Reader obj = r.child("objective");
  const Vec lin = obj.vec("linear");
  if (lin.size() != s.dim_x) obj.fail("objective length");
  s.objective = {ConvexFunction::affine(lin, obj.num("constant", 0.0))};
  obj.done();

  Reader c = r.child("constraint");
  const std::string family = c.str("family");
  if (family == "affine") {
    const json& coeffs = c.at("coefficients");
    if (!coeffs.is_array() || static_cast<Eigen::Index>(coeffs.size()) != s.dim_x)
      c.fail("coefficients: one term list per decision variable");
    std::vector<std::vector<Term>> a;
    for (std::size_t i = 0; i < coeffs.size(); ++i)
      a.push_back(read_terms(coeffs[i], c.path() + ".coefficients[" + std::to_string(i) + "]", m));
    const std::vector<Term> b = c.has("constant") ? read_terms(c.at("constant"), c.path() + ".constant", m)
                                                  : std::vector<Term>{};
    const Eigen::Index n = s.dim_x;
    s.constraint = [a, b, n](const Vec& u) {
      Vec g = Vec::Zero(n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (const Term& t : a[static_cast<std::size_t>(i)]) g[i] += t(u);
      double off = 0.0;
      for (const Term& t : b) off += t(u);
      return ConvexFunction::affine(g, off);
    };
  } else if (family == "norm_ball") {
    const Matrix p = c.mat("x_map");
    const Matrix bm = c.mat("index_map");
    if (p.cols() != s.dim_x || bm.cols() != m || bm.rows() != p.rows()) c.fail("x_map / index_map dimensions");
    const Vec q = c.has("shift") ? c.vec("shift") : Vec::Zero(p.rows());
    const Vec sl = c.has("linear") ? c.vec("linear") : Vec::Zero(s.dim_x);
    if (q.size() != p.rows() || sl.size() != s.dim_x) c.fail("shift / linear lengths");
    const double k0 = c.num("constant", 0.0);
    const Norm norm = read_norm(c.child("norm"), p.rows());
    s.constraint = [norm, p, bm, q, sl, k0](const Vec& u) {
      return ConvexFunction::norm_ball(norm, p, bm * u + q, sl, k0);
    };
  } else {
    c.fail("unsupported constraint family '" + family + "' (affine, norm_ball)");
  }
  c.done();
  s.sample_count = static_cast<int>(r.integer("sample_count", 0));
  if (r.has("regularizers"))
    for (Reader g : r.list("regularizers")) {
      const Vec center = g.vec("center");
      const Vec w = g.has("weights") ? g.vec("weights") : Vec::Ones(center.size());
      if (center.size() != s.dim_x || w.size() != s.dim_x) g.fail("regularizer length");
      out.regularizers.push_back({g.str("name"), ConvexFunction::squared_distance(center, w)});
      g.done();
    }
  r.done();
  s.separation = sampled_separation(s);
  validate_sip(s);
  return out;
}

// ---------------------------------------------------------------------------

struct LearnSpec {
  RkhsTask rkhs;
  std::optional<double> kernel_ones_shift;
  std::optional<Term> generator;  // target function for plots
};

inline std::vector<FunctionDescriptor> read_basis(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw Error(ErrorKind::Schema, path + ": expected a nonempty list of degrees");
  std::vector<FunctionDescriptor> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long>() < 0 || j[i].get<long>() > 64)
      throw Error(ErrorKind::Schema, path + ": degrees must be integers in [0, 64]");
    out.push_back(FunctionDescriptor::monomial(j[i].get<int>()));
  }
  return out;
}

inline LearnSpec read_learning(Reader r) {
  LearnSpec out;
  RkhsTask& t = out.rkhs;
  if (r.has("interval")) {
    const Vec iv = r.vec("interval");
    if (iv.size() != 2 || !(iv[0] < iv[1])) r.fail("interval must be [a, b] with a < b");
    t.inner_product = {iv[0], iv[1]};
  }
  t.search_basis = read_basis(r.at("search_basis"), r.path() + ".search_basis");
  t.model_basis = read_basis(r.at("model_basis"), r.path() + ".model_basis");
  if (r.has("points")) {
    const Vec p = r.vec("points");
    t.points.assign(p.data(), p.data() + p.size());
  } else {
    Reader e = r.child("points_equispaced");
    const double a = e.num("from"), b = e.num("to");
    const long n = e.integer("count");
    e.done();
    if (n < 1) e.fail("count must be positive");
    for (long k = 0; k < n; ++k) t.points.push_back(n == 1 ? 0.5 * (a + b) : a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
  }
  const Eigen::Index s = static_cast<Eigen::Index>(t.points.size());
  if (r.has("data")) {
    t.data = r.vec("data");
    if (t.data.size() != s) r.fail("data must have one value per point");
  } else {
    Reader g = r.child("generator");
    const std::string kind = g.str("kind");
    Term f;
    f.coef = g.num("amplitude", 1.0);
    f.freq = 2.0 * std::numbers::pi * g.num("frequency", 1.0);
    if (kind == "sine")
      f.fn = Term::Fn::Sin;
    else if (kind == "cosine")
      f.fn = Term::Fn::Cos;
    else
      g.fail("unknown generator '" + kind + "' (sine, cosine)");
    g.done();
    out.generator = f;
    t.data = Vec(s);
    for (Eigen::Index i = 0; i < s; ++i) t.data[i] = f(Vec::Constant(1, t.points[static_cast<std::size_t>(i)]));
  }
  Reader b = r.child("bounds");
  const Eigen::Index d = static_cast<Eigen::Index>(t.model_basis.size());
  auto bound = [&](const std::string& key) {
    const json& v = b.at(key);
    if (v.is_array()) {
      Vec x = Reader::to_vec(v, b.path() + "." + key);
      if (x.size() != d) b.fail(key + " must have one entry per model basis function");
      return x;
    }
    return Vec(Vec::Constant(d, Reader::to_num(v, b.path() + "." + key)));
  };
  t.coeff_bounds = BoxDomain(bound("lower"), bound("upper"));
  b.done();
  if (r.has("shift")) {
    Reader sh = r.child("shift");
    out.kernel_ones_shift = sh.num("kernel_ones");
    sh.done();
  }
  r.done();
  return out;
}

// ---------------------------------------------------------------------------

enum class ProblemKind { Cheb, Sip, Learn };

/// A parsed problem file. `doc` is the effective document (variants removed),
/// the thing that gets hashed and echoed.
struct Problem {
  std::string name;
  ProblemKind kind = ProblemKind::Cheb;
  json doc;
  SolverSettings solver;
  // cheb
  std::optional<ChebyshevTask> cheb;
  // sip
  std::optional<SipSpec> sip;
  // learn
  std::optional<LearnSpec> learn;
  std::string out_dir;
  bool plot = true;
};

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Cheb: return "cheb";
    case ProblemKind::Sip: return "sip";
    case ProblemKind::Learn: return "learn";
  }
  return "?";
}

/// Parses one problem document (no variants key).
inline Problem parse_problem(const json& doc) {
  Reader r(doc, "problem");
  Problem p;
  p.doc = doc;
  p.name = r.str("name");
  const std::string kind = r.str("kind");
  if (kind == "cheb")
    p.kind = ProblemKind::Cheb;
  else if (kind == "sip")
    p.kind = ProblemKind::Sip;
  else if (kind == "learn")
    p.kind = ProblemKind::Learn;
  else
    r.fail("kind must be cheb, sip or learn");
  if (r.has("description")) r.str("description");
  p.solver = read_solver(r.has("solver") ? r.at("solver") : json());

  if (p.kind == ProblemKind::Cheb) {
    Reader space = r.child("space");
    const Eigen::Index dim = static_cast<Eigen::Index>(space.integer("dim"));
    ChebyshevTask t;
    t.norm = space.has("norm") ? read_norm(space.child("norm"), dim) : Norm::l2();
    space.done();
    const ConstraintSet::Spec spec = read_set(r.child("set"));
    if (spec.box.dim() != dim) r.fail("set dimension differs from space.dim");
    t.set = std::make_shared<ConstraintSet>(spec);
    if (r.has("search_box")) t.search_box = read_box(r.child("search_box"));
    if (p.solver.psi_center) t.psi_center = p.solver.psi_center;
    t.label = p.name;
    p.cheb = t;
  } else if (p.kind == ProblemKind::Sip) {
    auto set = std::make_shared<ConstraintSet>(read_set(r.child("set")));
    p.sip = read_sip(r.child("sip"), set);
    p.sip->sip.label = p.name;
  } else {
    p.learn = read_learning(r.child("learning"));
    p.learn->rkhs.label = p.name;
  }
  if (r.has("output")) {
    Reader o = r.child("output");
    p.out_dir = o.str("dir", "");
    p.plot = o.flag("plot", true);
    o.done();
  }
  r.done();
  return p;
}

struct ProblemFile {
  json base;  // without variants
  std::vector<std::pair<std::string, json>> variants;  // name, merge patch
};

/// Splits off the variant list. Each variant is {"name", "patch"}; the patch
/// is merged into the base document (JSON merge patch: null deletes).
inline ProblemFile split_variants(json doc) {
  if (!doc.is_object()) throw Error(ErrorKind::Schema, "problem: expected an object");
  ProblemFile f;
  if (doc.contains("variants")) {
    const json v = doc["variants"];
    doc.erase("variants");
    if (!v.is_array()) throw Error(ErrorKind::Schema, "problem.variants: expected an array");
    for (std::size_t i = 0; i < v.size(); ++i) {
      Reader r(v[i], "problem.variants[" + std::to_string(i) + "]");
      const std::string name = r.str("name");
      const json patch = r.at("patch");
      r.done();
      if (name == "main") r.fail("variant name 'main' is reserved");
      for (const auto& [n, _] : f.variants)
        if (n == name) r.fail("duplicate variant name");
      f.variants.emplace_back(name, patch);
    }
  }
  f.base = doc;
  return f;
}

inline json apply_patch(const json& base, const json& patch) {
  json out = base;
  out.merge_patch(patch);
  return out;
}

/// 64-bit FNV-1a of the canonical (sorted-key, compact) dump.
inline std::string digest(const json& doc) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : doc.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << "fnv1a64:" << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace chebsip::bench
