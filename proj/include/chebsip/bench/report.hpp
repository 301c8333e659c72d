#pragma once

#include "chebsip/bench/plot.hpp"
#include "chebsip/bench/runner.hpp"

#include <filesystem>
#include <fstream>
#include <map>

namespace chebsip::bench {

enum ExitCode { kExitOk = 0, kExitSchema = 2, kExitSolver = 3, kExitMismatch = 4 };

struct CheckResult {
  std::string id;
  bool ok = false;
  json detail;
};

using Runs = std::map<std::string, RunOutput>;

namespace detail {

inline const RunOutput& run_of(const Runs& runs, const std::string& v, const Reader& r) {
  const auto it = runs.find(v);
  if (it == runs.end()) r.fail("no variant named '" + v + "'");
  return it->second;
}

inline double radius_of(const RunOutput& o) {
  if (o.cheb) return o.cheb->radius;
  if (o.learn) return o.learn->cheb.radius;
  if (o.sip_value) return o.sip_value->value;
  return kInf;
}

inline Vec center_of(const RunOutput& o) {
  if (o.cheb) return o.cheb->center;
  if (o.learn) return o.learn->coefficients;
  return Vec();
}

inline const CircumscriptionReport* check_of(const RunOutput& o) {
  if (o.cheb) return &o.cheb->check;
  if (o.learn) return &o.learn->cheb.check;
  return nullptr;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) return kInf;
  return (a - b).lpNorm<Eigen::Infinity>();
}

}  // namespace detail

/// Evaluates one expected-value entry against the runs of a problem.
inline CheckResult evaluate_check(const json& spec, const Runs& runs, const Problem& base, std::size_t index) {
  Reader r(spec, "expected.checks[" + std::to_string(index) + "]");
  CheckResult c;
  c.id = r.str("id");
  const std::string q = r.str("quantity");
  const std::string variant = r.str("variant", "main");
  const std::string source = r.str("source", "derived");
  if (r.has("note")) r.str("note");
  const RunOutput& o = detail::run_of(runs, variant, r);
  json d = {{"quantity", q}, {"variant", variant}, {"source", source}};

  if (q == "radius" || q == "value") {
    const double want = r.num("value"), tol = r.num("tol");
    const double got = detail::radius_of(o);
    c.ok = std::abs(got - want) <= tol;
    d.update({{"got", got}, {"want", want}, {"tol", tol}});
  } else if (q == "center") {
    const Vec want = r.vec("value");
    const double tol = r.num("tol");
    const Vec got = detail::center_of(o);
    const double err = detail::max_abs_diff(got, want);
    c.ok = err <= tol;
    d.update({{"got", to_json(got)}, {"want", to_json(want)}, {"tol", tol}, {"max_abs_error", err}});
  } else if (q == "limit") {
    const std::string reg = r.str("regularizer");
    const Vec want = r.vec("value");
    const double tol = r.num("tol");
    Vec got;
    for (const auto& [name, path] : o.sip_paths)
      if (name == reg) got = path.limit;
    if (!got.size()) r.fail("no regularizer named '" + reg + "'");
    const double err = detail::max_abs_diff(got, want);
    c.ok = err <= tol;
    d.update({{"regularizer", reg}, {"got", to_json(got)}, {"want", to_json(want)}, {"tol", tol}, {"max_abs_error", err}});
  } else if (q == "circumscribed") {
    const bool want = r.flag("value", true);
    const CircumscriptionReport* cr = detail::check_of(o);
    if (!cr) r.fail("circumscribed needs a cheb or learn run");
    c.ok = cr->ok == want;
    d.update({{"got", cr->ok}, {"want", want}, {"worst_violation", cr->worst}, {"probes", cr->probes}});
  } else if (q == "interpolation_residual") {
    const double mx = r.num("max");
    if (!o.learn) r.fail("interpolation_residual needs a learn run");
    c.ok = o.learn->interpolation_residual <= mx;
    d.update({{"got", o.learn->interpolation_residual}, {"max", mx}});
  } else if (q == "path_monotone") {
    bool mono = true;
    std::size_t steps = 0;
    for (const PathTable& t : o.paths) {
      mono = mono && t.path.monotone;
      steps += t.path.steps.size();
    }
    c.ok = mono && steps > 0;
    d.update({{"got", mono}, {"steps", steps}});
  } else if (q == "oracle") {
    const int res = static_cast<int>(r.integer("resolution"));
    const double tol = r.num("tol", 1e-3);
    if (base.kind != ProblemKind::Cheb) r.fail("oracle needs a cheb problem");
    const OracleResult orc = grid_oracle(*o.task, o.setup->search_box, res);
    const double got = detail::radius_of(o);
    c.ok = std::abs(got - orc.radius) <= orc.error_bound + tol;
    d.update({{"got", got}, {"oracle", to_json(orc)}, {"tol", tol}});
  } else if (q == "radius_at_least") {
    const std::string other = r.str("other");
    const double tol = r.num("tol", 0.0);
    const double a = detail::radius_of(o), b = detail::radius_of(detail::run_of(runs, other, r));
    c.ok = a >= b - tol;
    d.update({{"got", a}, {"other", other}, {"other_radius", b}});
  } else if (q == "free_shift") {
    const std::string other = r.str("other");
    const double tol = r.num("tol");
    const RunOutput& b = detail::run_of(runs, other, r);
    if (!o.learn || !b.learn || !o.learn_shift) r.fail("free_shift compares a shifted learn run with its baseline");
    const Matrix n = affine_parametrize(b.learn_task->measurements, b.learn_task->data).basis;
    const Vec got = n.transpose() * (o.learn->coefficients - b.learn->coefficients);
    const Vec want = n.transpose() * *o.learn_shift;
    const double err = detail::max_abs_diff(got, want);
    c.ok = err <= tol;
    d.update({{"got", to_json(got)}, {"want", to_json(want)}, {"tol", tol}, {"max_abs_error", err}});
  } else if (q == "center_agreement") {
    const double tol = r.num("tol");
    std::vector<std::string> names{variant};
    for (const auto& v : r.at("others")) {
      if (!v.is_string()) r.fail("others must be variant names");
      names.push_back(v.get<std::string>());
    }
    double err = 0.0;
    for (std::size_t i = 0; i < names.size(); ++i)
      for (std::size_t j = i + 1; j < names.size(); ++j)
        err = std::max(err, detail::max_abs_diff(detail::center_of(detail::run_of(runs, names[i], r)),
                                                 detail::center_of(detail::run_of(runs, names[j], r))));
    c.ok = err <= tol;
    d.update({{"variants", names}, {"max_pairwise_error", err}, {"tol", tol}});
  } else if (q == "plane_residual") {
    const Vec n = r.vec("normal"), pt = r.vec("point");
    const double tol = r.num("tol");
    const Vec got = detail::center_of(o);
    if (got.size() != n.size()) r.fail("plane normal length");
    const double res = std::abs(n.dot(got - pt)) / n.norm();
    c.ok = res <= tol;
    d.update({{"got", res}, {"tol", tol}});
  } else if (q == "unregularized_scan") {
    // value-only runs over many seeds; records how many relaxed centers miss
    // part of K (either outcome is acceptable, the count is the result)
    const long seeds = r.integer("seeds");
    const double tol = r.num("tol");
    const double want = r.num("value");
    if (!o.task) r.fail("unregularized_scan needs a cheb run");
    ChebyshevOptions opt = base.solver.cheb;
    opt.regularized = false;
    int bad = 0;
    bool radii_ok = true;
    json per_seed = json::array();
    for (long s = 1; s <= seeds; ++s) {
      GlobalConfig g = base.solver.global;
      g.seed = static_cast<std::uint64_t>(s);
      const ChebyshevResult u = chebyshev_center(*o.task, g, opt);
      bad += !u.check.ok;
      radii_ok = radii_ok && std::abs(u.radius - want) <= tol;
      per_seed.push_back({{"seed", s}, {"radius", u.radius}, {"center", to_json(u.center)}, {"circumscribed", u.check.ok}});
    }
    c.ok = radii_ok;
    d.update({{"non_circumscribing", bad},
              {"seeds", seeds},
              {"outcome", bad > 0 ? "found non-circumscribing relaxed centers" : "all seeds circumscribed"},
              {"runs", per_seed}});
  } else {
    r.fail("unknown quantity '" + q + "'");
  }
  r.done();
  c.detail = d;
  c.detail["ok"] = c.ok;
  c.detail["id"] = c.id;
  return c;
}

struct Report {
  json doc;
  std::string csv;
  std::string svg;
  std::string curve_csv;
  json timing;
  int exit_code = kExitOk;
};

inline std::string curve_csv(const RunOutput& o) {
  if (!o.record.contains("curve")) return "";
  std::string out = "x,center,target\n";
  for (const json& row : o.record["curve"]) {
    out += fmt(row["x"].get<double>()) + "," + fmt(row["center"].get<double>()) + ",";
    if (row.contains("target")) out += fmt(row["target"].get<double>());
    out += "\n";
  }
  return out;
}

/// Runs the base problem and every variant; evaluates `expected` checks when
/// given. Nothing is written here.
inline Report run_file(const json& config, const std::optional<json>& expected, bool want_plot = true) {
  const ProblemFile pf = split_variants(config);
  Report rep;
  Runs runs;
  std::vector<std::pair<std::string, Problem>> problems;
  problems.emplace_back("main", parse_problem(pf.base));
  for (const auto& [name, patch] : pf.variants) problems.emplace_back(name, parse_problem(apply_patch(pf.base, patch)));

  json runs_json = json::object();
  std::vector<PathTable> tables;
  json timing = json::object();
  for (const auto& [name, p] : problems) {
    RunOutput o = run_problem(p, name);
    runs_json[name] = o.record;
    timing[name] = o.wall_seconds;
    for (const PathTable& t : o.paths) tables.push_back(t);
    runs.emplace(name, std::move(o));
  }
  const Problem& main = problems.front().second;
  rep.doc["name"] = main.name;
  rep.doc["kind"] = to_string(main.kind);
  rep.doc["digest"] = digest(config);
  rep.doc["config"] = config;
  rep.doc["runs"] = runs_json;
  rep.csv = path_csv(tables);
  rep.timing = {{"wall_seconds", timing}};
  rep.curve_csv = curve_csv(runs.at("main"));

  const bool main_ok = runs.at("main").solver_ok;
  std::string status = main_ok ? "ok" : "solver_failure";
  rep.exit_code = main_ok ? kExitOk : kExitSolver;
  if (expected) {
    Reader er(*expected, "expected");
    if (er.has("name") && er.str("name") != main.name) er.fail("expected values belong to another problem");
    if (er.has("description")) er.str("description");
    json checks = json::array();
    bool all = true;
    std::size_t i = 0;
    for (const json& spec : er.at("checks")) {
      const CheckResult c = evaluate_check(spec, runs, main, i++);
      checks.push_back(c.detail);
      all = all && c.ok;
    }
    er.done();
    rep.doc["checks"] = checks;
    status = all ? "ok" : "mismatch";
    rep.exit_code = all ? kExitOk : kExitMismatch;
  }
  rep.doc["status"] = status;
  if (want_plot && main.plot) rep.svg = render_plot(main, runs.at("main"));
  return rep;
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorKind::Precondition, "cannot write '" + p.string() + "'");
  out << s;
}

/// report.json, path.csv, optional plot.svg / curve.csv, and timing.json
/// (wall times live apart so the report stays byte-stable).
inline void write_report(const Report& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", r.doc.dump(2) + "\n");
  write_text(dir / "path.csv", r.csv);
  if (!r.svg.empty()) write_text(dir / "plot.svg", r.svg);
  if (!r.curve_csv.empty()) write_text(dir / "curve.csv", r.curve_csv);
  write_text(dir / "timing.json", r.timing.dump(2) + "\n");
}

}  // namespace chebsip::bench
