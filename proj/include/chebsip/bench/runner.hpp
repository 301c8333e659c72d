#pragma once

#include "chebsip/bench/problem.hpp"
#include "chebsip/oracle.hpp"

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

namespace chebsip::bench {

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const std::vector<Vec>& vs) {
  json a = json::array();
  for (const Vec& v : vs) a.push_back(to_json(v));
  return a;
}

inline json to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline json to_json(const CircumscriptionReport& c) {
  return {{"ok", c.ok}, {"worst_violation", c.worst}, {"argmax", to_json(c.argmax)}, {"probes", c.probes}};
}

inline json to_json(const RegPath& p) {
  json steps = json::array();
  for (const RegStep& s : p.steps)
    steps.push_back({{"eps", s.eps},
                     {"x", to_json(s.x)},
                     {"f", s.f},
                     {"psi", s.psi},
                     {"rho", s.rho},
                     {"probe_violation", s.probe_violation},
                     {"per_restart", to_json(s.per_restart)}});
  json j = {{"steps", steps}, {"converged", p.converged}, {"monotone", p.monotone}};
  j["limit"] = p.limit.size() ? to_json(p.limit) : json(nullptr);
  return j;
}

/// One row group of the comma-separated path table.
struct PathTable {
  std::string variant, regularizer;
  RegPath path;
};

inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string path_csv(const std::vector<PathTable>& tables) {
  std::string out = "variant,regularizer,k,eps,f,psi,rho,probe_violation,x\n";
  for (const PathTable& t : tables)
    for (std::size_t k = 0; k < t.path.steps.size(); ++k) {
      const RegStep& s = t.path.steps[k];
      out += t.variant + "," + t.regularizer + "," + std::to_string(k) + "," + fmt(s.eps) + "," + fmt(s.f) + "," +
             fmt(s.psi) + "," + fmt(s.rho) + "," + fmt(s.probe_violation) + ",";
      for (Eigen::Index i = 0; i < s.x.size(); ++i) out += (i ? " " : "") + fmt(s.x[i]);
      out += "\n";
    }
  return out;
}

/// Everything one solve produces. `record` is deterministic given the seed;
/// wall time is kept apart.
struct RunOutput {
  std::string variant;
  ProblemKind kind = ProblemKind::Cheb;
  json record;
  std::vector<PathTable> paths;
  double wall_seconds = 0.0;
  bool solver_ok = true;

  // cheb / learn results kept for checks and plots
  std::optional<ChebyshevResult> cheb;
  std::optional<ChebyshevTask> task;
  std::optional<ChebyshevSetup> setup;
  std::optional<LearningResult> learn;
  std::optional<LearningTask> learn_task;
  std::optional<Vec> learn_shift;
  // sip
  std::optional<SipValueResult> sip_value;
  std::vector<std::pair<std::string, RegPath>> sip_paths;
};

inline json settings_json(const SolverSettings& s) {
  return {{"strategy", to_string(s.global.strategy)},
          {"seed", s.global.seed},
          {"max_evals", s.global.max_evals},
          {"restarts", s.cheb.path.msa.restarts},
          {"eps_start", s.eps_start},
          {"eps_steps", s.eps_steps}};
}

inline RunOutput run_cheb(const Problem& p, const std::string& variant) {
  RunOutput out;
  out.variant = variant;
  out.kind = p.kind;
  const ChebyshevTask& t = *p.cheb;
  out.task = t;
  out.setup = prepare_chebyshev(t);
  const ChebyshevResult r = chebyshev_center(t, p.solver.global, p.solver.cheb);
  json j;
  j["radius"] = r.radius;
  j["center"] = to_json(r.center);
  j["regularized"] = p.solver.cheb.regularized;
  j["active_points"] = to_json(r.active_points);
  j["certificate"] = to_json(r.value.certificate.tuple);
  j["circumscription"] = to_json(r.check);
  j["per_restart"] = to_json(r.value.search.per_restart);
  j["evals"] = r.value.search.evals;
  j["search_box"] = {{"lower", to_json(out.setup->search_box.lower())},
                     {"upper", to_json(out.setup->search_box.upper())}};
  j["t_max"] = out.setup->t_max;
  j["sample_count"] = out.setup->sip.tuple_size();
  j["diagnostics"] = r.diagnostics;
  if (p.solver.cheb.regularized) {
    j["path"] = to_json(r.path);
    out.paths.push_back({variant, "psi", r.path});
  }
  out.solver_ok = r.check.ok;
  out.record = j;
  out.cheb = r;
  return out;
}

inline RunOutput run_sip(const Problem& p, const std::string& variant) {
  RunOutput out;
  out.variant = variant;
  out.kind = p.kind;
  const SipSpec& s = *p.sip;
  const SipValueResult v = solve_sip_value(s.sip, p.solver.global, p.solver.cheb.path.msa);
  json j;
  j["value"] = v.value;
  j["x_relaxed"] = to_json(v.refined.x_relaxed);
  j["certificate"] = to_json(v.certificate.tuple);
  j["per_restart"] = to_json(v.search.per_restart);
  j["evals"] = v.search.evals;
  json regs = json::object();
  bool ok = true;
  for (const NamedRegularizer& g : s.regularizers) {
    const RegPath path = extract_optimizer(s.sip, g.psi, p.solver.cheb.schedule, p.solver.global, p.solver.cheb.path);
    regs[g.name] = to_json(path);
    regs[g.name]["diagnostics"] = path.diagnostics;
    out.paths.push_back({variant, g.name, path});
    out.sip_paths.emplace_back(g.name, path);
    ok = ok && path.monotone;
  }
  j["regularizers"] = regs;
  out.solver_ok = ok;
  out.record = j;
  out.sip_value = v;
  return out;
}

inline RunOutput run_learn(const Problem& p, const std::string& variant) {
  RunOutput out;
  out.variant = variant;
  out.kind = p.kind;
  LearningTask t = to_learning_task(p.learn->rkhs);
  if (p.learn->kernel_ones_shift) out.learn_shift = shift_in_kernel(t, ones_kernel_shift(t, *p.learn->kernel_ones_shift));
  out.learn_task = t;
  const LearningSetup s = prepare_learning(t);
  ChebyshevTask ct = s.cheb;
  if (p.solver.psi_center) ct.psi_center = p.solver.psi_center;
  const LearningResult r = finish_learning(t, s, chebyshev_center(ct, p.solver.global, p.solver.cheb));
  json j;
  j["radius"] = r.cheb.radius;
  j["coefficients"] = to_json(r.coefficients);
  j["w_projection"] = to_json(r.w_projection);
  j["interpolation_residual"] = r.interpolation_residual;
  j["circumscription"] = to_json(r.cheb.check);
  j["per_restart"] = to_json(r.cheb.value.search.per_restart);
  j["evals"] = r.cheb.value.search.evals;
  j["sample_count"] = ct.sample_count;
  j["free_dimension"] = ct.set->param_dim();
  j["diagnostics"] = r.cheb.diagnostics;
  if (out.learn_shift) j["coefficient_shift"] = to_json(*out.learn_shift);
  if (p.solver.cheb.regularized) {
    j["path"] = to_json(r.cheb.path);
    out.paths.push_back({variant, "psi", r.cheb.path});
  }
  // plot data: target and center on a 512-point grid
  const L2InnerProduct ip = p.learn->rkhs.inner_product;
  json grid = json::array();
  for (int i = 0; i < 512; ++i) {
    const double x = ip.a + (ip.b - ip.a) * i / 511.0;
    double c = 0.0;
    for (std::size_t k = 0; k < t.search_basis.size(); ++k)
      c += r.coefficients[static_cast<Eigen::Index>(k)] * t.search_basis[k](x);
    json row = {{"x", x}, {"center", c}};
    if (p.learn->generator) row["target"] = (*p.learn->generator)(Vec::Constant(1, x));
    grid.push_back(row);
  }
  j["curve"] = grid;
  out.solver_ok = r.cheb.check.ok;
  out.record = j;
  out.learn = r;
  return out;
}

inline RunOutput run_problem(const Problem& p, const std::string& variant = "main") {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out;
  switch (p.kind) {
    case ProblemKind::Cheb: out = run_cheb(p, variant); break;
    case ProblemKind::Sip: out = run_sip(p, variant); break;
    case ProblemKind::Learn: out = run_learn(p, variant); break;
  }
  out.record["kind"] = to_string(p.kind);
  out.record["variant"] = variant;
  out.record["solver"] = settings_json(p.solver);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline json to_json(const OracleResult& o) {
  return {{"radius", o.radius},
          {"center", to_json(o.center)},
          {"error_bound", o.error_bound},
          {"index_bound", o.index_bound},
          {"center_bound", o.center_bound},
          {"index_resolution", o.index_resolution},
          {"center_resolution", o.center_resolution},
          {"kept_points", o.kept_points},
          {"hull_points", o.hull_points}};
}

inline OracleResult run_oracle(const Problem& p, int resolution) {
  require(p.kind == ProblemKind::Cheb, ErrorKind::Precondition, "the oracle needs a cheb problem");
  const ChebyshevSetup s = prepare_chebyshev(*p.cheb);
  return grid_oracle(*p.cheb, s.search_box, resolution);
}

}  // namespace chebsip::bench
