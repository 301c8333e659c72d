#pragma once

#include "chebsip/bench/report.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifndef CHEBSIP_REPRO_DIR
#define CHEBSIP_REPRO_DIR "data/repro"
#endif

namespace chebsip::bench {

inline const std::vector<std::string>& repro_names() {
  static const std::vector<std::string> names{"disk",           "l1-polytope",       "nonconvex-lens",
                                              "affine-1d-rect", "affine-1d-ellipse", "affine-2d-plane",
                                              "poly-7",         "poly-10",           "poly-12",
                                              "poly-20",        "poly-10-shifted",   "weighted-triangle"};
  return names;
}

/// Command-line overrides for the base solver section.
struct Overrides {
  std::optional<long> seed;
  std::optional<std::string> strategy;
  std::optional<long> restarts;
  std::optional<double> eps_start;
  std::optional<long> eps_steps;

  void apply(json& doc) const {
    if (!seed && !strategy && !restarts && !eps_start && !eps_steps) return;
    json& s = doc["solver"];
    if (s.is_null()) s = json::object();
    if (seed) s["seed"] = *seed;
    if (strategy) s["strategy"] = *strategy;
    if (restarts) s["restarts"] = *restarts;
    if (eps_start) s["eps_start"] = *eps_start;
    if (eps_steps) s["eps_steps"] = *eps_steps;
  }
};

/// A report file is accepted wherever a problem file is: its config echo is
/// the problem.
inline json problem_from(const json& doc) {
  if (doc.is_object() && doc.contains("config") && doc.contains("digest")) return doc.at("config");
  return doc;
}

inline int exit_code_for(const Error& e) {
  return e.kind() == ErrorKind::SolverFailure || e.kind() == ErrorKind::NonFinite ? kExitSolver : kExitSchema;
}

inline std::filesystem::path output_root(const std::string& flag, const json& doc) {
  if (!flag.empty()) return flag;
  if (doc.contains("output") && doc["output"].is_object() && doc["output"].contains("dir") &&
      doc["output"]["dir"].is_string() && !doc["output"]["dir"].get<std::string>().empty())
    return doc["output"]["dir"].get<std::string>();
  if (const char* env = std::getenv("CHEBSIP_OUT_DIR"); env && *env) return env;
  return "chebsip-out";
}

inline void print_summary(std::ostream& os, const Report& r) {
  const json& d = r.doc;
  for (const auto& [variant, run] : d.at("runs").items()) {
    os << d["name"].get<std::string>() << " [" << variant << "]";
    if (run.contains("radius")) os << " radius " << fmt(run["radius"].get<double>());
    if (run.contains("value")) os << " value " << fmt(run["value"].get<double>());
    if (run.contains("circumscription"))
      os << (run["circumscription"]["ok"].get<bool>() ? " circumscribed" : " NOT circumscribed");
    os << "\n";
  }
  if (d.contains("checks"))
    for (const json& c : d["checks"])
      os << "  " << (c["ok"].get<bool>() ? "ok      " : "MISMATCH") << " " << c["id"].get<std::string>() << "\n";
  os << "status " << d["status"].get<std::string>() << "\n";
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Chebyshev centers and semi-infinite programs"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides ov;
  std::string out_dir, strategy, data_dir = CHEBSIP_REPRO_DIR;
  long seed = 0, restarts = 0, eps_steps = 0;
  double eps_start = 0;
  auto* o_seed = app.add_option("--seed", seed, "global-optimizer seed (>= 1)");
  auto* o_strategy = app.add_option("--strategy", strategy, "global strategy")->check(CLI::IsMember({"de", "sa", "nm"}));
  auto* o_restarts = app.add_option("--restarts", restarts, "independent restarts");
  auto* o_eps_start = app.add_option("--eps-start", eps_start, "first regularization weight");
  auto* o_eps_steps = app.add_option("--eps-steps", eps_steps, "number of regularization weights");
  app.add_option("--out", out_dir, "output directory (default: output.dir, $CHEBSIP_OUT_DIR, ./chebsip-out)");
  app.add_option("--data", data_dir, "directory holding the bundled repro problems");

  std::string file, name;
  int resolution = 256;
  bool no_plot = false;
  app.add_flag("--no-plot", no_plot, "skip the SVG plot");
  auto* cheb = app.add_subcommand("cheb", "Chebyshev center of a set");
  auto* sip = app.add_subcommand("sip", "semi-infinite program");
  auto* learn = app.add_subcommand("learn", "optimal learning from samples");
  auto* oracle = app.add_subcommand("oracle", "grid brute-force Chebyshev radius");
  auto* repro = app.add_subcommand("repro", "run a bundled experiment against its expected values");
  for (auto* c : {cheb, sip, learn, oracle}) c->add_option("file", file, "problem or report file")->required();
  oracle->add_option("--resolution", resolution, "grid resolution per axis")->check(CLI::Range(2, kOracleMaxResolution));
  repro->add_option("name", name, "experiment id")->required()->check(CLI::IsMember(repro_names()));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kExitOk : kExitSchema;
  }
  if (*o_seed) ov.seed = seed;
  if (*o_strategy) ov.strategy = strategy;
  if (*o_restarts) ov.restarts = restarts;
  if (*o_eps_start) ov.eps_start = eps_start;
  if (*o_eps_steps) ov.eps_steps = eps_steps;

  json config;
  std::optional<json> expected;
  try {
    if (*repro) {
      const std::filesystem::path dir = std::filesystem::path(data_dir) / name;
      config = load_json((dir / "problem.json").string());
      expected = load_json((dir / "expected.json").string());
    } else {
      config = problem_from(load_json(file));
    }
    ov.apply(config);
    const ProblemFile pf = split_variants(config);
    const Problem main = parse_problem(pf.base);
    const std::string want = *cheb ? "cheb" : *sip ? "sip" : *learn ? "learn" : *oracle ? "cheb" : "";
    if (!want.empty() && want != to_string(main.kind))
      throw Error(ErrorKind::Schema, std::string("problem kind is '") + to_string(main.kind) + "', command expects '" +
                                         want + "'");
    const std::filesystem::path dir = output_root(out_dir, config) / main.name;

    if (*oracle) {
      const auto t0 = std::chrono::steady_clock::now();
      const OracleResult o = run_oracle(main, resolution);
      Report r;
      r.doc = {{"name", main.name}, {"kind", "oracle"}, {"digest", digest(config)}, {"config", config},
               {"resolution", resolution}, {"oracle", to_json(o)}, {"status", "ok"}};
      r.timing = {{"wall_seconds", {{"oracle", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}}}};
      std::filesystem::create_directories(dir);
      write_text(dir / "oracle.json", r.doc.dump(2) + "\n");
      out << main.name << " oracle radius " << fmt(o.radius) << " +- " << fmt(o.error_bound) << "\n"
          << "wrote " << (dir / "oracle.json").string() << "\n";
      return kExitOk;
    }

    Report r;
    try {
      r = run_file(config, expected, !no_plot);
    } catch (const Error& e) {
      if (exit_code_for(e) != kExitSolver) throw;
      r.doc = {{"name", main.name}, {"kind", to_string(main.kind)}, {"digest", digest(config)},
               {"config", config},  {"status", "solver_failure"},  {"error", e.what()}};
      r.exit_code = kExitSolver;
    }
    write_report(r, dir);
    if (r.doc.contains("runs")) print_summary(out, r);
    out << "wrote " << (dir / "report.json").string() << "\n";
    if (r.exit_code != kExitOk && r.doc.contains("error")) err << r.doc["error"].get<std::string>() << "\n";
    return r.exit_code;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << e.what() << "\n";
    return kExitSchema;
  }
}

}  // namespace chebsip::bench
