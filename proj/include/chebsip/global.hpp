#pragma once

#include "chebsip/lowdisc.hpp"
#include "chebsip/sets.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace chebsip {

enum class Strategy { DifferentialEvolution, SimulatedAnnealing, NelderMeadMultistart };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::DifferentialEvolution: return "de";
    case Strategy::SimulatedAnnealing: return "sa";
    case Strategy::NelderMeadMultistart: return "nm";
  }
  return "?";
}

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "de") return Strategy::DifferentialEvolution;
  if (s == "sa") return Strategy::SimulatedAnnealing;
  if (s == "nm") return Strategy::NelderMeadMultistart;
  throw Error(ErrorKind::Schema, "unknown strategy '" + s + "'");
}

struct GlobalConfig {
  Strategy strategy = Strategy::DifferentialEvolution;
  std::uint64_t seed = 1;
  int population = 0;  // 0: 10 per free dimension, at least 8
  long max_evals = 20000;
  // DE, rand-to-best/1/exp; F is dithered per generation in [f_lo, f_hi]
  double de_f_lo = 0.5;
  double de_f_hi = 1.0;
  double de_cr = 0.7;
  double de_tol = 1e-12;  // stop once the population values agree to this (relative)
  // SA: T_k = t0 * (1 + |f(start)|) * cooling^k, k bumped every steps_per_temp proposals
  double sa_t0 = 0.1;
  double sa_cooling = 0.95;
  int sa_steps_per_temp = 20;
  double sa_step = 0.1;  // proposal std as a fraction of box width
  // NM multistart
  int nm_restarts = 20;
  double nm_simplex = 0.05;  // fraction of box width
  double nm_xtol = 1e-10;
  int nm_reinit = 3;
  /// Points injected into the initial population / used as first NM starts.
  std::vector<Vec> seeds;
  int threads = 1;
};

struct GlobalResult {
  Vec u_star;
  double value = -kInf;
  long evals = 0;
  std::vector<std::pair<long, double>> history;  // (eval count, best so far)
  std::vector<double> per_restart;
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t t = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < t; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += t) fn(i);
    });
  for (auto& th : pool) th.join();
}

// Bookkeeping shared by the strategies: unit-cube coordinates over the free
// dimensions of the box, evaluation counting, best-so-far with ties going to
// the earlier evaluation.
class Tracker {
 public:
  Tracker(const std::function<double(const Vec&)>& f, const BoxDomain& box, int threads)
      : f_(f), box_(box), threads_(threads) {
    for (Eigen::Index j = 0; j < box.dim(); ++j)
      if (box.upper()[j] > box.lower()[j]) free_.push_back(j);
  }

  Eigen::Index dim() const { return static_cast<Eigen::Index>(free_.size()); }

  Vec to_box(const Vec& s) const {
    Vec u = box_.lower();
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const Eigen::Index j = free_[k];
      u[j] = box_.lower()[j] + (box_.upper()[j] - box_.lower()[j]) * s[static_cast<Eigen::Index>(k)];
    }
    return box_.clip(u);
  }

  Vec to_unit(const Vec& u) const {
    Vec s(dim());
    for (std::size_t k = 0; k < free_.size(); ++k) {
      const Eigen::Index j = free_[k];
      s[static_cast<Eigen::Index>(k)] = (u[j] - box_.lower()[j]) / (box_.upper()[j] - box_.lower()[j]);
    }
    return s.cwiseMax(0.0).cwiseMin(1.0);
  }

  bool budget_left(long cap) const { return evals_ < cap; }
  long evals() const { return evals_; }

  double eval(const Vec& s) {
    const double v = sanitize(f_(to_box(s)));
    record(s, v);
    return v;
  }

  /// Evaluate a batch (possibly concurrently); bookkeeping in index order.
  std::vector<double> eval_batch(const std::vector<Vec>& pts) {
    std::vector<double> vals(pts.size());
    parallel_for(pts.size(), threads_, [&](std::size_t i) { vals[i] = sanitize(f_(to_box(pts[i]))); });
    for (std::size_t i = 0; i < pts.size(); ++i) record(pts[i], vals[i]);
    return vals;
  }

  GlobalResult result() const {
    GlobalResult r;
    r.u_star = best_s_.size() ? to_box(best_s_) : box_.center();
    r.value = best_;
    r.evals = evals_;
    r.history = history_;
    if (r.history.empty() || r.history.back().first != evals_) r.history.emplace_back(evals_, best_);
    return r;
  }

  double best() const { return best_; }
  const Vec& best_unit() const { return best_s_; }

 private:
  static double sanitize(double v) { return std::isnan(v) ? -kInf : v; }

  void record(const Vec& s, double v) {
    ++evals_;
    if (v > best_ || best_s_.size() == 0) {
      if (v > best_) {
        best_ = v;
        history_.emplace_back(evals_, best_);
      }
      best_s_ = s;
    }
  }

  const std::function<double(const Vec&)>& f_;
  const BoxDomain& box_;
  int threads_;
  std::vector<Eigen::Index> free_;
  long evals_ = 0;
  double best_ = -kInf;
  Vec best_s_;
  std::vector<std::pair<long, double>> history_;
};

inline void differential_evolution(Tracker& tr, const GlobalConfig& cfg, std::mt19937_64& rng) {
  const Eigen::Index d = tr.dim();
  const int np = cfg.population > 0 ? cfg.population : std::max<int>(8, 10 * static_cast<int>(d));
  require(np >= 4, ErrorKind::Precondition, "DE population must be at least 4");
  ScrambledHalton halton(static_cast<std::size_t>(d), derive_seed(cfg.seed, 11));
  std::vector<Vec> pop(static_cast<std::size_t>(np));
  for (int i = 0; i < np; ++i) pop[static_cast<std::size_t>(i)] = halton.point(static_cast<std::uint64_t>(i));
  for (std::size_t i = 0; i < cfg.seeds.size() && i < pop.size(); ++i) pop[i] = tr.to_unit(cfg.seeds[i]);
  std::vector<double> fit = tr.eval_batch(pop);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, np - 1);
  std::uniform_int_distribution<Eigen::Index> start(0, d - 1);
  while (tr.budget_left(cfg.max_evals)) {
    // best member, earliest index on ties
    int ib = 0;
    for (int i = 1; i < np; ++i)
      if (fit[static_cast<std::size_t>(i)] > fit[static_cast<std::size_t>(ib)]) ib = i;
    double lo = kInf;
    for (double v : fit) lo = std::min(lo, v);
    const double hi = fit[static_cast<std::size_t>(ib)];
    if (std::isfinite(lo) && hi - lo <= cfg.de_tol * (1.0 + std::abs(hi))) break;
    const double scale = cfg.de_f_lo + (cfg.de_f_hi - cfg.de_f_lo) * unif(rng);
    const auto batch = static_cast<std::size_t>(std::min<long>(np, cfg.max_evals - tr.evals()));
    std::vector<Vec> trials(batch);
    for (std::size_t c = 0; c < batch; ++c) {
      int r0, r1, r2;
      do r0 = pick(rng); while (r0 == static_cast<int>(c));
      do r1 = pick(rng); while (r1 == static_cast<int>(c) || r1 == r0);
      do r2 = pick(rng); while (r2 == static_cast<int>(c) || r2 == r0 || r2 == r1);
      const Vec& b0 = pop[static_cast<std::size_t>(r0)];
      const Vec bprime = b0 + scale * (pop[static_cast<std::size_t>(ib)] - b0) +
                         scale * (pop[static_cast<std::size_t>(r1)] - pop[static_cast<std::size_t>(r2)]);
      Vec trial = pop[c];
      Eigen::Index fill = start(rng);
      for (Eigen::Index i = 0; i < d; ++i) {
        if (i > 0 && unif(rng) >= cfg.de_cr) break;
        trial[fill] = bprime[fill];
        fill = (fill + 1) % d;
      }
      trials[c] = trial.cwiseMax(0.0).cwiseMin(1.0);
    }
    const std::vector<double> tv = tr.eval_batch(trials);
    for (std::size_t c = 0; c < batch; ++c) {
      if (tv[c] >= fit[c]) {
        pop[c] = trials[c];
        fit[c] = tv[c];
      }
    }
  }
}

inline void simulated_annealing(Tracker& tr, const GlobalConfig& cfg, std::mt19937_64& rng) {
  const Eigen::Index d = tr.dim();
  Vec cur;
  double fc = -kInf;
  if (!cfg.seeds.empty()) {
    for (const Vec& s : cfg.seeds) {
      const Vec su = tr.to_unit(s);
      const double v = tr.eval(su);
      if (cur.size() == 0 || v > fc) {
        cur = su;
        fc = v;
      }
    }
  } else {
    cur = Vec::Constant(d, 0.5);
    fc = tr.eval(cur);
  }
  const double t0 = cfg.sa_t0 * (1.0 + (std::isfinite(fc) ? std::abs(fc) : 0.0));
  std::normal_distribution<double> gauss(0.0, cfg.sa_step);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  long k = 0;
  while (tr.budget_left(cfg.max_evals)) {
    const double temp = t0 * std::pow(cfg.sa_cooling, static_cast<double>(k / std::max(1, cfg.sa_steps_per_temp)));
    Vec prop(d);
    for (Eigen::Index i = 0; i < d; ++i) prop[i] = cur[i] + gauss(rng);
    prop = prop.cwiseMax(0.0).cwiseMin(1.0);
    const double fp = tr.eval(prop);
    const double r = unif(rng);
    if (fp >= fc || (std::isfinite(fp) && temp > 0 && r < std::exp((fp - fc) / temp))) {
      cur = prop;
      fc = fp;
    }
    ++k;
  }
}

// Nelder-Mead maximization in the unit cube (points clipped) from one start.
inline void nelder_mead(Tracker& tr, const GlobalConfig& cfg, Vec start, long budget) {
  const Eigen::Index d = tr.dim();
  const long stop_at = std::min(cfg.max_evals, tr.evals() + budget);
  auto clip = [](const Vec& v) { return Vec(v.cwiseMax(0.0).cwiseMin(1.0)); };
  double best_prev = -kInf;
  for (int round = 0; round <= cfg.nm_reinit && tr.evals() < stop_at; ++round) {
    std::vector<Vec> x(static_cast<std::size_t>(d + 1));
    std::vector<double> fx(static_cast<std::size_t>(d + 1));
    x[0] = clip(start);
    fx[0] = tr.eval(x[0]);
    for (Eigen::Index i = 0; i < d && tr.evals() < stop_at; ++i) {
      Vec v = x[0];
      const double step = v[i] + cfg.nm_simplex <= 1.0 ? cfg.nm_simplex : -cfg.nm_simplex;
      v[i] += step;
      x[static_cast<std::size_t>(i + 1)] = v;
      fx[static_cast<std::size_t>(i + 1)] = tr.eval(v);
    }
    std::vector<std::size_t> order(x.size());
    while (tr.evals() < stop_at) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fx[a] > fx[b]; });
      std::vector<Vec> xs;
      std::vector<double> fs;
      for (std::size_t i : order) {
        xs.push_back(x[i]);
        fs.push_back(fx[i]);
      }
      x = xs;
      fx = fs;
      double size = 0.0;
      for (std::size_t i = 1; i < x.size(); ++i) size = std::max(size, (x[i] - x[0]).cwiseAbs().maxCoeff());
      if (size <= cfg.nm_xtol) break;
      const std::size_t w = x.size() - 1;
      Vec cen = Vec::Zero(d);
      for (std::size_t i = 0; i < w; ++i) cen += x[i];
      cen /= static_cast<double>(w);
      const Vec xr = clip(cen + (cen - x[w]));
      const double fr = tr.eval(xr);
      if (fr > fx[0]) {
        if (tr.evals() >= stop_at) {
          x[w] = xr;
          fx[w] = fr;
          break;
        }
        const Vec xe = clip(cen + 2.0 * (cen - x[w]));
        const double fe = tr.eval(xe);
        if (fe > fr) {
          x[w] = xe;
          fx[w] = fe;
        } else {
          x[w] = xr;
          fx[w] = fr;
        }
      } else if (fr > fx[w - 1]) {
        x[w] = xr;
        fx[w] = fr;
      } else {
        if (tr.evals() >= stop_at) break;
        const bool outside = fr > fx[w];
        const Vec xc = outside ? Vec(cen + 0.5 * (xr - cen)) : Vec(cen + 0.5 * (x[w] - cen));
        const double fcv = tr.eval(xc);
        if (fcv > std::max(fr, fx[w]) || (outside && fcv >= fr)) {
          x[w] = xc;
          fx[w] = fcv;
        } else {
          for (std::size_t i = 1; i < x.size() && tr.evals() < stop_at; ++i) {
            x[i] = x[0] + 0.5 * (x[i] - x[0]);
            fx[i] = tr.eval(x[i]);
          }
        }
      }
    }
    std::size_t ib = 0;
    for (std::size_t i = 1; i < x.size(); ++i)
      if (fx[i] > fx[ib]) ib = i;
    start = x[ib];
    if (!(fx[ib] > best_prev)) break;
    best_prev = fx[ib];
  }
}

inline void nm_multistart(Tracker& tr, const GlobalConfig& cfg) {
  const Eigen::Index d = tr.dim();
  std::vector<Vec> starts;
  for (const Vec& s : cfg.seeds) starts.push_back(tr.to_unit(s));
  ScrambledHalton halton(static_cast<std::size_t>(d), derive_seed(cfg.seed, 13));
  for (int i = 0; static_cast<int>(starts.size()) < std::max<int>(1, cfg.nm_restarts); ++i)
    starts.push_back(halton.point(static_cast<std::uint64_t>(i)));
  const long per = std::max<long>(d + 2, cfg.max_evals / static_cast<long>(starts.size()));
  for (const Vec& s : starts) {
    if (!tr.budget_left(cfg.max_evals)) break;
    nelder_mead(tr, cfg, s, per);
  }
}

}  // namespace detail

/// Maximize f over the box. Degenerate box dimensions stay fixed.
inline GlobalResult maximize_box(const std::function<double(const Vec&)>& f, const BoxDomain& box,
                                 const GlobalConfig& cfg) {
  require(box.bounded(), ErrorKind::Precondition, "global search needs a bounded box");
  require(cfg.max_evals >= 1, ErrorKind::Precondition, "max_evals must be positive");
  detail::Tracker tr(f, box, cfg.threads);
  if (tr.dim() == 0) {
    tr.eval(Vec(0));
  } else {
    std::mt19937_64 rng(derive_seed(cfg.seed, 0));
    switch (cfg.strategy) {
      case Strategy::DifferentialEvolution: {
        const int np = cfg.population > 0 ? cfg.population : std::max<int>(8, 10 * static_cast<int>(tr.dim()));
        require(cfg.max_evals >= np, ErrorKind::Precondition, "max_evals must be at least the population");
        detail::differential_evolution(tr, cfg, rng);
        break;
      }
      case Strategy::SimulatedAnnealing: detail::simulated_annealing(tr, cfg, rng); break;
      case Strategy::NelderMeadMultistart: detail::nm_multistart(tr, cfg); break;
    }
  }
  GlobalResult r = tr.result();
  require(r.value > -kInf, ErrorKind::SolverFailure, "every evaluation was infeasible");
  r.per_restart = {r.value};
  return r;
}

/// Best of `restarts` runs with derived seeds; ties go to the earlier run.
inline GlobalResult maximize_with_restarts(const std::function<double(const Vec&)>& f, const BoxDomain& box,
                                           const GlobalConfig& cfg, int restarts) {
  require(restarts >= 1, ErrorKind::Precondition, "restarts must be at least 1");
  GlobalResult best;
  long offset = 0;
  for (int r = 0; r < restarts; ++r) {
    GlobalConfig c = cfg;
    c.seed = r == 0 ? cfg.seed : derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(r));
    const GlobalResult g = maximize_box(f, box, c);
    best.per_restart.push_back(g.value);
    const bool improve = r == 0 || g.value > best.value;
    if (improve) {
      best.u_star = g.u_star;
      best.value = g.value;
    }
    for (const auto& [e, v] : g.history) {
      const double run_best = best.history.empty() ? v : std::max(v, best.history.back().second);
      if (best.history.empty() || run_best > best.history.back().second)
        best.history.emplace_back(offset + e, run_best);
    }
    offset += g.evals;
  }
  best.evals = offset;
  best.history.emplace_back(offset, best.value);
  return best;
}

}  // namespace chebsip
