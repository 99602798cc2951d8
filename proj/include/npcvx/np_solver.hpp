#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "npcvx/classical_np.hpp"
#include "npcvx/errors.hpp"
#include "npcvx/measure.hpp"
#include "npcvx/numeric.hpp"
#include "npcvx/risk.hpp"
#include "npcvx/simplex.hpp"

namespace npcvx {

enum class SolveStrategy { automatic, lp, subgradient };

inline const char* strategy_name(SolveStrategy s) {
  switch (s) {
    case SolveStrategy::automatic: return "auto";
    case SolveStrategy::lp: return "lp";
    case SolveStrategy::subgradient: return "subgradient";
  }
  return "?";
}

struct SolverOptions {
  SolveStrategy strategy = SolveStrategy::automatic;
  double tol = 0.0;  // 0 -> per-strategy default (1e-6 lp, 1e-4 subgradient)
  long max_iters = 100000;
  unsigned seed = 0;  // seeds randomized restarts
  int restarts = 0;
};

inline double default_certificate_tol(SolveStrategy used) {
  return used == SolveStrategy::lp ? 1e-6 : 1e-4;
}
inline double default_feasibility_tol(SolveStrategy used) {
  return used == SolveStrategy::lp ? 1e-9 : 1e-6;
}

// Below this, gamma_alpha is treated as zero: x* = k2 Q*-a.e., z = 0, and the
// P*-side certificates are not applicable.
inline constexpr double kTrivialGamma = 1e-6;

/// The generalized Neyman-Pearson problem: minimize rho2(k2 - X) over
/// {k1 <= X <= k2, rho1(X) <= alpha}.
struct ProblemSpec {
  SampleSpace space;
  ConvexExpectation rho1;
  ConvexExpectation rho2;
  RandomVariable k1;
  RandomVariable k2;
  double alpha = 0.0;

  /// Rejects malformed boxes and alpha below rho1(k1). alpha above rho1(k2)
  /// is allowed and short-circuits to the trivial solution X* = k2.
  void validate() const {
    const std::size_t n = space.size();
    check_dims(n, rho1.dim(), "rho1");
    check_dims(n, rho2.dim(), "rho2");
    check_dims(n, k1.size(), "k1");
    check_dims(n, k2.size(), "k2");
    bool some_free = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(k1.values[i]) || !std::isfinite(k2.values[i]))
        throw Error(errc::invalid_argument, "non-finite bound");
      if (k1.values[i] < -1e-12)
        throw Error(errc::invalid_argument, "k1 must be >= 0");
      if (k1.values[i] > k2.values[i] + 1e-12)
        throw Error(errc::invalid_argument, "k1 > k2 at atom " + std::to_string(i));
      if (k2.values[i] - k1.values[i] > 1e-12) some_free = true;
    }
    if (!some_free) throw Error(errc::invalid_argument, "k1 = k2 everywhere");
    const double lo = evaluate(space, rho1, k1);
    if (alpha < lo - 1e-9)
      throw Error(errc::infeasible_spec, "alpha = " + std::to_string(alpha) + " below rho1(k1) = " +
                                             std::to_string(lo) + " (standing assumption rho1(K1) <= alpha)");
  }
};

struct Residual {
  double value = 0.0;
  bool applicable = true;
  std::string reason;  // set when not applicable

  static Residual not_applicable(std::string why) { return Residual{0.0, false, std::move(why)}; }
};

struct CertificateReport {
  Residual primal_feasibility;
  Residual q_attainment;
  Residual q_saddle;
  Residual alpha_tightness;
  Residual p_attainment;
  Residual p_saddle;
  Residual minimax_gap;
  Residual structure_violation;

  double max_applicable() const {
    double m = 0.0;
    for (const Residual* r : {&primal_feasibility, &q_attainment, &q_saddle, &alpha_tightness,
                              &p_attainment, &p_saddle, &minimax_gap, &structure_violation})
      if (r->applicable) m = std::max(m, r->value);
    return m;
  }
  bool pass(double tol) const { return max_applicable() <= tol; }
};

struct Solution {
  RandomVariable x_star;
  double beta = 0.0;
  double gamma_alpha = 0.0;
  Supergradient q_star;
  std::optional<Supergradient> p_star;
  double z = 0.0;
  std::map<std::size_t, double> boundary_values;
  CertificateReport certificates;
  SolveStrategy strategy_used = SolveStrategy::lp;
  long iterations = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline RandomVariable rv_sub(const RandomVariable& a, const RandomVariable& b) {
  RandomVariable out;
  out.values.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] - b.values[i];
  return out;
}

inline RandomVariable rv_add(const RandomVariable& a, const RandomVariable& b) {
  RandomVariable out;
  out.values.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out.values[i] = a.values[i] + b.values[i];
  return out;
}

inline RandomVariable rv_clip(const RandomVariable& x, const RandomVariable& lo, const RandomVariable& hi) {
  RandomVariable out;
  out.values.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.values[i] = clamp(x.values[i], lo.values[i], hi.values[i]);
  return out;
}

inline double box_span(const RandomVariable& lo, const RandomVariable& hi) {
  double m = 0.0;
  for (std::size_t i = 0; i < lo.size(); ++i) m = std::max(m, hi.values[i] - lo.values[i]);
  return m;
}

struct BoxMinResult {
  RandomVariable x;
  double value = 0.0;
  long iterations = 0;
};

/// Projected subgradient over a box: diminishing steps eta0/sqrt(t) with
/// best-iterate tracking, then a monotone backtracking polish from the best
/// point. The polish only ever improves the objective; on nonsmooth instances
/// it stops at the first step with no sufficient decrease.
template <class ValueFn, class GradFn>
BoxMinResult box_minimize(const RandomVariable& lo, const RandomVariable& hi, RandomVariable x0,
                          ValueFn&& value, GradFn&& grad, long cap, double eta0) {
  BoxMinResult res;
  RandomVariable x = rv_clip(x0, lo, hi);
  RandomVariable best = x;
  double best_val = value(x);
  long since_improve = 0;

  const long stall_window = 400;
  std::vector<double> g;
  for (long t = 1; t <= cap; ++t) {
    g = grad(x);
    const double eta = eta0 / std::sqrt(static_cast<double>(t));
    RandomVariable xn;
    xn.values.resize(x.size());
    bool moved = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      xn.values[i] = clamp(x.values[i] - eta * g[i], lo.values[i], hi.values[i]);
      moved |= xn.values[i] != x.values[i];
    }
    ++res.iterations;
    if (!moved) break;  // stationary (projected step vanished)
    x = std::move(xn);
    const double v = value(x);
    if (v < best_val - 1e-15) {
      best_val = v;
      best = x;
      since_improve = 0;
    } else if (++since_improve >= stall_window) {
      break;
    }
  }

  // Backtracking polish.
  double step = eta0;
  for (long t = 0; t < 3000; ++t) {
    g = grad(best);
    bool accepted = false;
    while (step >= 1e-16) {
      RandomVariable xn;
      xn.values.resize(best.size());
      double move2 = 0.0;
      for (std::size_t i = 0; i < best.size(); ++i) {
        xn.values[i] = clamp(best.values[i] - step * g[i], lo.values[i], hi.values[i]);
        const double d = xn.values[i] - best.values[i];
        move2 += d * d;
      }
      if (move2 == 0.0) break;
      const double v = value(xn);
      ++res.iterations;
      if (v <= best_val - 1e-4 * move2 / step) {
        best = std::move(xn);
        best_val = v;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    step = std::min(step * 2.0, 1e6 * eta0);
  }

  res.x = std::move(best);
  res.value = best_val;
  return res;
}

/// Point on the segment [feas, infeas] where rho1 crosses alpha (feasible
/// side). When the penalized minimizer jumps across the constraint at the
/// critical multiplier, the optimum lies on this segment, so this recovers it.
inline std::optional<RandomVariable> alpha_combo(const SampleSpace& space, const ConvexExpectation& rho1,
                                                 double alpha, const RandomVariable& feas,
                                                 const RandomVariable& infeas) {
  auto at = [&](double lam) {
    RandomVariable x;
    x.values.resize(feas.size());
    for (std::size_t i = 0; i < feas.size(); ++i)
      x.values[i] = (1.0 - lam) * feas.values[i] + lam * infeas.values[i];
    return x;
  };
  if (evaluate(space, rho1, feas) - alpha > 0.0) return std::nullopt;
  if (evaluate(space, rho1, infeas) - alpha <= 0.0) return std::nullopt;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    const double mid = 0.5 * (lo + hi);
    (evaluate(space, rho1, at(mid)) > alpha ? hi : lo) = mid;
  }
  return at(lo);
}

/// Shift x by the constant that makes rho1(clip(x + t)) = alpha exactly
/// (bisection on t; the map is nondecreasing by monotonicity and cash
/// invariance). Used to pin the active significance constraint after an
/// iterative solve.
inline RandomVariable tighten_alpha(const SampleSpace& space, const ConvexExpectation& rho1, double alpha,
                                    const RandomVariable& k1, const RandomVariable& k2,
                                    const RandomVariable& x) {
  const double r0 = evaluate(space, rho1, x) - alpha;
  if (std::fabs(r0) <= 1e-13) return x;
  const double span = box_span(k1, k2);
  double lo = r0 > 0 ? -span : 0.0;
  double hi = r0 > 0 ? 0.0 : span;
  auto h = [&](double t) {
    RandomVariable shifted = x;
    for (double& v : shifted.values) v += t;
    return evaluate(space, rho1, rv_clip(shifted, k1, k2)) - alpha;
  };
  if (r0 > 0 && h(lo) > 0.0) return rv_clip(x, k1, k2);  // cannot reach alpha inside the box
  if (r0 < 0 && h(hi) < 0.0) return k2;
  for (int it = 0; it < 200 && hi - lo > 1e-18; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = h(mid);
    if (std::fabs(v) <= 1e-15) {
      lo = hi = mid;
      break;
    }
    (v > 0.0 ? hi : lo) = mid;
  }
  // Land on the feasible side.
  const double t = h(lo) <= 1e-13 ? lo : hi;
  RandomVariable shifted = x;
  for (double& v : shifted.values) v += t;
  return rv_clip(shifted, k1, k2);
}

struct LinearMinResult {
  RandomVariable x;
  double value = 0.0;  // min of E_q[k2 - X] over X_alpha
};

/// Exact or high-accuracy minimization of the linear functional E_q[k2 - X]
/// over the feasible set X_alpha = {k1 <= X <= k2, rho1(X) <= alpha}. This is
/// the independent inner solve behind gamma_alpha and the Q*-saddle residual.
inline LinearMinResult min_linear_over_alpha_set(const SampleSpace& space, const ConvexExpectation& rho1,
                                                 double alpha, const RandomVariable& k1,
                                                 const RandomVariable& k2, const Density& q,
                                                 long iter_cap = 100000) {
  const std::size_t n = space.size();
  if (evaluate(space, rho1, k2) <= alpha + 1e-12)
    return LinearMinResult{k2, 0.0};

  if (!rho1.is_entropic()) {
    const auto& gens = rho1.as_finitely_generated().generators;
    if (gens.size() == 1) {
      // One budget row: reflect the box (X' = k1 + k2 - X) so the constraint
      // becomes a min_cost_test budget.
      const auto& g0 = gens.front();
      const double b =
          std::max(0.0, alpha + g0.penalty - expectation(space, g0.density, k1));
      const RandomVariable xr = min_cost_test(space, q, g0.density, b, k1, k2);
      RandomVariable x = rv_sub(rv_add(k1, k2), xr);
      const double val = expectation(space, q, rv_sub(k2, x));
      return LinearMinResult{std::move(x), val};
    }
    // Several generator rows: a small LP on y = X - k1.
    LpProblem lp;
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < n; ++i)
      if (k2.values[i] - k1.values[i] > 1e-14) free_idx.push_back(i);
    const std::size_t nf = free_idx.size();
    lp.c.resize(nf);
    for (std::size_t a = 0; a < nf; ++a)
      lp.c[a] = -space.weights[free_idx[a]] * q.values[free_idx[a]];  // max E_q[y]
    for (const auto& g : gens) {
      LpRow row;
      row.a.resize(nf);
      for (std::size_t a = 0; a < nf; ++a)
        row.a[a] = space.weights[free_idx[a]] * g.density.values[free_idx[a]];
      row.rel = LpRel::le;
      row.b = alpha + g.penalty - expectation(space, g.density, k1);
      lp.rows.push_back(std::move(row));
    }
    for (std::size_t a = 0; a < nf; ++a) {
      LpRow row;
      row.a.assign(nf, 0.0);
      row.a[a] = 1.0;
      row.rel = LpRel::le;
      row.b = k2.values[free_idx[a]] - k1.values[free_idx[a]];
      lp.rows.push_back(std::move(row));
    }
    const LpResult res = solve_lp(lp);
    if (res.status != LpStatus::optimal)
      throw Error(errc::infeasible_spec, "inner LP not solvable (alpha below rho1(k1)?)");
    RandomVariable x = k1;
    for (std::size_t a = 0; a < nf; ++a) x.values[free_idx[a]] += res.x[a];
    const double val = expectation(space, q, rv_sub(k2, x));
    return LinearMinResult{std::move(x), val};
  }

  // Entropic constraint: penalized formulation with a multiplier search,
  // E_q[k2 - X] + kappa * rho1(X) over the box.
  auto inner = [&](double kappa, const RandomVariable& start) {
    auto value = [&](const RandomVariable& x) {
      return expectation(space, q, rv_sub(k2, x)) + kappa * evaluate(space, rho1, x);
    };
    auto grad = [&](const RandomVariable& x) {
      const Supergradient sp = supergradient(space, rho1, x);
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i)
        g[i] = space.weights[i] * (-q.values[i] + kappa * sp.density.values[i]);
      return g;
    };
    return box_minimize(k1, k2, start, value, grad, iter_cap, std::max(1e-3, box_span(k1, k2)));
  };

  RandomVariable start;
  start.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) start.values[i] = 0.5 * (k1.values[i] + k2.values[i]);

  double kappa_hi = 1.0;
  BoxMinResult probe = inner(kappa_hi, start);
  int grow = 0;
  while (evaluate(space, rho1, probe.x) > alpha + 1e-12 && grow++ < 60) {
    kappa_hi *= 2.0;
    probe = inner(kappa_hi, probe.x);
  }
  double kappa_lo = 0.0;
  RandomVariable feas_x = probe.x;
  RandomVariable infeas_x = k2;  // the kappa = 0 minimizer, infeasible here
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (kappa_lo + kappa_hi);
    probe = inner(mid, probe.x);
    const double r = evaluate(space, rho1, probe.x);
    if (r <= alpha + 1e-12) {
      kappa_hi = mid;
      feas_x = probe.x;
    } else {
      kappa_lo = mid;
      infeas_x = probe.x;
    }
    if (std::fabs(r - alpha) <= 1e-9) {
      if (r <= alpha + 1e-12) break;
    }
    if (kappa_hi - kappa_lo <= 1e-13 * std::max(1.0, kappa_hi)) break;
  }

  RandomVariable x = tighten_alpha(space, rho1, alpha, k1, k2, feas_x);
  double val = expectation(space, q, rv_sub(k2, x));
  if (auto combo = alpha_combo(space, rho1, alpha, feas_x, infeas_x)) {
    const double vc = expectation(space, q, rv_sub(k2, *combo));
    if (vc < val && evaluate(space, rho1, *combo) <= alpha + 1e-9) {
      x = std::move(*combo);
      val = vc;
    }
  }
  return LinearMinResult{std::move(x), val};
}

struct PrimalDetail {
  RandomVariable x;
  double beta = 0.0;
  std::optional<Supergradient> q_dual;  // from LP multipliers (strategy A only)
  std::optional<Supergradient> p_dual;
  double kappa = 0.0;
  long iterations = 0;
};

/// Trust-region cutting-plane refinement for mixed families (one side
/// finitely generated, one entropic). The polyhedral side enters the LP
/// exactly (epigraph or generator rows); the smooth side enters through
/// gradient cuts accumulated at visited points. Plain subgradient steps
/// zigzag on the kink where several generators tie, which is exactly where
/// these optima live, so this refinement closes the last few digits.
inline RandomVariable cutting_plane_refine(const ProblemSpec& spec, const RandomVariable& x0,
                                           int max_rounds = 250) {
  const std::size_t n = spec.space.size();
  const bool obj_smooth = spec.rho2.is_entropic();
  const bool con_smooth = spec.rho1.is_entropic();

  auto objective = [&](const RandomVariable& x) {
    return evaluate(spec.space, spec.rho2, rv_sub(spec.k2, x));
  };
  auto obj_grad = [&](const RandomVariable& x) {
    const Supergradient s = supergradient(spec.space, spec.rho2, rv_sub(spec.k2, x));
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = -spec.space.weights[i] * s.density.values[i];
    return g;
  };
  auto con_grad = [&](const RandomVariable& x) {
    const Supergradient s = supergradient(spec.space, spec.rho1, x);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = spec.space.weights[i] * s.density.values[i];
    return g;
  };
  auto repair = [&](const RandomVariable& x) {
    return con_smooth && evaluate(spec.space, spec.rho1, x) > spec.alpha
               ? tighten_alpha(spec.space, spec.rho1, spec.alpha, spec.k1, spec.k2, x)
               : x;
  };

  struct Cut {
    std::vector<double> a;  // in x coordinates
    double b = 0.0;
  };
  std::vector<Cut> obj_cuts, con_cuts;  // t >= a'x + b   /   a'x <= b
  auto add_obj_cut = [&](const RandomVariable& x) {
    if (!obj_smooth) return;
    Cut c{obj_grad(x), 0.0};
    c.b = objective(x);
    for (std::size_t i = 0; i < n; ++i) c.b -= c.a[i] * x.values[i];
    obj_cuts.push_back(std::move(c));
    if (obj_cuts.size() > 80) obj_cuts.erase(obj_cuts.begin());
  };
  auto add_con_cut = [&](const RandomVariable& x) {
    if (!con_smooth) return;
    Cut c{con_grad(x), 0.0};
    c.b = spec.alpha - evaluate(spec.space, spec.rho1, x);
    for (std::size_t i = 0; i < n; ++i) c.b += c.a[i] * x.values[i];
    con_cuts.push_back(std::move(c));
    if (con_cuts.size() > 80) con_cuts.erase(con_cuts.begin());
  };

  RandomVariable inc = repair(rv_clip(x0, spec.k1, spec.k2));
  double f_inc = objective(inc);
  double trust = box_span(spec.k1, spec.k2);
  const double span = trust;

  for (int round = 0; round < max_rounds && trust > 1e-13; ++round) {
    add_obj_cut(inc);
    add_con_cut(inc);

    // LP in y = x - k1 (n vars) plus t = t+ - t- for the objective value.
    LpProblem lp;
    lp.c.assign(n + 2, 0.0);
    lp.c[n] = 1.0;
    lp.c[n + 1] = -1.0;
    auto linear_row = [&](const std::vector<double>& ax, double t_coef, LpRel rel, double rhs) {
      LpRow row;
      row.a.assign(n + 2, 0.0);
      double b = rhs;
      for (std::size_t i = 0; i < n; ++i) {
        row.a[i] = ax[i];
        b -= ax[i] * spec.k1.values[i];
      }
      row.a[n] = t_coef;
      row.a[n + 1] = -t_coef;
      row.rel = rel;
      row.b = b;
      lp.rows.push_back(std::move(row));
    };

    if (obj_smooth) {
      for (const Cut& c : obj_cuts) linear_row(c.a, -1.0, LpRel::le, -c.b);  // a'x - t <= -b
    } else {
      for (const auto& g : spec.rho2.as_finitely_generated().generators) {
        // t >= E_g[k2 - x] - c  <=>  -E_g[x] - t <= c - E_g[k2]
        std::vector<double> a(n);
        double rhs = g.penalty;
        for (std::size_t i = 0; i < n; ++i) {
          a[i] = -spec.space.weights[i] * g.density.values[i];
          rhs -= spec.space.weights[i] * g.density.values[i] * spec.k2.values[i];
        }
        linear_row(a, -1.0, LpRel::le, rhs);
      }
    }
    if (con_smooth) {
      for (const Cut& c : con_cuts) linear_row(c.a, 0.0, LpRel::le, c.b);
    } else {
      for (const auto& g : spec.rho1.as_finitely_generated().generators) {
        std::vector<double> a(n);
        for (std::size_t i = 0; i < n; ++i) a[i] = spec.space.weights[i] * g.density.values[i];
        linear_row(a, 0.0, LpRel::le, spec.alpha + g.penalty);
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> a(n, 0.0);
      a[i] = 1.0;
      const double lo = std::max(spec.k1.values[i], inc.values[i] - trust);
      const double hi = std::min(spec.k2.values[i], inc.values[i] + trust);
      linear_row(a, 0.0, LpRel::le, hi);
      std::vector<double> am(n, 0.0);
      am[i] = -1.0;
      linear_row(am, 0.0, LpRel::le, -lo);
    }

    const LpResult res = solve_lp(lp);
    if (res.status != LpStatus::optimal) break;
    RandomVariable x_lp;
    x_lp.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) x_lp.values[i] = res.x[i] + spec.k1.values[i];
    const double t_lp = res.value;

    const RandomVariable x_try = repair(x_lp);
    const double f_try = objective(x_try);
    const bool feasible = evaluate(spec.space, spec.rho1, x_try) <= spec.alpha + 1e-9;
    if (feasible && f_try < f_inc - 1e-15) {
      inc = x_try;
      f_inc = f_try;
      trust = std::min(trust * 1.6, span);
    } else {
      add_obj_cut(x_lp);
      add_con_cut(x_lp);
      trust *= 0.5;
    }
    if (trust >= span * 0.999 && t_lp >= f_inc - 1e-13) break;  // certified at full region
  }
  return inc;
}

struct BoxClasses {
  std::vector<std::size_t> interior, upper, lower;
};

inline BoxClasses classify_box(const RandomVariable& x, const RandomVariable& k1,
                               const RandomVariable& k2, double tol) {
  BoxClasses c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (k2.values[i] - k1.values[i] <= 1e-12) continue;  // pinned: imposes nothing
    if (x.values[i] - k1.values[i] <= tol)
      c.lower.push_back(i);
    else if (k2.values[i] - x.values[i] <= tol)
      c.upper.push_back(i);
    else
      c.interior.push_back(i);
  }
  return c;
}

/// When rho2 is finitely generated and the primal came from the iterative
/// path, the representing Q* is generally a mixture of the generators active
/// at k2 - x*. The stationarity conditions of the primal at x* (interior
/// atoms: H = kappa*G; upper: H >= kappa*G; lower: H <= kappa*G) pin the
/// mixture down to a small feasibility LP over (lambda, kappa).
/// Elastic stationarity system: each row may be violated at L1 cost, so an
/// O(eps)-inaccurate iterate still yields the best-fitting multipliers. The
/// caller rejects fits whose total violation is out of scale.
struct StationarityFit {
  std::vector<double> weights;  // multipliers on the active generators
  double violation = kInf;      // total L1 row violation
};

inline StationarityFit solve_stationarity(const std::vector<std::vector<double>>& rows,
                                          const std::vector<LpRel>& rels, const std::vector<double>& rhs,
                                          std::size_t nvars, const std::vector<double>& var_cost) {
  // vars: structural (nvars), then one or two slacks per row
  LpProblem lp;
  lp.c = var_cost;
  std::size_t ncols = nvars;
  std::vector<std::pair<std::size_t, std::size_t>> slack_cols;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rels[r] == LpRel::eq)
      slack_cols.push_back({ncols, ncols + 1}), ncols += 2;
    else
      slack_cols.push_back({ncols, SIZE_MAX}), ncols += 1;
  }
  lp.c.resize(ncols, 1.0);  // violations cost 1 apiece
  for (std::size_t r = 0; r < rows.size(); ++r) {
    LpRow row;
    row.a.assign(ncols, 0.0);
    for (std::size_t j = 0; j < nvars; ++j) row.a[j] = rows[r][j];
    if (rels[r] == LpRel::eq) {
      row.a[slack_cols[r].first] = 1.0;    // e+
      row.a[slack_cols[r].second] = -1.0;  // e-
    } else if (rels[r] == LpRel::le) {
      row.a[slack_cols[r].first] = -1.0;  // allowance to exceed
    } else {
      row.a[slack_cols[r].first] = 1.0;
    }
    row.rel = rels[r];
    row.b = rhs[r];
    lp.rows.push_back(std::move(row));
  }
  const LpResult res = solve_lp(lp);
  StationarityFit fit;
  if (res.status != LpStatus::optimal) return fit;
  fit.weights.assign(res.x.begin(), res.x.begin() + nvars);
  fit.violation = 0.0;
  for (std::size_t j = nvars; j < ncols; ++j) fit.violation += res.x[j];
  return fit;
}

inline std::optional<Supergradient> fg_mixture_q_star(const ProblemSpec& spec, const RandomVariable& x,
                                                      const Density& g_rho1, double cls_tol) {
  const auto& gens = spec.rho2.as_finitely_generated().generators;
  const RandomVariable loss = rv_sub(spec.k2, x);
  const double val = evaluate(spec.space, spec.rho2, loss);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < gens.size(); ++j)
    if (std::fabs(expectation(spec.space, gens[j].density, loss) - gens[j].penalty - val) <= cls_tol)
      active.push_back(j);
  if (active.empty()) return std::nullopt;

  const BoxClasses cls = classify_box(x, spec.k1, spec.k2, cls_tol);
  const std::size_t na = active.size();
  // vars: lambda_a (na), kappa; rows: simplex + stationarity per atom
  std::vector<std::vector<double>> rows;
  std::vector<LpRel> rels;
  std::vector<double> rhs;
  {
    std::vector<double> r(na + 1, 1.0);
    r[na] = 0.0;
    rows.push_back(std::move(r));
    rels.push_back(LpRel::eq);
    rhs.push_back(1.0);
  }
  auto add_row = [&](std::size_t i, LpRel rel) {
    std::vector<double> r(na + 1, 0.0);
    for (std::size_t a = 0; a < na; ++a) r[a] = gens[active[a]].density.values[i];
    r[na] = -g_rho1.values[i];
    rows.push_back(std::move(r));
    rels.push_back(rel);
    rhs.push_back(0.0);
  };
  for (std::size_t i : cls.interior) add_row(i, LpRel::eq);
  for (std::size_t i : cls.upper) add_row(i, LpRel::ge);
  for (std::size_t i : cls.lower) add_row(i, LpRel::le);

  std::vector<double> cost(na + 1, 0.0);
  const StationarityFit fit = solve_stationarity(rows, rels, rhs, na + 1, cost);
  if (fit.weights.empty() || fit.violation > 1e-3 * (1.0 + static_cast<double>(spec.space.size())))
    return std::nullopt;
  std::vector<double> qd(spec.space.size(), 0.0);
  double pen = 0.0, lam_sum = 0.0;
  for (std::size_t a = 0; a < na; ++a) lam_sum += fit.weights[a];
  if (lam_sum <= 1e-12) return std::nullopt;
  for (std::size_t a = 0; a < na; ++a) {
    const double w = fit.weights[a] / lam_sum;
    pen += w * gens[active[a]].penalty;
    for (std::size_t i = 0; i < spec.space.size(); ++i)
      qd[i] += w * gens[active[a]].density.values[i];
  }
  return Supergradient{Density{std::move(qd)}, pen};
}

/// Mirror image for rho1 finitely generated: the multipliers nu on the active
/// significance generators satisfy the same stationarity system against
/// H_{Q*}, and P* = sum nu P_m / sum nu.
inline std::optional<Supergradient> fg_mixture_p_star(const ProblemSpec& spec, const RandomVariable& x,
                                                      const Density& h_qstar, double cls_tol) {
  const auto& gens = spec.rho1.as_finitely_generated().generators;
  const double val = evaluate(spec.space, spec.rho1, x);
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < gens.size(); ++j)
    if (std::fabs(expectation(spec.space, gens[j].density, x) - gens[j].penalty - val) <= cls_tol)
      active.push_back(j);
  if (active.empty()) return std::nullopt;

  const BoxClasses cls = classify_box(x, spec.k1, spec.k2, cls_tol);
  const std::size_t na = active.size();
  std::vector<std::vector<double>> rows;
  std::vector<LpRel> rels;
  std::vector<double> rhs;
  auto add_row = [&](std::size_t i, LpRel rel) {
    std::vector<double> r(na, 0.0);
    for (std::size_t a = 0; a < na; ++a) r[a] = gens[active[a]].density.values[i];
    rows.push_back(std::move(r));
    rels.push_back(rel);
    rhs.push_back(h_qstar.values[i]);
  };
  for (std::size_t i : cls.interior) add_row(i, LpRel::eq);
  for (std::size_t i : cls.upper) add_row(i, LpRel::le);
  for (std::size_t i : cls.lower) add_row(i, LpRel::ge);

  std::vector<double> cost(na, 0.0);
  const StationarityFit fit = solve_stationarity(rows, rels, rhs, na, cost);
  if (fit.weights.empty() || fit.violation > 1e-3 * (1.0 + static_cast<double>(spec.space.size())))
    return std::nullopt;
  double kappa = 0.0;
  for (double v : fit.weights) kappa += v;
  if (kappa <= 1e-12) return std::nullopt;
  std::vector<double> pd(spec.space.size(), 0.0);
  double pen = 0.0;
  for (std::size_t a = 0; a < na; ++a) {
    pen += fit.weights[a] / kappa * gens[active[a]].penalty;
    for (std::size_t i = 0; i < spec.space.size(); ++i)
      pd[i] += fit.weights[a] / kappa * gens[active[a]].density.values[i];
  }
  return Supergradient{Density{std::move(pd)}, pen};
}

/// Strategy A: epigraph LP for two finitely generated families, solved by the
/// dense simplex; Q* and (when the significance rows bind) P* are assembled
/// from the dual multipliers.
inline PrimalDetail solve_primal_lp(const ProblemSpec& spec) {
  const std::size_t n = spec.space.size();
  const auto& gens2 = spec.rho2.as_finitely_generated().generators;
  const auto& gens1 = spec.rho1.as_finitely_generated().generators;

  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < n; ++i)
    if (spec.k2.values[i] - spec.k1.values[i] > 1e-14) free_idx.push_back(i);
  const std::size_t nf = free_idx.size();

  // Variables: y_a = X - k1 on free atoms, then t = t_pos - t_neg.
  LpProblem lp;
  lp.c.assign(nf + 2, 0.0);
  lp.c[nf] = 1.0;
  lp.c[nf + 1] = -1.0;

  const RandomVariable range = rv_sub(spec.k2, spec.k1);
  for (const auto& g : gens2) {
    LpRow row;
    row.a.assign(nf + 2, 0.0);
    for (std::size_t a = 0; a < nf; ++a)
      row.a[a] = spec.space.weights[free_idx[a]] * g.density.values[free_idx[a]];
    row.a[nf] = 1.0;
    row.a[nf + 1] = -1.0;
    row.rel = LpRel::ge;
    row.b = expectation(spec.space, g.density, range) - g.penalty;
    lp.rows.push_back(std::move(row));
  }
  for (const auto& g : gens1) {
    LpRow row;
    row.a.assign(nf + 2, 0.0);
    for (std::size_t a = 0; a < nf; ++a)
      row.a[a] = spec.space.weights[free_idx[a]] * g.density.values[free_idx[a]];
    row.rel = LpRel::le;
    row.b = spec.alpha + g.penalty - expectation(spec.space, g.density, spec.k1);
    lp.rows.push_back(std::move(row));
  }
  for (std::size_t a = 0; a < nf; ++a) {
    LpRow row;
    row.a.assign(nf + 2, 0.0);
    row.a[a] = 1.0;
    row.rel = LpRel::le;
    row.b = range.values[free_idx[a]];
    lp.rows.push_back(std::move(row));
  }

  const LpResult res = solve_lp(lp);
  if (res.status == LpStatus::infeasible)
    throw Error(errc::infeasible_spec, "primal LP infeasible (alpha below rho1(k1)?)");
  if (res.status != LpStatus::optimal) throw Error(errc::no_convergence, "primal LP did not solve");

  PrimalDetail out;
  out.iterations = res.iterations;
  out.x = spec.k1;
  for (std::size_t a = 0; a < nf; ++a) out.x.values[free_idx[a]] += res.x[a];
  out.beta = res.value;

  // Multipliers on the epigraph rows mix the rho2 generators into Q*.
  std::vector<double> lambda(gens2.size());
  double lam_sum = 0.0;
  for (std::size_t j = 0; j < gens2.size(); ++j) {
    lambda[j] = std::max(0.0, res.dual[j]);
    lam_sum += lambda[j];
  }
  if (lam_sum <= 1e-12) {
    // Degenerate (can only occur when the objective is flat); fall back to the
    // attaining generator.
    out.q_dual = supergradient(spec.space, spec.rho2, rv_sub(spec.k2, out.x));
  } else {
    std::vector<double> qd(n, 0.0);
    double pen = 0.0;
    for (std::size_t j = 0; j < gens2.size(); ++j) {
      const double w = lambda[j] / lam_sum;
      pen += w * gens2[j].penalty;
      for (std::size_t i = 0; i < n; ++i) qd[i] += w * gens2[j].density.values[i];
    }
    out.q_dual = Supergradient{Density{std::move(qd)}, pen};
  }

  // Multipliers on the significance rows mix the rho1 generators into P*.
  std::vector<double> nu(gens1.size());
  double nu_sum = 0.0;
  for (std::size_t m = 0; m < gens1.size(); ++m) {
    nu[m] = std::max(0.0, -res.dual[gens2.size() + m]);
    nu_sum += nu[m];
  }
  out.kappa = nu_sum;
  if (nu_sum > 1e-9) {
    std::vector<double> pd(n, 0.0);
    double pen = 0.0;
    for (std::size_t m = 0; m < gens1.size(); ++m) {
      const double w = nu[m] / nu_sum;
      pen += w * gens1[m].penalty;
      for (std::size_t i = 0; i < n; ++i) pd[i] += w * gens1[m].density.values[i];
    }
    out.p_dual = Supergradient{Density{std::move(pd)}, pen};
  }
  return out;
}

/// Strategy B: outer bisection on the multiplier kappa of rho1(X) <= alpha,
/// inner projected-subgradient minimization of rho2(k2-X) + kappa*rho1(X)
/// over the box. The final iterate is shifted so the significance constraint
/// holds with equality (alpha-tightness of the optimum).
inline PrimalDetail solve_primal_subgradient(const ProblemSpec& spec, const SolverOptions& opts) {
  const std::size_t n = spec.space.size();
  const double tol = opts.tol > 0 ? opts.tol : default_certificate_tol(SolveStrategy::subgradient);
  PrimalDetail out;

  if (evaluate(spec.space, spec.rho1, spec.k2) <= spec.alpha + 1e-12) {
    out.x = spec.k2;
    out.beta = evaluate(spec.space, spec.rho2, rv_sub(spec.k2, spec.k2));
    return out;
  }

  const double eta0 = std::max(1e-3, box_span(spec.k1, spec.k2));
  auto inner = [&](double kappa, const RandomVariable& start) {
    auto value = [&](const RandomVariable& x) {
      return evaluate(spec.space, spec.rho2, rv_sub(spec.k2, x)) +
             kappa * evaluate(spec.space, spec.rho1, x);
    };
    auto grad = [&](const RandomVariable& x) {
      const Supergradient sq = supergradient(spec.space, spec.rho2, rv_sub(spec.k2, x));
      const Supergradient sp = supergradient(spec.space, spec.rho1, x);
      std::vector<double> g(n);
      for (std::size_t i = 0; i < n; ++i)
        g[i] = spec.space.weights[i] *
               (-sq.density.values[i] + kappa * sp.density.values[i]);
      return g;
    };
    BoxMinResult r = box_minimize(spec.k1, spec.k2, start, value, grad, opts.max_iters, eta0);
    if (opts.restarts > 0) {
      std::mt19937_64 rng(opts.seed ^ 0x9e3779b97f4a7c15ull);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int s = 0; s < opts.restarts; ++s) {
        RandomVariable x0;
        x0.values.resize(n);
        for (std::size_t i = 0; i < n; ++i)
          x0.values[i] = spec.k1.values[i] + u(rng) * (spec.k2.values[i] - spec.k1.values[i]);
        BoxMinResult alt = box_minimize(spec.k1, spec.k2, x0, value, grad, opts.max_iters, eta0);
        const long total = r.iterations + alt.iterations;
        if (alt.value < r.value) r = std::move(alt);
        r.iterations = total;
      }
    }
    return r;
  };

  RandomVariable start;
  start.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) start.values[i] = 0.5 * (spec.k1.values[i] + spec.k2.values[i]);

  // Bracket: kappa = 0 yields x = k2 (infeasible here); grow until feasible.
  double kappa_lo = 0.0, kappa_hi = 1.0;
  BoxMinResult probe = inner(kappa_hi, start);
  out.iterations += probe.iterations;
  int grow = 0;
  while (evaluate(spec.space, spec.rho1, probe.x) > spec.alpha + 1e-12 && grow++ < 60) {
    kappa_hi *= 2.0;
    probe = inner(kappa_hi, probe.x);
    out.iterations += probe.iterations;
  }

  double kappa = kappa_hi;
  RandomVariable feasible_x = probe.x;
  RandomVariable infeasible_x = spec.k2;
  double dual_bound = -kInf;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (kappa_lo + kappa_hi);
    probe = inner(mid, probe.x);
    out.iterations += probe.iterations;
    dual_bound = std::max(dual_bound, probe.value - mid * spec.alpha);
    const double r = evaluate(spec.space, spec.rho1, probe.x);
    if (r <= spec.alpha + 1e-12) {
      kappa_hi = mid;
      kappa = mid;
      feasible_x = probe.x;
    } else {
      kappa_lo = mid;
      infeasible_x = probe.x;
    }
    if (std::fabs(r - spec.alpha) <= 1e-8) {
      kappa = mid;
      feasible_x = probe.x;
      break;
    }
    if (kappa_hi - kappa_lo <= 1e-13 * std::max(1.0, kappa_hi)) break;
  }

  // Candidates: the tightened feasible iterate, and (when the penalized path
  // jumps across the constraint) the alpha-crossing point of the segment
  // between the two sides.
  out.x = tighten_alpha(spec.space, spec.rho1, spec.alpha, spec.k1, spec.k2, feasible_x);
  out.beta = evaluate(spec.space, spec.rho2, rv_sub(spec.k2, out.x));
  if (auto combo = alpha_combo(spec.space, spec.rho1, spec.alpha, feasible_x, infeasible_x)) {
    const double vc = evaluate(spec.space, spec.rho2, rv_sub(spec.k2, *combo));
    if (vc < out.beta && evaluate(spec.space, spec.rho1, *combo) <= spec.alpha + 1e-9) {
      out.x = std::move(*combo);
      out.beta = vc;
    }
  }
  if (spec.rho1.is_entropic() != spec.rho2.is_entropic()) {
    // Mixed families: the penalized objective has kinks exactly where the
    // optimum lives; refine on the exact/cut LP model.
    RandomVariable refined = cutting_plane_refine(spec, out.x);
    refined = tighten_alpha(spec.space, spec.rho1, spec.alpha, spec.k1, spec.k2, refined);
    const double vr = evaluate(spec.space, spec.rho2, rv_sub(spec.k2, refined));
    if (vr < out.beta && evaluate(spec.space, spec.rho1, refined) <= spec.alpha + 1e-9) {
      out.x = std::move(refined);
      out.beta = vr;
    }
  }
  out.kappa = kappa;

  const double gap = out.beta - dual_bound;
  if (!(gap <= std::max(10.0 * tol, 1e-3)))
    throw Error(errc::no_convergence,
                "penalized subgradient gap " + std::to_string(gap) + " above tolerance");
  return out;
}

}  // namespace detail

/// Primal solve only: the optimal test and value (X*, beta).
inline std::pair<RandomVariable, double> solve_primal(const ProblemSpec& spec,
                                                      const SolverOptions& opts = {}) {
  spec.validate();
  SolveStrategy s = opts.strategy;
  const bool any_entropic = spec.rho1.is_entropic() || spec.rho2.is_entropic();
  if (s == SolveStrategy::automatic) s = any_entropic ? SolveStrategy::subgradient : SolveStrategy::lp;
  if (s == SolveStrategy::lp && any_entropic)
    throw Error(errc::invalid_argument, "lp strategy requires finitely generated families");
  if (evaluate(spec.space, spec.rho1, spec.k2) <= spec.alpha + 1e-12) {
    RandomVariable zero;
    zero.values.assign(spec.space.size(), 0.0);
    return {spec.k2, evaluate(spec.space, spec.rho2, zero)};
  }
  if (s == SolveStrategy::lp) {
    auto d = detail::solve_primal_lp(spec);
    return {d.x, d.beta};
  }
  auto d = detail::solve_primal_subgradient(spec, opts);
  return {d.x, d.beta};
}

/// Q* via the representation supergradient at the optimum, checked against
/// its two certificates (attainment and the Q*-saddle identity).
inline Supergradient extract_q_star(const ProblemSpec& spec, const RandomVariable& x_star,
                                    double tol = 1e-4) {
  const RandomVariable loss = detail::rv_sub(spec.k2, x_star);
  const double cls_tol = std::max(1e-8, 0.01 * tol);
  Supergradient q = supergradient(spec.space, spec.rho2, loss);
  if (!spec.rho2.is_entropic()) {
    const Density g = supergradient(spec.space, spec.rho1, x_star).density;
    if (auto mix = detail::fg_mixture_q_star(spec, x_star, g, cls_tol)) q = std::move(*mix);
  }
  const double attained = expectation(spec.space, q.density, loss) - q.penalty;
  const double rho2_val = evaluate(spec.space, spec.rho2, loss);
  if (std::fabs(attained - rho2_val) > std::max(1e-9, cls_tol))
    throw Error(errc::saddle_violation, "supergradient attainment failed");
  const auto inner = detail::min_linear_over_alpha_set(spec.space, spec.rho1, spec.alpha, spec.k1,
                                                       spec.k2, q.density);
  const double saddle = std::fabs(expectation(spec.space, q.density, loss) - inner.value);
  if (saddle > tol)
    throw Error(errc::saddle_violation,
                "Q*-saddle residual " + std::to_string(saddle) + " above tol (primal inaccuracy?)");
  return q;
}

/// gamma_alpha = inf over X_alpha of E_{Q*}[k2 - X], checked to agree with the
/// value at the optimal test.
inline double gamma_alpha(const ProblemSpec& spec, const Supergradient& q_star,
                          const RandomVariable& x_star, double tol = 1e-4) {
  const auto inner = detail::min_linear_over_alpha_set(spec.space, spec.rho1, spec.alpha, spec.k1,
                                                       spec.k2, q_star.density);
  const double at_opt = expectation(spec.space, q_star.density, detail::rv_sub(spec.k2, x_star));
  if (std::fabs(at_opt - inner.value) > tol)
    throw Error(errc::saddle_violation, "gamma_alpha mismatch: " + std::to_string(at_opt) + " vs " +
                                            std::to_string(inner.value));
  return inner.value;
}

/// P* via the representation supergradient of rho1 at the optimum, checked
/// against attainment, the P*-saddle identity on the dual feasible set
/// X^{gamma_alpha}, and alpha-tightness.
inline Supergradient extract_p_star(const ProblemSpec& spec, const Supergradient& q_star, double gamma,
                                    const RandomVariable& x_star, double tol = 1e-4) {
  if (gamma <= kTrivialGamma)
    throw Error(errc::trivial_case, "gamma_alpha <= tol: x* = k2 Q*-a.e., P* not defined by the dual");
  const double cls_tol = std::max(1e-8, 0.01 * tol);
  Supergradient p = supergradient(spec.space, spec.rho1, x_star);
  if (!spec.rho1.is_entropic()) {
    if (auto mix = detail::fg_mixture_p_star(spec, x_star, q_star.density, cls_tol)) p = std::move(*mix);
  }
  const double rho1_val = evaluate(spec.space, spec.rho1, x_star);
  if (std::fabs(expectation(spec.space, p.density, x_star) - p.penalty - rho1_val) > std::max(1e-9, cls_tol))
    throw Error(errc::saddle_violation, "supergradient attainment failed");
  if (std::fabs(rho1_val - spec.alpha) > tol)
    throw Error(errc::saddle_violation, "alpha-tightness residual above tol");
  const RandomVariable xin =
      min_cost_test(spec.space, p.density, q_star.density, gamma, spec.k1, spec.k2);
  const double inner = expectation(spec.space, p.density, xin);
  if (std::fabs(expectation(spec.space, p.density, x_star) - inner) > tol)
    throw Error(errc::saddle_violation, "P*-saddle residual above tol");
  return p;
}

struct ThresholdForm {
  double z = 0.0;
  std::map<std::size_t, double> boundary;  // atom -> B value (= x* there)
};

namespace detail {

struct ThresholdScan {
  double z = 0.0;
  double violation = kInf;
  std::map<std::size_t, double> boundary;
};

/// Scan candidate thresholds for the representation form
/// x* = k2 on {r > z}, k1 on {r < z}, boundary on {r = z}, where
/// r_i = H_{Q*}/G_{P*} with the 0/0 = 0 and 1/0 = +inf conventions. Returns
/// the smallest candidate consistent within value_tol, or the least-violating
/// one when none is. Ratios are clustered with a relative tolerance so solver
/// noise cannot split a tie set.
inline ThresholdScan scan_threshold(const RandomVariable& x, const Density& q,
                                    const std::optional<Density>& p, const RandomVariable& k1,
                                    const RandomVariable& k2, double ratio_tol, double value_tol) {
  const std::size_t n = x.size();
  std::vector<std::size_t> atoms;  // unpinned
  for (std::size_t i = 0; i < n; ++i)
    if (k2.values[i] - k1.values[i] > 1e-12) atoms.push_back(i);

  ThresholdScan best;
  auto box_violation = [&](std::size_t i) {
    return std::max({0.0, x.values[i] - k2.values[i], k1.values[i] - x.values[i]});
  };

  if (!p.has_value()) {
    // Trivial case: no P*, so the form collapses to z = 0 with x* = k2
    // wherever Q* charges the atom.
    double viol = 0.0;
    ThresholdScan out;
    out.z = 0.0;
    for (std::size_t i : atoms) {
      if (q.values[i] > 1e-12)
        viol = std::max(viol, std::fabs(x.values[i] - k2.values[i]));
      else
        out.boundary[i] = x.values[i];
      viol = std::max(viol, box_violation(i));
    }
    out.violation = viol;
    return out;
  }

  std::vector<double> ratio(n, 0.0);
  for (std::size_t i : atoms) ratio[i] = likelihood_ratio(q.values[i], p->values[i]);

  // Cluster finite ratios.
  std::vector<double> fin;
  for (std::size_t i : atoms)
    if (std::isfinite(ratio[i])) fin.push_back(ratio[i]);
  std::sort(fin.begin(), fin.end());
  std::vector<double> reps;
  for (double r : fin) {
    if (reps.empty() || r - reps.back() > ratio_tol * (1.0 + std::fabs(reps.back())))
      reps.push_back(r);
  }
  std::vector<double> candidates;
  candidates.push_back(0.0);
  for (double r : reps) candidates.push_back(r);
  candidates.push_back(kInf);

  auto same = [&](double a, double b) {
    if (std::isinf(a) || std::isinf(b)) return std::isinf(a) && std::isinf(b);
    return std::fabs(a - b) <= ratio_tol * (1.0 + std::min(std::fabs(a), std::fabs(b)));
  };

  for (double z : candidates) {
    double viol = 0.0;
    std::map<std::size_t, double> bnd;
    for (std::size_t i : atoms) {
      const double r = ratio[i];
      if (same(r, z)) {
        bnd[i] = x.values[i];
        viol = std::max(viol, box_violation(i));
      } else if (r > z) {
        viol = std::max(viol, std::fabs(x.values[i] - k2.values[i]));
      } else {
        viol = std::max(viol, std::fabs(x.values[i] - k1.values[i]));
      }
    }
    if (viol <= value_tol) {  // smallest consistent z
      best.violation = viol;
      best.z = z;
      best.boundary = std::move(bnd);
      return best;
    }
    if (viol < best.violation) {
      best.violation = viol;
      best.z = z;
      best.boundary = std::move(bnd);
    }
  }
  return best;
}

}  // namespace detail

/// Smallest threshold z (and boundary values B) for which x* has the
/// classical representation form between Q* and P*. Throws StructureViolation
/// when no threshold is consistent within tol.
inline ThresholdForm infer_threshold(const RandomVariable& x_star, const Density& q_star,
                                     const std::optional<Density>& p_star, const RandomVariable& k1,
                                     const RandomVariable& k2, double tol = 1e-6) {
  const double ratio_tol = std::max(1e-9, std::sqrt(tol));
  // Prefer an exactly consistent candidate; accept the least-violating one
  // within tol.
  detail::ThresholdScan scan = detail::scan_threshold(x_star, q_star, p_star, k1, k2, ratio_tol, tol);
  if (scan.violation > tol)
    throw Error(errc::structure_violation,
                "no threshold reproduces x*: best violation " + std::to_string(scan.violation));
  return ThresholdForm{scan.z, std::move(scan.boundary)};
}

/// Recompute every certificate residual from scratch: feasibility, the two
/// attainment identities, both saddle values via independent inner solves,
/// alpha-tightness, the minimax gap, and the threshold-form violation.
inline CertificateReport verify_solution(const ProblemSpec& spec, const Solution& sol,
                                         double tol = 1e-6) {
  CertificateReport rep;
  const RandomVariable loss = detail::rv_sub(spec.k2, sol.x_star);

  double feas = std::max(0.0, evaluate(spec.space, spec.rho1, sol.x_star) - spec.alpha);
  for (std::size_t i = 0; i < spec.space.size(); ++i)
    feas = std::max({feas, sol.x_star.values[i] - spec.k2.values[i],
                     spec.k1.values[i] - sol.x_star.values[i]});
  rep.primal_feasibility.value = feas;

  rep.q_attainment.value =
      std::fabs(expectation(spec.space, sol.q_star.density, loss) - sol.q_star.penalty - sol.beta);

  const auto inner_q = detail::min_linear_over_alpha_set(spec.space, spec.rho1, spec.alpha, spec.k1,
                                                         spec.k2, sol.q_star.density);
  rep.q_saddle.value =
      std::fabs(expectation(spec.space, sol.q_star.density, loss) - inner_q.value);

  const double pen_q = penalty(spec.space, spec.rho2, sol.q_star.density);
  rep.minimax_gap.value =
      std::isfinite(pen_q) ? std::fabs(sol.beta - (inner_q.value - pen_q)) : kInf;

  const double gamma = inner_q.value;
  if (gamma > kTrivialGamma) {
    rep.alpha_tightness.value = std::fabs(evaluate(spec.space, spec.rho1, sol.x_star) - spec.alpha);
  } else {
    rep.alpha_tightness =
        Residual::not_applicable("gamma_alpha <= " + std::to_string(kTrivialGamma) + " (trivial case)");
  }

  if (sol.p_star.has_value()) {
    const auto& p = *sol.p_star;
    rep.p_attainment.value = std::fabs(expectation(spec.space, p.density, sol.x_star) - p.penalty -
                                       evaluate(spec.space, spec.rho1, sol.x_star));
    const RandomVariable xin =
        min_cost_test(spec.space, p.density, sol.q_star.density, sol.gamma_alpha, spec.k1, spec.k2);
    rep.p_saddle.value =
        std::fabs(expectation(spec.space, p.density, sol.x_star) - expectation(spec.space, p.density, xin));
  } else {
    rep.p_attainment = Residual::not_applicable("P* not extracted (trivial case)");
    rep.p_saddle = Residual::not_applicable("P* not extracted (trivial case)");
  }

  std::optional<Density> pd;
  if (sol.p_star.has_value()) pd = sol.p_star->density;
  const double ratio_tol = std::max(1e-9, std::sqrt(tol));
  const auto scan = detail::scan_threshold(sol.x_star, sol.q_star.density, pd, spec.k1, spec.k2, ratio_tol, tol);
  rep.structure_violation.value = scan.violation;

  return rep;
}

/// Full pipeline: primal solve, Q*/gamma/P* extraction, threshold form, and
/// certificates.
inline Solution solve(const ProblemSpec& spec, const SolverOptions& opts = {}) {
  spec.validate();
  Solution sol;

  SolveStrategy s = opts.strategy;
  const bool any_entropic = spec.rho1.is_entropic() || spec.rho2.is_entropic();
  if (s == SolveStrategy::automatic) s = any_entropic ? SolveStrategy::subgradient : SolveStrategy::lp;
  if (s == SolveStrategy::lp && any_entropic)
    throw Error(errc::invalid_argument, "lp strategy requires finitely generated families");
  sol.strategy_used = s;
  const double tol = opts.tol > 0 ? opts.tol : default_certificate_tol(s);

  if (!spec.rho1.is_entropic() && !spec.rho2.is_entropic()) {
    const auto& g1 = spec.rho1.as_finitely_generated().generators;
    const auto& g2 = spec.rho2.as_finitely_generated().generators;
    bool intersect = false;
    for (const auto& a : g1)
      for (const auto& b : g2)
        intersect = intersect || max_abs_diff(a.density.values, b.density.values) <= 1e-12;
    if (intersect)
      sol.warnings.push_back("rho1 and rho2 generator sets intersect (the representing sets are assumed "
                             "disjoint in theory; the problem is still well posed)");
  }

  detail::PrimalDetail primal;
  if (evaluate(spec.space, spec.rho1, spec.k2) <= spec.alpha + 1e-12) {
    primal.x = spec.k2;
    RandomVariable zero;
    zero.values.assign(spec.space.size(), 0.0);
    primal.beta = evaluate(spec.space, spec.rho2, zero);
  } else if (s == SolveStrategy::lp) {
    primal = detail::solve_primal_lp(spec);
  } else {
    primal = detail::solve_primal_subgradient(spec, opts);
  }
  sol.x_star = primal.x;
  sol.beta = primal.beta;
  sol.iterations = primal.iterations;

  const double cls_tol = std::max(1e-8, 0.01 * tol);
  if (primal.q_dual.has_value()) {
    sol.q_star = *primal.q_dual;
  } else {
    sol.q_star = supergradient(spec.space, spec.rho2, detail::rv_sub(spec.k2, sol.x_star));
    if (!spec.rho2.is_entropic()) {
      const Density g = supergradient(spec.space, spec.rho1, sol.x_star).density;
      if (auto mix = detail::fg_mixture_q_star(spec, sol.x_star, g, cls_tol)) sol.q_star = std::move(*mix);
    }
  }

  const auto inner_q = detail::min_linear_over_alpha_set(spec.space, spec.rho1, spec.alpha, spec.k1,
                                                         spec.k2, sol.q_star.density);
  sol.gamma_alpha = inner_q.value;

  if (sol.gamma_alpha > kTrivialGamma) {
    if (primal.p_dual.has_value()) {
      sol.p_star = *primal.p_dual;
    } else {
      sol.p_star = supergradient(spec.space, spec.rho1, sol.x_star);
      if (!spec.rho1.is_entropic()) {
        if (auto mix = detail::fg_mixture_p_star(spec, sol.x_star, sol.q_star.density, cls_tol))
          sol.p_star = std::move(*mix);
      }
    }
  }

  std::optional<Density> pd;
  if (sol.p_star.has_value()) pd = sol.p_star->density;
  const double ratio_tol = std::max(1e-9, std::sqrt(tol));
  const auto scan = detail::scan_threshold(sol.x_star, sol.q_star.density, pd, spec.k1, spec.k2, ratio_tol, tol);
  sol.z = scan.z;
  sol.boundary_values = scan.boundary;

  sol.certificates = verify_solution(spec, sol, tol);
  return sol;
}

}  // namespace npcvx
