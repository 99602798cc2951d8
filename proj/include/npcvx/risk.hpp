#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <variant>
#include <vector>

#include "npcvx/errors.hpp"
#include "npcvx/measure.hpp"
#include "npcvx/numeric.hpp"
#include "npcvx/simplex.hpp"

namespace npcvx {

/// rho(X) = (1/theta) * ln E_base[exp(theta X)].
struct EntropicFamily {
  Density base;
  double theta = 1.0;
};

struct Generator {
  Density density;
  double penalty = 0.0;  // the cost c_j charged to this measure
};

/// rho(X) = max_j (E_{Q_j}[X] - c_j). With all penalties zero this is the
/// worst-case (sublinear) expectation over the generators.
struct FinitelyGeneratedFamily {
  std::vector<Generator> generators;
};

enum class RiskFamily { entropic, finitely_generated, linear };

/// A convex expectation: monotone, cash-invariant, convex functional on
/// bounded random variables, carried together with enough structure to
/// evaluate its penalty function and representation supergradients. On a
/// finite space both families are automatically continuous from below and
/// from above (dominated convergence is trivial), so no continuity machinery
/// is carried.
class ConvexExpectation {
 public:
  /// Defaults to the plain expectation on a one-atom space; containers of
  /// specs rely on default construction before assignment.
  ConvexExpectation() : fam_(FinitelyGeneratedFamily{{Generator{Density{{1.0}}, 0.0}}}) {}

  static ConvexExpectation entropic(Density base, double theta) {
    if (!(theta > 0.0)) throw Error(errc::invalid_argument, "entropic theta must be > 0");
    ConvexExpectation r;
    r.kind_ = RiskFamily::entropic;
    r.fam_ = EntropicFamily{std::move(base), theta};
    return r;
  }

  static ConvexExpectation finitely_generated(std::vector<Generator> gens) {
    if (gens.empty()) throw Error(errc::invalid_argument, "need at least one generator");
    for (const auto& g : gens)
      if (!std::isfinite(g.penalty)) throw Error(errc::invalid_argument, "generator penalty must be finite");
    ConvexExpectation r;
    r.kind_ = RiskFamily::finitely_generated;
    r.fam_ = FinitelyGeneratedFamily{std::move(gens)};
    return r;
  }

  /// rho(X) = E_base[X], sugar for a single zero-penalty generator.
  static ConvexExpectation linear(Density base) {
    ConvexExpectation r = finitely_generated({Generator{std::move(base), 0.0}});
    r.kind_ = RiskFamily::linear;
    return r;
  }

  RiskFamily kind() const { return kind_; }
  bool is_entropic() const { return kind_ == RiskFamily::entropic; }
  const EntropicFamily& as_entropic() const { return std::get<EntropicFamily>(fam_); }
  const FinitelyGeneratedFamily& as_finitely_generated() const {
    return std::get<FinitelyGeneratedFamily>(fam_);
  }

  std::size_t dim() const {
    if (is_entropic()) return as_entropic().base.size();
    return as_finitely_generated().generators.front().density.size();
  }

 private:
  RiskFamily kind_ = RiskFamily::linear;
  std::variant<EntropicFamily, FinitelyGeneratedFamily> fam_;
};

/// The measure attaining rho(X) = E_P[X] - rho*(P), with the penalty charged
/// at that measure.
struct Supergradient {
  Density density;
  double penalty = 0.0;
};

inline double evaluate(const SampleSpace& space, const ConvexExpectation& rho, const RandomVariable& x) {
  check_dims(space.size(), rho.dim(), "risk measure");
  check_dims(space.size(), x.size(), "random variable");
  if (rho.is_entropic()) {
    const auto& e = rho.as_entropic();
    // log-sum-exp with a shift by max theta*x_i for overflow control
    double shift = -kInf;
    for (std::size_t i = 0; i < space.size(); ++i)
      if (e.base.values[i] > 0.0) shift = std::max(shift, e.theta * x.values[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < space.size(); ++i) {
      const double w = space.weights[i] * e.base.values[i];
      if (w > 0.0) sum += w * std::exp(e.theta * x.values[i] - shift);
    }
    return (std::log(sum) + shift) / e.theta;
  }
  const auto& fg = rho.as_finitely_generated();
  double best = -kInf;
  for (const auto& g : fg.generators) best = std::max(best, expectation(space, g.density, x) - g.penalty);
  return best;
}

inline Supergradient supergradient(const SampleSpace& space, const ConvexExpectation& rho,
                                   const RandomVariable& x) {
  check_dims(space.size(), rho.dim(), "risk measure");
  check_dims(space.size(), x.size(), "random variable");
  if (rho.is_entropic()) {
    const auto& e = rho.as_entropic();
    double shift = -kInf;
    for (std::size_t i = 0; i < space.size(); ++i)
      if (e.base.values[i] > 0.0) shift = std::max(shift, e.theta * x.values[i]);
    double norm = 0.0;
    std::vector<double> tilted(space.size(), 0.0);
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (e.base.values[i] <= 0.0) continue;
      tilted[i] = e.base.values[i] * std::exp(e.theta * x.values[i] - shift);
      norm += space.weights[i] * tilted[i];
    }
    for (double& t : tilted) t /= norm;
    Density d{std::move(tilted)};
    const double pen = kl_divergence(space, d, e.base) / e.theta;
    return Supergradient{std::move(d), pen};
  }
  const auto& fg = rho.as_finitely_generated();
  std::size_t best = 0;
  double best_val = -kInf;
  for (std::size_t j = 0; j < fg.generators.size(); ++j) {
    const double v = expectation(space, fg.generators[j].density, x) - fg.generators[j].penalty;
    if (v > best_val + 1e-15) {  // ties resolve to the lowest index
      best_val = v;
      best = j;
    }
  }
  return Supergradient{fg.generators[best].density, fg.generators[best].penalty};
}

/// Penalty function rho*(q). Entropic: scaled relative entropy. Finitely
/// generated: the exact c_j when q matches a generator, else the linearized
/// hull value min{sum lambda_j c_j : sum lambda_j Q_j = q} (an upper bound on
/// the biconjugate penalty, exact at optimizers returned by the solver), or
/// +infinity outside the generators' convex hull.
inline double penalty(const SampleSpace& space, const ConvexExpectation& rho, const Density& q) {
  check_dims(space.size(), rho.dim(), "risk measure");
  check_dims(space.size(), q.size(), "density");
  if (rho.is_entropic()) {
    const auto& e = rho.as_entropic();
    return kl_divergence(space, q, e.base) / e.theta;
  }
  const auto& fg = rho.as_finitely_generated();
  for (const auto& g : fg.generators)
    if (max_abs_diff(g.density.values, q.values) <= 1e-9) return g.penalty;

  // min sum lambda_j c_j  s.t.  sum_j lambda_j Q_j = q, lambda in the simplex
  const std::size_t n = space.size();
  const std::size_t m = fg.generators.size();
  LpProblem lp;
  lp.c.resize(m);
  for (std::size_t j = 0; j < m; ++j) lp.c[j] = fg.generators[j].penalty;
  for (std::size_t i = 0; i < n; ++i) {
    LpRow row;
    row.a.resize(m);
    for (std::size_t j = 0; j < m; ++j) row.a[j] = fg.generators[j].density.values[i];
    row.rel = LpRel::eq;
    row.b = q.values[i];
    lp.rows.push_back(std::move(row));
  }
  LpRow simplex_row;
  simplex_row.a.assign(m, 1.0);
  simplex_row.rel = LpRel::eq;
  simplex_row.b = 1.0;
  lp.rows.push_back(std::move(simplex_row));

  const LpResult res = solve_lp(lp);
  if (res.status != LpStatus::optimal) return kInf;
  return res.value;
}

}  // namespace npcvx
