#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "npcvx/errors.hpp"
#include "npcvx/measure.hpp"
#include "npcvx/numeric.hpp"

namespace npcvx {

/// Randomized most-powerful test between two fixed measures:
/// test = 1 where the likelihood ratio exceeds z_prime, 0 where it falls
/// below, and the single fraction boundary_fraction where it ties.
struct NpTest {
  double z_prime = 0.0;           // likelihood-ratio threshold, in [0, +inf]
  double boundary_fraction = 1.0;  // the constant B' shared by the boundary set
  RandomVariable test;
  double power = 0.0;  // E_p[test]
  double size = 0.0;   // E_q[test] <= level
};

namespace detail {

/// p/q with the conventions 0/0 = 0 and positive/0 = +infinity.
inline double likelihood_ratio(double p, double q) {
  if (q > 0.0) return p / q;
  return p > 0.0 ? kInf : 0.0;
}

struct RatioGroup {
  double ratio = 0.0;          // representative (rounded) ratio
  std::vector<std::size_t> atoms;
  double cost = 0.0;           // sum of mu_i * q_i over the group
};

/// Group atoms by likelihood ratio (exact ties after rounding to 12
/// significant digits, so float noise cannot split a boundary set), sorted by
/// ratio descending with atom order preserved inside each group.
inline std::vector<RatioGroup> ratio_groups(const SampleSpace& space, const Density& p, const Density& q) {
  std::map<double, RatioGroup, std::greater<double>> groups;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double r = round_sig(likelihood_ratio(p.values[i], q.values[i]), 12);
    auto& g = groups[r];
    g.ratio = r;
    g.atoms.push_back(i);
    g.cost += space.weights[i] * q.values[i];
  }
  std::vector<RatioGroup> out;
  out.reserve(groups.size());
  for (auto& [r, g] : groups) out.push_back(std::move(g));
  return out;
}

}  // namespace detail

/// Maximize E_p[Z] over randomized tests 0 <= Z <= 1 with E_q[Z] <= level.
/// Greedy by descending likelihood ratio: fill Z = 1 while the budget allows,
/// put one common fractional value on the marginal group, 0 beyond.
inline NpTest most_powerful_test(const SampleSpace& space, const Density& p_hat, const Density& q_hat,
                                 double level) {
  check_dims(space.size(), p_hat.size(), "p_hat");
  check_dims(space.size(), q_hat.size(), "q_hat");
  if (!(level >= 0.0 && level <= 1.0))
    throw Error(errc::level_out_of_range, "level " + std::to_string(level) + " outside [0,1]");

  const auto groups = detail::ratio_groups(space, p_hat, q_hat);
  const double exhausted_tol = 1e-14 * (1.0 + level);

  NpTest out;
  out.test.values.assign(space.size(), 0.0);
  double remaining = level;
  bool stopped = false;
  for (const auto& g : groups) {
    if (g.cost <= remaining + exhausted_tol) {
      for (std::size_t i : g.atoms) out.test.values[i] = 1.0;
      remaining = std::max(0.0, remaining - g.cost);
      if (g.cost > 0.0 && remaining <= exhausted_tol) {
        out.z_prime = g.ratio;  // budget consumed exactly: boundary value is 1
        out.boundary_fraction = 1.0;
        stopped = true;
        break;
      }
    } else {
      out.z_prime = g.ratio;
      out.boundary_fraction = remaining / g.cost;
      for (std::size_t i : g.atoms) out.test.values[i] = out.boundary_fraction;
      stopped = true;
      break;
    }
  }
  if (!stopped) {
    out.z_prime = 0.0;  // budget never binds; any ratio-0 atoms were filled
    out.boundary_fraction = 1.0;
  }

  for (std::size_t i = 0; i < space.size(); ++i) {
    out.power += space.weights[i] * p_hat.values[i] * out.test.values[i];
    out.size += space.weights[i] * q_hat.values[i] * out.test.values[i];
  }
  return out;
}

/// The tilted measures of the box-to-unit-box reduction: reweight p and q by
/// (k2-k1) and rescale the budget accordingly. Atoms with k2 = k1 get tilted
/// density zero (the 0/0 convention keeps them off every likelihood set).
struct TiltReduction {
  Density p_hat;
  Density q_hat;
  double gamma_prime = 0.0;
  double p_range_mass = 0.0;  // E_p[k2-k1]
  double q_range_mass = 0.0;  // E_q[k2-k1]
};

inline TiltReduction tilt_reduction(const SampleSpace& space, const RandomVariable& k1,
                                    const RandomVariable& k2, const Density& p_star,
                                    const Density& q_star, double gamma) {
  check_dims(space.size(), k1.size(), "k1");
  check_dims(space.size(), k2.size(), "k2");
  check_dims(space.size(), p_star.size(), "p_star");
  check_dims(space.size(), q_star.size(), "q_star");

  TiltReduction t;
  std::vector<double> pv(space.size()), qv(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double range = std::max(0.0, k2.values[i] - k1.values[i]);
    pv[i] = p_star.values[i] * range;
    qv[i] = q_star.values[i] * range;
    t.p_range_mass += space.weights[i] * pv[i];
    t.q_range_mass += space.weights[i] * qv[i];
  }
  if (!(t.p_range_mass > 0.0) || !(t.q_range_mass > 0.0))
    throw Error(errc::degenerate_bounds, "tilt denominator E[k2-k1] vanishes");
  for (std::size_t i = 0; i < space.size(); ++i) {
    pv[i] /= t.p_range_mass;
    qv[i] /= t.q_range_mass;
  }
  t.p_hat = Density{std::move(pv)};
  t.q_hat = Density{std::move(qv)};
  t.gamma_prime = gamma / t.q_range_mass;
  return t;
}

/// Minimize E_p[X] over k1 <= X <= k2 with E_q[k2-X] <= b, by the affine
/// substitution Z = (k2-X)/(k2-k1) and the most powerful test between the
/// tilted measures. Atoms with k2 = k1 are pinned to that common value.
inline RandomVariable min_cost_test(const SampleSpace& space, const Density& p, const Density& q, double b,
                                    const RandomVariable& k1, const RandomVariable& k2) {
  check_dims(space.size(), p.size(), "p");
  check_dims(space.size(), q.size(), "q");
  check_dims(space.size(), k1.size(), "k1");
  check_dims(space.size(), k2.size(), "k2");
  for (std::size_t i = 0; i < space.size(); ++i)
    if (k1.values[i] > k2.values[i] + 1e-12)
      throw Error(errc::invalid_argument, "k1 > k2 at atom " + std::to_string(i));
  if (b < -1e-12) throw Error(errc::infeasible_budget, "budget " + std::to_string(b) + " < 0");
  b = std::max(0.0, b);

  double p_range = 0.0, q_range = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double range = std::max(0.0, k2.values[i] - k1.values[i]);
    p_range += space.weights[i] * p.values[i] * range;
    q_range += space.weights[i] * q.values[i] * range;
  }
  if (q_range <= 0.0) return k1;  // the budget constraint cannot bind
  if (p_range <= 0.0) return k2;  // objective blind to X; k2 is always feasible

  const TiltReduction t = tilt_reduction(space, k1, k2, p, q, b);
  const double level = std::min(1.0, t.gamma_prime);
  const NpTest npt = most_powerful_test(space, t.p_hat, t.q_hat, level);

  RandomVariable x;
  x.values.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double range = std::max(0.0, k2.values[i] - k1.values[i]);
    x.values[i] = range > 0.0 ? k2.values[i] - range * npt.test.values[i] : k1.values[i];
  }
  return x;
}

}  // namespace npcvx
