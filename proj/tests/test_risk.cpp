#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "npcvx/risk.hpp"

using namespace npcvx;
using Catch::Approx;
constexpr double kE = std::numbers::e;

namespace {

SampleSpace two_atom() { return make_space({0.5, 0.5}); }

struct RandomModel {
  SampleSpace space;
  ConvexExpectation rho;
};

Density random_density(std::mt19937_64& rng, const SampleSpace& s, double lo = 0.05) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  std::vector<double> dv(s.size());
  double ds = 0;
  for (std::size_t i = 0; i < s.size(); ++i) ds += s.weights[i] * (dv[i] = u(rng));
  for (auto& v : dv) v /= ds;
  return make_density(s, dv);
}

RandomModel random_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  const std::size_t n = 2 + rng() % 3;
  std::vector<double> w(n);
  double ws = 0;
  for (auto& v : w) ws += (v = u(rng));
  for (auto& v : w) v /= ws;
  SampleSpace s = make_space(w);

  ConvexExpectation rho = ConvexExpectation::linear(random_density(rng, s));
  switch (rng() % 3) {
    case 0:
      rho = ConvexExpectation::entropic(random_density(rng, s), 0.5 + u(rng) * 2.0);
      break;
    case 1: {
      std::vector<Generator> gens;
      const std::size_t g = 1 + rng() % 3;
      for (std::size_t j = 0; j < g; ++j)
        gens.push_back(Generator{random_density(rng, s), 0.3 * u(rng)});
      rho = ConvexExpectation::finitely_generated(std::move(gens));
      break;
    }
    default:
      break;
  }
  return {std::move(s), std::move(rho)};
}

RandomVariable random_rv(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RandomVariable x;
  x.values.resize(n);
  for (auto& v : x.values) v = u(rng);
  return x;
}

}  // namespace

TEST_CASE("entropic evaluate matches the reference fixture") {
  const SampleSpace s = two_atom();
  const Density q0 = make_density(s, {1.5, 0.5});
  const auto rho2 = ConvexExpectation::entropic(q0, 1.0);
  REQUIRE(evaluate(s, rho2, RandomVariable{0.0, 1.0}) == Approx(std::log((3.0 + kE) / 4.0)).epsilon(1e-14));
  REQUIRE(evaluate(s, rho2, RandomVariable{0.0, 1.0}) == Approx(0.3573740195).margin(1e-9));

  // cash invariance pins constants
  const double r0 = evaluate(s, rho2, RandomVariable{0.0, 0.0});
  REQUIRE(evaluate(s, rho2, RandomVariable{2.5, 2.5}) == Approx(2.5 + r0).margin(1e-12));
}

TEST_CASE("finitely generated evaluate is the penalized max") {
  const SampleSpace s = two_atom();
  const Density d1 = make_density(s, {1.0, 1.0});
  const Density d2 = make_density(s, {1.4, 0.6});
  const auto rho = ConvexExpectation::finitely_generated({{d1, 0.0}, {d2, 0.1}});
  // x = (1,0): E_{d1}[x] = 0.5, E_{d2}[x] = 0.7, so max(0.5 - 0, 0.7 - 0.1) = 0.6
  REQUIRE(evaluate(s, rho, RandomVariable{1.0, 0.0}) == Approx(0.6));
}

TEST_CASE("entropic supergradient reproduces the reference Q* and P*") {
  const SampleSpace s = two_atom();
  const Density q0 = make_density(s, {1.5, 0.5});
  const auto rho2 = ConvexExpectation::entropic(q0, 1.0);
  const Supergradient sg = supergradient(s, rho2, RandomVariable{0.0, 1.0});
  REQUIRE(sg.density.values[0] == Approx(6.0 / (3.0 + kE)).epsilon(1e-14));
  REQUIRE(sg.density.values[1] == Approx(2.0 * kE / (3.0 + kE)).epsilon(1e-14));
  const auto probs = atom_probabilities(s, sg.density);
  REQUIRE(probs[0] == Approx(3.0 / (kE + 3.0)).epsilon(1e-14));
  REQUIRE(probs[1] == Approx(kE / (kE + 3.0)).epsilon(1e-14));

  const Density p0 = make_density(s, {0.5, 1.5});
  const auto rho1 = ConvexExpectation::entropic(p0, 1.0);
  const auto probs1 = atom_probabilities(s, supergradient(s, rho1, RandomVariable{1.0, 0.0}).density);
  REQUIRE(probs1[0] == Approx(kE / (kE + 3.0)).epsilon(1e-14));
  REQUIRE(probs1[1] == Approx(3.0 / (kE + 3.0)).epsilon(1e-14));
}

TEST_CASE("supergradient at constants is the base / lowest-penalty generator") {
  const SampleSpace s = two_atom();
  const Density q0 = make_density(s, {1.5, 0.5});
  const auto rho = ConvexExpectation::entropic(q0, 1.0);
  const RandomVariable c{0.7, 0.7};
  const Supergradient sg = supergradient(s, rho, c);
  REQUIRE(max_abs_diff(sg.density.values, q0.values) <= 1e-12);
  REQUIRE(expectation(s, sg.density, c) - sg.penalty == Approx(evaluate(s, rho, c)).margin(1e-12));

  const auto fg = ConvexExpectation::finitely_generated(
      {{make_density(s, {1.2, 0.8}), 0.1}, {make_density(s, {0.9, 1.1}), 0.1}});
  const Supergradient sg2 = supergradient(s, fg, c);
  REQUIRE(max_abs_diff(sg2.density.values, {1.2, 0.8}) <= 1e-12);  // tie -> lowest index
}

TEST_CASE("entropic penalty matches the relative-entropy formula") {
  const SampleSpace s = two_atom();
  const Density q0 = make_density(s, {1.5, 0.5});
  const auto rho2 = ConvexExpectation::entropic(q0, 1.0);
  REQUIRE(penalty(s, rho2, q0) == Approx(0.0).margin(1e-14));

  const double qp = 0.3;
  const Density q = density_from_probabilities(s, {qp, 1.0 - qp});
  const double expected = qp * std::log(qp) + (1 - qp) * std::log(1 - qp) - qp * std::log(3.0) +
                          2.0 * std::log(2.0);
  REQUIRE(penalty(s, rho2, q) == Approx(expected).epsilon(1e-12));

  // absolute-continuity failure
  const Density spike = make_density(s, {0.0, 2.0});
  const auto rho_part = ConvexExpectation::entropic(make_density(s, {2.0, 0.0}), 1.0);
  REQUIRE(std::isinf(penalty(s, rho_part, spike)));
}

TEST_CASE("finitely generated penalty: exact, hull-linearized, infinite") {
  const SampleSpace s = two_atom();
  const Density d1 = make_density(s, {1.6, 0.4});
  const Density d2 = make_density(s, {0.4, 1.6});
  const auto rho = ConvexExpectation::finitely_generated({{d1, 0.05}, {d2, 0.25}});

  REQUIRE(penalty(s, rho, d1) == Approx(0.05));
  REQUIRE(penalty(s, rho, d2) == Approx(0.25));

  // midpoint of the hull: linearized value is the mixed penalty
  const Density mid = make_density(s, {1.0, 1.0});
  REQUIRE(penalty(s, rho, mid) == Approx(0.15).margin(1e-9));

  // outside the hull
  const Density out = make_density(s, {1.9, 0.1});
  REQUIRE(std::isinf(penalty(s, rho, out)));
}

TEST_CASE("convex expectation axioms and Fenchel inequality (random instances)") {
  std::mt19937_64 rng(20250810);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    auto [s, rho] = random_model(rng);
    const std::size_t n = s.size();
    const RandomVariable x = random_rv(rng, n);
    RandomVariable y = random_rv(rng, n);

    // monotonicity
    RandomVariable above = x;
    for (auto& v : above.values) v += u01(rng);
    REQUIRE(evaluate(s, rho, above) >= evaluate(s, rho, x) - 1e-12);

    // cash invariance
    const double c = u01(rng) * 4 - 2;
    RandomVariable shifted = x;
    for (auto& v : shifted.values) v += c;
    REQUIRE(evaluate(s, rho, shifted) == Approx(evaluate(s, rho, x) + c).margin(1e-10));

    // convexity
    const double lam = u01(rng);
    RandomVariable mix;
    mix.values.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      mix.values[i] = lam * x.values[i] + (1 - lam) * y.values[i];
    REQUIRE(evaluate(s, rho, mix) <=
            lam * evaluate(s, rho, x) + (1 - lam) * evaluate(s, rho, y) + 1e-10);

    // Fenchel inequality with a random density
    const Density q = random_density(rng, s);
    const double pen = penalty(s, rho, q);
    if (std::isfinite(pen))
      REQUIRE(evaluate(s, rho, x) >= expectation(s, q, x) - pen - 1e-9);

    // supergradient attainment
    const Supergradient sg = supergradient(s, rho, x);
    REQUIRE(std::fabs(expectation(s, sg.density, x) - sg.penalty - evaluate(s, rho, x)) <= 1e-9);
  }
}

TEST_CASE("linearized hull penalty keeps the Fenchel inequality") {
  // For mixtures of generators the linearized value is an upper bound on the
  // conjugate, so the representation inequality must hold with it.
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 3;
    std::vector<double> w(n);
    double ws = 0;
    for (auto& v : w) ws += (v = 0.2 + u01(rng));
    for (auto& v : w) v /= ws;
    const SampleSpace s = make_space(w);

    auto rand_density = [&] {
      std::vector<double> dv(n);
      double ds = 0;
      for (std::size_t i = 0; i < n; ++i) ds += s.weights[i] * (dv[i] = 0.05 + u01(rng));
      for (auto& v : dv) v /= ds;
      return make_density(s, dv);
    };
    std::vector<Generator> gens;
    const std::size_t g = 2 + rng() % 2;
    for (std::size_t j = 0; j < g; ++j) gens.push_back(Generator{rand_density(), 0.3 * u01(rng)});
    const auto rho = ConvexExpectation::finitely_generated(gens);

    // a point inside the hull
    std::vector<double> lam(g);
    double lsum = 0;
    for (auto& v : lam) lsum += (v = u01(rng) + 0.05);
    std::vector<double> mix(n, 0.0);
    for (std::size_t j = 0; j < g; ++j)
      for (std::size_t i = 0; i < n; ++i) mix[i] += lam[j] / lsum * gens[j].density.values[i];
    const Density q{mix};
    const double pen = penalty(s, rho, q);
    REQUIRE(std::isfinite(pen));
    double mixed_penalty = 0.0;
    for (std::size_t j = 0; j < g; ++j) mixed_penalty += lam[j] / lsum * gens[j].penalty;
    REQUIRE(pen <= mixed_penalty + 1e-9);  // linearized value is the cheapest representation

    RandomVariable x;
    x.values.resize(n);
    for (auto& v : x.values) v = 4 * u01(rng) - 2;
    REQUIRE(evaluate(s, rho, x) >= expectation(s, q, x) - pen - 1e-9);
  }
}

TEST_CASE("entropic evaluate survives large arguments (log-sum-exp shift)") {
  const SampleSpace s = two_atom();
  const auto rho = ConvexExpectation::entropic(base_density(s), 5.0);
  const double v = evaluate(s, rho, RandomVariable{300.0, 200.0});
  REQUIRE(std::isfinite(v));
  REQUIRE(v == Approx(300.0 + std::log(0.5) / 5.0).epsilon(1e-12));
}
