#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "npcvx/classical_np.hpp"
#include "npcvx/simplex.hpp"

using namespace npcvx;
using Catch::Approx;
constexpr double kE = std::numbers::e;

namespace {

Density random_density(std::mt19937_64& rng, const SampleSpace& s, double lo = 0.0) {
  std::uniform_real_distribution<double> u(lo, 1.0);
  std::vector<double> dv(s.size());
  double ds = 0;
  for (std::size_t i = 0; i < s.size(); ++i) ds += s.weights[i] * (dv[i] = u(rng));
  for (auto& v : dv) v /= ds;
  return make_density(s, dv);
}

SampleSpace random_space(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  std::vector<double> w(n);
  double ws = 0;
  for (auto& v : w) ws += (v = u(rng));
  for (auto& v : w) v /= ws;
  return make_space(w);
}

/// LP oracle for the most powerful test: max E_p[Z], E_q[Z] <= level, 0<=Z<=1.
double lp_power(const SampleSpace& s, const Density& p, const Density& q, double level) {
  LpProblem lp;
  const std::size_t n = s.size();
  lp.c.resize(n);
  for (std::size_t i = 0; i < n; ++i) lp.c[i] = -s.weights[i] * p.values[i];
  LpRow budget;
  budget.a.resize(n);
  for (std::size_t i = 0; i < n; ++i) budget.a[i] = s.weights[i] * q.values[i];
  budget.rel = LpRel::le;
  budget.b = level;
  lp.rows.push_back(std::move(budget));
  for (std::size_t i = 0; i < n; ++i) {
    LpRow row;
    row.a.assign(n, 0.0);
    row.a[i] = 1.0;
    row.rel = LpRel::le;
    row.b = 1.0;
    lp.rows.push_back(std::move(row));
  }
  const LpResult r = solve_lp(lp);
  REQUIRE(r.status == LpStatus::optimal);
  return -r.value;
}

/// Dense grid oracle over test vectors (2 atoms only).
double grid_power_2(const SampleSpace& s, const Density& p, const Density& q, double level, int steps) {
  double best = 0.0;
  for (int a = 0; a <= steps; ++a)
    for (int b = 0; b <= steps; ++b) {
      const double z0 = double(a) / steps, z1 = double(b) / steps;
      const double size = s.weights[0] * q.values[0] * z0 + s.weights[1] * q.values[1] * z1;
      if (size > level + 1e-12) continue;
      best = std::max(best, s.weights[0] * p.values[0] * z0 + s.weights[1] * p.values[1] * z1);
    }
  return best;
}

}  // namespace

TEST_CASE("indistinguishable measures randomize uniformly at the level") {
  const SampleSpace s = make_space({0.3, 0.7});
  const Density d = make_density(s, {1.0, 1.0});
  const NpTest t = most_powerful_test(s, d, d, 0.4);
  REQUIRE(t.test.values[0] == Approx(0.4).margin(1e-12));
  REQUIRE(t.test.values[1] == Approx(0.4).margin(1e-12));
  REQUIRE(t.power == Approx(0.4).margin(1e-12));
  REQUIRE(t.size == Approx(0.4).margin(1e-12));
  REQUIRE(t.z_prime == Approx(1.0));
}

TEST_CASE("two-atom fixture: exact budget fill") {
  const SampleSpace s = make_space({0.5, 0.5});
  const Density p = make_density(s, {0.5, 1.5});
  const Density q = make_density(s, {1.0, 1.0});
  const NpTest t = most_powerful_test(s, p, q, 0.5);
  REQUIRE(t.test.values[0] == Approx(0.0).margin(1e-14));
  REQUIRE(t.test.values[1] == Approx(1.0).margin(1e-14));
  REQUIRE(t.power == Approx(0.75).margin(1e-12));
  REQUIRE(t.z_prime == Approx(1.5));
  REQUIRE(t.boundary_fraction == Approx(1.0));  // no actual randomization

  // brute force over (z', B') on the 2-atom grid agrees
  REQUIRE(t.power == Approx(grid_power_2(s, p, q, 0.5, 400)).margin(1e-2));
  REQUIRE(t.power == Approx(lp_power(s, p, q, 0.5)).margin(1e-9));
}

TEST_CASE("two-block discretization fixture fills the high-ratio atom exactly") {
  const double e = kE;
  const SampleSpace s = make_space({(e - 2) / (e - 1), 1 / (e - 1)});
  const Density p = make_density(s, {e / (e - 1), 1 / (e - 1)});
  const Density q = make_density(s, {(e + 1) / (e - 1), (3 - e) / (e - 1)});
  const double level = (3 - e) / ((e - 1) * (e - 1));
  REQUIRE(level == Approx(0.095417).margin(1e-6));

  const NpTest t = most_powerful_test(s, p, q, level);
  REQUIRE(t.test.values[0] == Approx(0.0).margin(1e-12));
  REQUIRE(t.test.values[1] == Approx(1.0).margin(1e-12));
  REQUIRE(t.power == Approx(lp_power(s, p, q, level)).margin(1e-9));
  REQUIRE(t.power == Approx(grid_power_2(s, p, q, level, 400)).margin(1e-2));
}

TEST_CASE("level validation") {
  const SampleSpace s = make_space({0.5, 0.5});
  const Density d = make_density(s, {1.0, 1.0});
  REQUIRE_THROWS_AS(most_powerful_test(s, d, d, -0.1), Error);
  REQUIRE_THROWS_AS(most_powerful_test(s, d, d, 1.1), Error);
}

TEST_CASE("tilt reduction") {
  const SampleSpace s = make_space({0.5, 0.5});
  const Density ones = make_density(s, {1.0, 1.0});
  const RandomVariable k1{0.0, 0.0};

  SECTION("unit box leaves measures unchanged") {
    const auto t = tilt_reduction(s, k1, RandomVariable{1.0, 1.0}, ones, ones, 0.3);
    REQUIRE(max_abs_diff(t.p_hat.values, ones.values) <= 1e-15);
    REQUIRE(max_abs_diff(t.q_hat.values, ones.values) <= 1e-15);
    REQUIRE(t.gamma_prime == Approx(0.3));
  }
  SECTION("componentwise reweighting by the range") {
    const auto t = tilt_reduction(s, k1, RandomVariable{2.0, 1.0}, ones, ones, 0.0);
    REQUIRE(t.p_hat.values[0] == Approx(4.0 / 3.0).epsilon(1e-14));
    REQUIRE(t.p_hat.values[1] == Approx(2.0 / 3.0).epsilon(1e-14));
    REQUIRE(t.gamma_prime == Approx(0.0));
  }
  SECTION("degenerate bounds rejected") {
    REQUIRE_THROWS_AS(tilt_reduction(s, k1, k1, ones, ones, 0.0), Error);
  }
}

TEST_CASE("min_cost_test fixtures") {
  const SampleSpace s = make_space({0.5, 0.5});
  const Density ones = make_density(s, {1.0, 1.0});
  const RandomVariable k1{0.0, 0.0}, k2{1.0, 1.0};

  SECTION("slack budget returns the lower bound") {
    const Density p = make_density(s, {1.2, 0.8});
    const RandomVariable x = min_cost_test(s, p, ones, 1.5, k1, k2);
    REQUIRE(max_abs_diff(x.values, k1.values) <= 1e-14);
  }
  SECTION("zero budget forces the upper bound on the support of q") {
    const Density p = make_density(s, {1.2, 0.8});
    const RandomVariable x = min_cost_test(s, p, ones, 0.0, k1, k2);
    REQUIRE(max_abs_diff(x.values, k2.values) <= 1e-14);
  }
  SECTION("negative budget rejected") {
    REQUIRE_THROWS_AS(min_cost_test(s, ones, ones, -0.5, k1, k2), Error);
  }
  SECTION("representative-pair fixture reproduces the reference optimal test") {
    const Density p = make_density(s, {2 * kE / (kE + 3), 6 / (kE + 3)});
    const RandomVariable x = min_cost_test(s, p, ones, 0.5, k1, k2);
    REQUIRE(x.values[0] == Approx(1.0).margin(1e-14));
    REQUIRE(x.values[1] == Approx(0.0).margin(1e-14));
  }
  SECTION("pinned atoms keep their common value") {
    const Density p = make_density(s, {1.2, 0.8});
    const RandomVariable x =
        min_cost_test(s, p, ones, 0.1, RandomVariable{0.0, 0.7}, RandomVariable{1.0, 0.7});
    REQUIRE(x.values[1] == Approx(0.7));
  }
}

TEST_CASE("greedy test matches LP oracle and satisfies complementary slackness") {
  std::mt19937_64 rng(424242);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 5;  // up to 6 atoms
    const SampleSpace s = random_space(rng, n);
    const Density p = random_density(rng, s);
    const Density q = random_density(rng, s);
    const double level = u01(rng);
    const NpTest t = most_powerful_test(s, p, q, level);

    REQUIRE(t.size <= level + 1e-12);
    REQUIRE(t.power == Approx(lp_power(s, p, q, level)).margin(1e-9));
    if (t.z_prime > 0.0) REQUIRE(t.size == Approx(level).margin(1e-12));
    for (double z : t.test.values) {
      REQUIRE(z >= -1e-15);
      REQUIRE(z <= 1 + 1e-15);
    }
  }
}

TEST_CASE("greedy power matches a dense grid on three atoms") {
  std::mt19937_64 rng(3141);
  std::uniform_real_distribution<double> u01(0.05, 0.95);
  const int steps = 200;
  for (int trial = 0; trial < 3; ++trial) {
    const SampleSpace s = random_space(rng, 3);
    const Density p = random_density(rng, s);
    const Density q = random_density(rng, s);
    const double level = u01(rng);
    const NpTest t = most_powerful_test(s, p, q, level);

    double best = 0.0;
    for (int a = 0; a <= steps; ++a)
      for (int b = 0; b <= steps; ++b)
        for (int c = 0; c <= steps; ++c) {
          const double z0 = double(a) / steps, z1 = double(b) / steps, z2 = double(c) / steps;
          const double size = s.weights[0] * q.values[0] * z0 + s.weights[1] * q.values[1] * z1 +
                              s.weights[2] * q.values[2] * z2;
          if (size > level + 1e-12) continue;
          best = std::max(best, s.weights[0] * p.values[0] * z0 + s.weights[1] * p.values[1] * z1 +
                                    s.weights[2] * p.values[2] * z2);
        }
    REQUIRE(t.power >= best - 1e-12);
    REQUIRE(t.power <= best + 1e-2);
  }
}

TEST_CASE("power is nondecreasing and concave in the level") {
  std::mt19937_64 rng(7);
  const SampleSpace s = random_space(rng, 4);
  const Density p = random_density(rng, s);
  const Density q = random_density(rng, s);
  std::vector<double> power;
  const int grid = 40;
  for (int k = 0; k <= grid; ++k)
    power.push_back(most_powerful_test(s, p, q, double(k) / grid).power);
  for (int k = 1; k <= grid; ++k) REQUIRE(power[k] >= power[k - 1] - 1e-12);
  for (int k = 1; k < grid; ++k)
    REQUIRE(power[k] >= 0.5 * (power[k - 1] + power[k + 1]) - 1e-9);
}

TEST_CASE("min_cost_test solves the budgeted LP on random instances") {
  std::mt19937_64 rng(99999);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 3;
    const SampleSpace s = random_space(rng, n);
    const Density p = random_density(rng, s);
    const Density q = random_density(rng, s);
    RandomVariable k1, k2;
    k1.values.resize(n);
    k2.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      k1.values[i] = u01(rng) * 0.5;
      k2.values[i] = k1.values[i] + 0.2 + u01(rng);
    }
    double qrange = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      qrange += s.weights[i] * q.values[i] * (k2.values[i] - k1.values[i]);
    const double b = u01(rng) * qrange * 1.1;

    const RandomVariable x = min_cost_test(s, p, q, b, k1, k2);
    double eq = 0.0, cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(x.values[i] >= k1.values[i] - 1e-12);
      REQUIRE(x.values[i] <= k2.values[i] + 1e-12);
      eq += s.weights[i] * q.values[i] * (k2.values[i] - x.values[i]);
      cost += s.weights[i] * p.values[i] * x.values[i];
    }
    REQUIRE(eq <= b + 1e-10);

    // LP oracle on the same problem, in y = x - k1 >= 0:
    // E_q[k2-x] <= b  <=>  E_q[y] >= E_q[k2-k1] - b
    LpProblem lp;
    lp.c.resize(n);
    LpRow budget;
    budget.a.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      lp.c[i] = s.weights[i] * p.values[i];
      budget.a[i] = s.weights[i] * q.values[i];
    }
    budget.rel = LpRel::ge;
    budget.b = qrange - b;
    lp.rows.push_back(std::move(budget));
    for (std::size_t i = 0; i < n; ++i) {
      LpRow row;
      row.a.assign(n, 0.0);
      row.a[i] = 1.0;
      row.rel = LpRel::le;
      row.b = k2.values[i] - k1.values[i];
      lp.rows.push_back(std::move(row));
    }
    const LpResult r = solve_lp(lp);
    REQUIRE(r.status == LpStatus::optimal);
    double lp_cost = r.value;
    for (std::size_t i = 0; i < n; ++i) lp_cost += s.weights[i] * p.values[i] * k1.values[i];
    REQUIRE(cost == Approx(lp_cost).margin(1e-9));
  }
}
