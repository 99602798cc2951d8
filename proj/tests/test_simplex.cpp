#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "npcvx/simplex.hpp"

using namespace npcvx;
using Catch::Approx;

TEST_CASE("basic LP with mixed relations") {
  // min -x0 - 2 x1  s.t.  x0 + x1 <= 4, x0 <= 2, x1 <= 3
  LpProblem p;
  p.c = {-1.0, -2.0};
  p.rows.push_back({{1.0, 1.0}, LpRel::le, 4.0});
  p.rows.push_back({{1.0, 0.0}, LpRel::le, 2.0});
  p.rows.push_back({{0.0, 1.0}, LpRel::le, 3.0});
  const LpResult r = solve_lp(p);
  REQUIRE(r.status == LpStatus::optimal);
  REQUIRE(r.value == Approx(-7.0));
  REQUIRE(r.x[0] == Approx(1.0));
  REQUIRE(r.x[1] == Approx(3.0));

  // strong duality: value = dual'b, with sign conventions per relation
  double dual_val = 0.0;
  for (std::size_t i = 0; i < p.rows.size(); ++i) dual_val += r.dual[i] * p.rows[i].b;
  REQUIRE(dual_val == Approx(r.value).margin(1e-9));
  for (std::size_t i = 0; i < p.rows.size(); ++i) REQUIRE(r.dual[i] <= 1e-12);
}

TEST_CASE("equality and ge rows, phase-1 feasibility") {
  // min x0 + x1  s.t.  x0 + x1 = 1, x0 >= 0.25
  LpProblem p;
  p.c = {1.0, 1.0};
  p.rows.push_back({{1.0, 1.0}, LpRel::eq, 1.0});
  p.rows.push_back({{1.0, 0.0}, LpRel::ge, 0.25});
  const LpResult r = solve_lp(p);
  REQUIRE(r.status == LpStatus::optimal);
  REQUIRE(r.value == Approx(1.0));
  double dual_val = r.dual[0] * 1.0 + r.dual[1] * 0.25;
  REQUIRE(dual_val == Approx(1.0).margin(1e-9));
}

TEST_CASE("infeasible and unbounded detection") {
  LpProblem inf;
  inf.c = {1.0};
  inf.rows.push_back({{1.0}, LpRel::ge, 2.0});
  inf.rows.push_back({{1.0}, LpRel::le, 1.0});
  REQUIRE(solve_lp(inf).status == LpStatus::infeasible);

  LpProblem unb;
  unb.c = {-1.0};
  unb.rows.push_back({{-1.0}, LpRel::le, 1.0});
  REQUIRE(solve_lp(unb).status == LpStatus::unbounded);
}

TEST_CASE("negative rhs handled through row normalization") {
  // min x0  s.t.  -x0 <= -2   (i.e. x0 >= 2)
  LpProblem p;
  p.c = {1.0};
  p.rows.push_back({{-1.0}, LpRel::le, -2.0});
  const LpResult r = solve_lp(p);
  REQUIRE(r.status == LpStatus::optimal);
  REQUIRE(r.value == Approx(2.0));
  REQUIRE(r.dual[0] * p.rows[0].b == Approx(2.0).margin(1e-9));
}

TEST_CASE("random bounded LPs satisfy strong duality and feasibility") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> upos(0.2, 1.5);
  int solved = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng() % 4;
    const std::size_t m = 1 + rng() % 4;
    LpProblem p;
    p.c.resize(n);
    for (auto& c : p.c) c = u(rng);
    for (std::size_t i = 0; i < m; ++i) {
      LpRow row;
      row.a.resize(n);
      for (auto& a : row.a) a = u(rng);
      row.rel = LpRel::le;
      row.b = u(rng);
      p.rows.push_back(std::move(row));
    }
    // box rows keep it bounded and feasible checks meaningful
    for (std::size_t j = 0; j < n; ++j) {
      LpRow row;
      row.a.assign(n, 0.0);
      row.a[j] = 1.0;
      row.rel = LpRel::le;
      row.b = upos(rng);
      p.rows.push_back(std::move(row));
    }
    const LpResult r = solve_lp(p);
    if (r.status != LpStatus::optimal) continue;  // some are infeasible by construction
    ++solved;
    // primal feasibility
    for (const auto& row : p.rows) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < n; ++j) lhs += row.a[j] * r.x[j];
      REQUIRE(lhs <= row.b + 1e-8);
    }
    for (double xj : r.x) REQUIRE(xj >= -1e-10);
    // strong duality
    double dual_val = 0.0;
    for (std::size_t i = 0; i < p.rows.size(); ++i) dual_val += r.dual[i] * p.rows[i].b;
    REQUIRE(dual_val == Approx(r.value).margin(1e-7));
    // complementary slackness
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
      double lhs = 0.0;
      for (std::size_t j = 0; j < n; ++j) lhs += p.rows[i].a[j] * r.x[j];
      REQUIRE(std::fabs(r.dual[i] * (lhs - p.rows[i].b)) <= 1e-7);
    }
  }
  REQUIRE(solved > 100);
}
