#pragma once

// Built-in named fixtures usable from the CLI (--example) and the test
// suites. paper-4.1/4.2/4.3 are the two-atom examples with the entropic and
// linear families around Q0/P0; paper-6.1 is the two-block discretization of
// the continuous appendix example; hedge-binomial is the one-period binomial
// market.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "npcvx/hedging.hpp"
#include "npcvx/np_solver.hpp"
#include "npcvx/oracle.hpp"

namespace npcvx {

inline ProblemSpec paper_example_41() {
  SampleSpace s = make_space({0.5, 0.5}, {"0", "1"});
  Density q0 = make_density(s, {1.5, 0.5});
  return ProblemSpec{s,
                     ConvexExpectation::linear(base_density(s)),
                     ConvexExpectation::entropic(std::move(q0), 1.0),
                     RandomVariable{0.0, 0.0},
                     RandomVariable{1.0, 1.0},
                     0.5};
}

inline ProblemSpec paper_example_42() {
  SampleSpace s = make_space({0.5, 0.5}, {"0", "1"});
  Density p0 = make_density(s, {0.5, 1.5});
  return ProblemSpec{s,
                     ConvexExpectation::entropic(std::move(p0), 1.0),
                     ConvexExpectation::linear(base_density(s)),
                     RandomVariable{0.0, 0.0},
                     RandomVariable{1.0, 1.0},
                     std::log(std::numbers::e + 3.0) - 2.0 * std::log(2.0)};
}

inline ProblemSpec paper_example_43() {
  SampleSpace s = make_space({0.5, 0.5}, {"0", "1"});
  Density q0 = make_density(s, {1.5, 0.5});
  Density p0 = make_density(s, {0.5, 1.5});
  return ProblemSpec{s,
                     ConvexExpectation::entropic(std::move(p0), 1.0),
                     ConvexExpectation::entropic(std::move(q0), 1.0),
                     RandomVariable{0.0, 0.0},
                     RandomVariable{1.0, 1.0},
                     std::log(std::numbers::e + 3.0) - 2.0 * std::log(2.0)};
}

inline MarketSpec hedge_binomial_market() {
  SampleSpace s = make_space({0.5, 0.5}, {"up", "down"});
  MarketSpec m;
  m.space = s;
  m.s0 = 1.0;
  m.st = RandomVariable{2.0, 0.5};
  m.claim = RandomVariable{1.0, 0.0};
  m.budget = 1.0 / 6.0;
  m.rho = ConvexExpectation::entropic(base_density(s), 1.0);
  return m;
}

inline std::vector<std::string> builtin_problem_names() {
  return {"paper-4.1", "paper-4.2", "paper-4.3", "paper-6.1"};
}
inline std::vector<std::string> builtin_market_names() { return {"hedge-binomial"}; }

inline std::optional<ProblemSpec> builtin_problem(const std::string& name) {
  if (name == "paper-4.1") return paper_example_41();
  if (name == "paper-4.2") return paper_example_42();
  if (name == "paper-4.3") return paper_example_43();
  if (name == "paper-6.1") return example_61_spec();
  return std::nullopt;
}

inline std::optional<MarketSpec> builtin_market(const std::string& name) {
  if (name == "hedge-binomial") return hedge_binomial_market();
  return std::nullopt;
}

}  // namespace npcvx
