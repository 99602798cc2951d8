// Solve a three-atom testing problem with an entropic objective and print the
// representative pair (Q*, P*) together with the threshold partition of the
// optimal test.

#include <cstdio>

#include "npcvx/npcvx.hpp"

int main() {
  using namespace npcvx;

  SampleSpace space = make_space({0.2, 0.5, 0.3}, {"low", "mid", "high"});
  ProblemSpec spec{space,
                   ConvexExpectation::linear(make_density(space, {1.5, 1.0, 0.666666666666666667})),
                   ConvexExpectation::entropic(make_density(space, {0.5, 0.8, 1.666666666666666667}), 2.0),
                   RandomVariable{0.0, 0.0, 0.0},
                   RandomVariable{1.0, 1.0, 1.0},
                   0.35};

  const Solution sol = solve(spec);

  std::printf("optimal value beta = %.12f   (strategy: %s)\n", sol.beta,
              strategy_name(sol.strategy_used));
  std::printf("gamma_alpha = %.12f, threshold z = %.12f\n", sol.gamma_alpha, sol.z);

  const auto qp = atom_probabilities(space, sol.q_star.density);
  const auto pp = atom_probabilities(space, sol.p_star.value().density);
  const auto ratios = io::solution_ratios(sol);
  std::printf("%-6s %10s %10s %10s %10s %s\n", "atom", "x*", "Q*", "P*", "ratio", "region");
  for (std::size_t i = 0; i < space.size(); ++i)
    std::printf("%-6s %10.6f %10.6f %10.6f %10.6f %s\n", space.labels[i].c_str(),
                sol.x_star.values[i], qp[i], pp[i], ratios[i],
                io::region_label(sol, ratios, i).c_str());

  std::printf("certificates: max residual %.3e\n", sol.certificates.max_applicable());
  return sol.certificates.pass(1e-4) ? 0 : 1;
}
