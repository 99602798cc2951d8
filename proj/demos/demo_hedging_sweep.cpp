// Sweep the initial budget of a trinomial market from zero to the
// superhedging price and print the shortfall-risk frontier.

#include <cstdio>

#include "npcvx/npcvx.hpp"

int main() {
  using namespace npcvx;

  SampleSpace space = make_space({0.3, 0.4, 0.3}, {"down", "flat", "up"});
  MarketSpec market;
  market.space = space;
  market.s0 = 1.0;
  market.st = RandomVariable{0.5, 1.0, 2.0};
  market.claim = RandomVariable{0.0, 0.2, 1.0};
  market.rho = ConvexExpectation::entropic(base_density(space), 1.5);

  market.budget = 0.0;
  const double u0 = superhedge_price(market, market.claim);
  std::printf("superhedging price of the claim: %.9f\n", u0);
  std::printf("%10s %14s %10s %10s %10s\n", "budget", "shortfall", "x0", "h", "z");

  for (int k = 0; k <= 10; ++k) {
    market.budget = u0 * k / 10.0;
    const HedgeResult r = solve_shortfall(market);
    std::printf("%10.6f %14.9f %10.6f %10.6f %10.6f\n", market.budget, r.shortfall_risk, r.x0, r.h,
                r.z);
  }
  return 0;
}
