#pragma once

// JSON config parsing and report emission. Reports use ordered keys and
// nlohmann's shortest-round-trip number formatting, so identical inputs
// produce byte-identical machine output. Infinite values (z, penalties) are
// encoded as the strings "inf"/"-inf" since JSON has no infinity literal.

#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "npcvx/errors.hpp"
#include "npcvx/hedging.hpp"
#include "npcvx/np_solver.hpp"
#include "npcvx/oracle.hpp"

namespace npcvx::io {

using json = nlohmann::ordered_json;

inline json encode_real(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

inline double decode_real(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    throw Error(errc::invalid_argument, "expected a number, got \"" + s + "\"");
  }
  return j.get<double>();
}

inline std::vector<double> decode_reals(const json& j) {
  if (!j.is_array()) throw Error(errc::invalid_argument, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) out.push_back(decode_real(v));
  return out;
}

// ---- configs ----

inline SampleSpace space_from_json(const json& j) {
  if (!j.contains("weights")) throw Error(errc::invalid_argument, "space needs \"weights\"");
  std::vector<std::string> labels;
  if (j.contains("labels")) labels = j.at("labels").get<std::vector<std::string>>();
  return make_space(decode_reals(j.at("weights")), std::move(labels));
}

/// A density is {"values": [...]} (w.r.t. the base measure) or
/// {"values": [...], "as": "probabilities"} (atom probabilities, converted),
/// or a bare array treated as density values.
inline Density density_from_json(const SampleSpace& space, const json& j) {
  if (j.is_array()) return make_density(space, decode_reals(j));
  const std::vector<double> values = decode_reals(j.at("values"));
  if (j.value("as", std::string("density")) == "probabilities")
    return density_from_probabilities(space, values);
  return make_density(space, values);
}

inline ConvexExpectation risk_from_json(const SampleSpace& space, const json& j) {
  const std::string family = j.at("family").get<std::string>();
  if (family == "linear") return ConvexExpectation::linear(density_from_json(space, j.at("base")));
  if (family == "entropic")
    return ConvexExpectation::entropic(density_from_json(space, j.at("base")),
                                       decode_real(j.at("theta")));
  if (family == "finitely_generated") {
    std::vector<Generator> gens;
    const json& gj = j.at("generators");
    std::vector<double> penalties;
    if (j.contains("penalties")) penalties = decode_reals(j.at("penalties"));
    for (std::size_t k = 0; k < gj.size(); ++k) {
      Generator g;
      if (gj[k].is_object() && gj[k].contains("penalty")) {
        g.penalty = decode_real(gj[k].at("penalty"));
        g.density = density_from_json(space, gj[k].contains("density") ? gj[k].at("density") : gj[k]);
      } else {
        g.density = density_from_json(space, gj[k]);
        g.penalty = k < penalties.size() ? penalties[k] : 0.0;
      }
      gens.push_back(std::move(g));
    }
    return ConvexExpectation::finitely_generated(std::move(gens));
  }
  throw Error(errc::invalid_argument, "unknown risk family \"" + family + "\"");
}

inline json density_to_json(const Density& d) {
  json j;
  j["values"] = d.values;
  return j;
}

inline json risk_to_json(const ConvexExpectation& rho) {
  json j;
  switch (rho.kind()) {
    case RiskFamily::linear:
      j["family"] = "linear";
      j["base"] = density_to_json(rho.as_finitely_generated().generators.front().density);
      break;
    case RiskFamily::entropic:
      j["family"] = "entropic";
      j["base"] = density_to_json(rho.as_entropic().base);
      j["theta"] = rho.as_entropic().theta;
      break;
    case RiskFamily::finitely_generated: {
      j["family"] = "finitely_generated";
      json gens = json::array();
      for (const auto& g : rho.as_finitely_generated().generators) {
        json gj = density_to_json(g.density);
        gj["penalty"] = g.penalty;
        gens.push_back(std::move(gj));
      }
      j["generators"] = std::move(gens);
      break;
    }
  }
  return j;
}

inline ProblemSpec problem_from_json(const json& j) {
  ProblemSpec spec;
  spec.space = space_from_json(j.at("space"));
  spec.rho1 = risk_from_json(spec.space, j.at("rho1"));
  spec.rho2 = risk_from_json(spec.space, j.at("rho2"));
  spec.k1 = RandomVariable{decode_reals(j.at("k1"))};
  spec.k2 = RandomVariable{decode_reals(j.at("k2"))};
  spec.alpha = decode_real(j.at("alpha"));
  spec.validate();
  return spec;
}

inline json problem_to_json(const ProblemSpec& spec) {
  json j;
  j["space"] = json{{"weights", spec.space.weights}};
  if (!spec.space.labels.empty()) j["space"]["labels"] = spec.space.labels;
  j["rho1"] = risk_to_json(spec.rho1);
  j["rho2"] = risk_to_json(spec.rho2);
  j["k1"] = spec.k1.values;
  j["k2"] = spec.k2.values;
  j["alpha"] = spec.alpha;
  return j;
}

inline MarketSpec market_from_json(const json& j) {
  MarketSpec m;
  m.space = space_from_json(j.at("space"));
  m.s0 = decode_real(j.at("s0"));
  m.st = RandomVariable{decode_reals(j.at("st"))};
  m.claim = RandomVariable{decode_reals(j.at("claim"))};
  m.budget = decode_real(j.at("budget"));
  m.rho = risk_from_json(m.space, j.at("rho"));
  m.validate();
  return m;
}

inline json market_to_json(const MarketSpec& m) {
  json j;
  j["space"] = json{{"weights", m.space.weights}};
  if (!m.space.labels.empty()) j["space"]["labels"] = m.space.labels;
  j["s0"] = m.s0;
  j["st"] = m.st.values;
  j["claim"] = m.claim.values;
  j["budget"] = m.budget;
  j["rho"] = risk_to_json(m.rho);
  return j;
}

// ---- reports ----

inline json residual_to_json(const Residual& r) {
  json j;
  j["value"] = encode_real(r.value);
  j["applicable"] = r.applicable;
  j["reason"] = r.reason;
  return j;
}

inline Residual residual_from_json(const json& j) {
  Residual r;
  r.value = decode_real(j.at("value"));
  r.applicable = j.at("applicable").get<bool>();
  r.reason = j.at("reason").get<std::string>();
  return r;
}

inline json certificates_to_json(const CertificateReport& c) {
  json j;
  j["primal_feasibility"] = residual_to_json(c.primal_feasibility);
  j["q_attainment"] = residual_to_json(c.q_attainment);
  j["q_saddle"] = residual_to_json(c.q_saddle);
  j["alpha_tightness"] = residual_to_json(c.alpha_tightness);
  j["p_attainment"] = residual_to_json(c.p_attainment);
  j["p_saddle"] = residual_to_json(c.p_saddle);
  j["minimax_gap"] = residual_to_json(c.minimax_gap);
  j["structure_violation"] = residual_to_json(c.structure_violation);
  return j;
}

inline CertificateReport certificates_from_json(const json& j) {
  CertificateReport c;
  c.primal_feasibility = residual_from_json(j.at("primal_feasibility"));
  c.q_attainment = residual_from_json(j.at("q_attainment"));
  c.q_saddle = residual_from_json(j.at("q_saddle"));
  c.alpha_tightness = residual_from_json(j.at("alpha_tightness"));
  c.p_attainment = residual_from_json(j.at("p_attainment"));
  c.p_saddle = residual_from_json(j.at("p_saddle"));
  c.minimax_gap = residual_from_json(j.at("minimax_gap"));
  c.structure_violation = residual_from_json(j.at("structure_violation"));
  return c;
}

inline json supergradient_to_json(const SampleSpace& space, const Supergradient& sg) {
  json j;
  j["density"] = sg.density.values;
  j["atom_probabilities"] = atom_probabilities(space, sg.density);
  j["penalty"] = encode_real(sg.penalty);
  return j;
}

/// Likelihood ratio H_{Q*}/G_{P*} per atom with the usual conventions; used
/// by the CSV and report region labels. Without P* the trivial-case partition
/// (z = 0) applies.
inline std::vector<double> solution_ratios(const Solution& sol) {
  std::vector<double> r(sol.x_star.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double h = sol.q_star.density.values[i];
    if (sol.p_star.has_value()) {
      const double g = sol.p_star->density.values[i];
      r[i] = g > 0.0 ? h / g : (h > 0.0 ? kInf : 0.0);
    } else {
      r[i] = h > 0.0 ? kInf : 0.0;
    }
  }
  return r;
}

inline std::string region_label(const Solution& sol, const std::vector<double>& ratios,
                                std::size_t i) {
  if (sol.boundary_values.count(i)) return "boundary";
  return ratios[i] > sol.z ? "upper" : "lower";
}

inline json solution_to_json(const ProblemSpec& spec, const Solution& sol) {
  json j;
  j["beta"] = sol.beta;
  j["x_star"] = sol.x_star.values;
  j["gamma_alpha"] = sol.gamma_alpha;
  j["q_star"] = supergradient_to_json(spec.space, sol.q_star);
  j["p_star"] = sol.p_star.has_value() ? supergradient_to_json(spec.space, *sol.p_star) : json(nullptr);
  j["z"] = encode_real(sol.z);
  json bnd = json::object();
  for (const auto& [atom, value] : sol.boundary_values) bnd[std::to_string(atom)] = value;
  j["boundary"] = std::move(bnd);
  j["warnings"] = sol.warnings;
  return j;
}

inline json solve_report(const ProblemSpec& spec, const Solution& sol, double tol, unsigned seed) {
  json j;
  j["kind"] = "solve_report";
  j["problem"] = problem_to_json(spec);
  j["solver"] = json{{"strategy", strategy_name(sol.strategy_used)},
                     {"iterations", sol.iterations},
                     {"tol", tol},
                     {"seed", seed}};
  j["solution"] = solution_to_json(spec, sol);
  j["certificates"] = certificates_to_json(sol.certificates);
  j["max_residual"] = sol.certificates.max_applicable();
  j["pass"] = sol.certificates.pass(tol);
  j["tol"] = tol;
  return j;
}

/// Rebuild (spec, solution) from an emitted report, for re-validation.
inline std::pair<ProblemSpec, Solution> solve_report_parse(const json& j) {
  if (j.value("kind", std::string()) != "solve_report")
    throw Error(errc::invalid_argument, "not a solve_report");
  ProblemSpec spec = problem_from_json(j.at("problem"));
  Solution sol;
  const json& s = j.at("solution");
  sol.beta = decode_real(s.at("beta"));
  sol.x_star = RandomVariable{decode_reals(s.at("x_star"))};
  sol.gamma_alpha = decode_real(s.at("gamma_alpha"));
  sol.q_star = Supergradient{Density{decode_reals(s.at("q_star").at("density"))},
                             decode_real(s.at("q_star").at("penalty"))};
  if (!s.at("p_star").is_null())
    sol.p_star = Supergradient{Density{decode_reals(s.at("p_star").at("density"))},
                               decode_real(s.at("p_star").at("penalty"))};
  sol.z = decode_real(s.at("z"));
  for (const auto& [key, value] : s.at("boundary").items())
    sol.boundary_values[std::stoul(key)] = decode_real(value);
  const std::string strat = j.at("solver").at("strategy").get<std::string>();
  sol.strategy_used = strat == "lp" ? SolveStrategy::lp : SolveStrategy::subgradient;
  sol.iterations = j.at("solver").at("iterations").get<long>();
  sol.certificates = certificates_from_json(j.at("certificates"));
  return {std::move(spec), std::move(sol)};
}

/// X* as CSV: atom_index,k1,k2,x_star,ratio,region.
inline std::string solution_csv(const ProblemSpec& spec, const Solution& sol) {
  const auto ratios = solution_ratios(sol);
  std::ostringstream out;
  out.precision(17);
  out << "atom_index,k1,k2,x_star,ratio,region\n";
  for (std::size_t i = 0; i < spec.space.size(); ++i) {
    out << i << ',' << spec.k1.values[i] << ',' << spec.k2.values[i] << ',' << sol.x_star.values[i]
        << ',';
    if (std::isinf(ratios[i]))
      out << "inf";
    else
      out << ratios[i];
    out << ',' << region_label(sol, ratios, i) << '\n';
  }
  return out.str();
}

inline json hedge_report(const MarketSpec& market, const HedgeResult& r, double tol, unsigned seed) {
  json j;
  j["kind"] = "hedge_report";
  j["market"] = market_to_json(market);
  j["result"] = json{{"u0", r.u0},
                     {"budget", market.budget},
                     {"full_hedge", r.full_hedge},
                     {"degenerate", r.degenerate},
                     {"xt_star", r.xt_star.values},
                     {"z", encode_real(r.z)},
                     {"b", r.b},
                     {"x0", r.x0},
                     {"h", r.h},
                     {"shortfall_risk", r.shortfall_risk},
                     {"warnings", r.warnings}};
  if (r.solution.has_value()) {
    j["solver"] = json{{"strategy", strategy_name(r.solution->strategy_used)},
                       {"iterations", r.solution->iterations},
                       {"tol", tol},
                       {"seed", seed}};
    j["result"]["q_star"] = supergradient_to_json(market.space, r.solution->q_star);
    j["result"]["p_star"] = r.solution->p_star.has_value()
                                ? supergradient_to_json(market.space, *r.solution->p_star)
                                : json(nullptr);
    j["certificates"] = certificates_to_json(r.solution->certificates);
    j["max_residual"] = r.solution->certificates.max_applicable();
    j["pass"] = r.solution->certificates.pass(tol);
  } else {
    j["pass"] = true;  // full hedge or degenerate short-circuit: nothing to certify
  }
  j["tol"] = tol;
  return j;
}

}  // namespace npcvx::io
