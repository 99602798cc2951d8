#pragma once

#include <stdexcept>
#include <string>

namespace npcvx {

/// Failure categories. `spec` failures are bad inputs, `solver` failures are
/// numerical (caps exhausted), `certificate` failures mean a computed solution
/// does not satisfy its optimality certificates.
enum class errc {
  non_positive_weight,
  not_normalized,
  dimension_mismatch,
  level_out_of_range,
  infeasible_budget,
  infeasible_spec,
  degenerate_bounds,
  too_large,
  no_emm,
  invalid_argument,
  no_convergence,
  saddle_violation,
  trivial_case,
  structure_violation,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::non_positive_weight: return "NonPositiveWeight";
    case errc::not_normalized: return "NotNormalized";
    case errc::dimension_mismatch: return "DimensionMismatch";
    case errc::level_out_of_range: return "LevelOutOfRange";
    case errc::infeasible_budget: return "InfeasibleBudget";
    case errc::infeasible_spec: return "InfeasibleSpec";
    case errc::degenerate_bounds: return "DegenerateBounds";
    case errc::too_large: return "TooLarge";
    case errc::no_emm: return "NoEmm";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::no_convergence: return "NoConvergence";
    case errc::saddle_violation: return "SaddleViolation";
    case errc::trivial_case: return "TrivialCase";
    case errc::structure_violation: return "StructureViolation";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

  /// True for errors caused by invalid input rather than solver behavior.
  bool is_input_error() const noexcept {
    switch (code_) {
      case errc::no_convergence:
      case errc::saddle_violation:
      case errc::trivial_case:
      case errc::structure_violation:
        return false;
      default:
        return true;
    }
  }

 private:
  errc code_;
};

}  // namespace npcvx
