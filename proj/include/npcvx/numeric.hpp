#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace npcvx {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Normalization tolerances: loose at construction (inputs are renormalized
// when within kConstructTol), tight on internal re-checks.
inline constexpr double kConstructTol = 1e-9;
inline constexpr double kRecheckTol = 1e-10;

/// Round to `digits` significant decimal digits. Used to group floating-point
/// likelihood ratios into exact-tie equivalence classes.
inline double round_sig(double x, int digits) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  const double mag = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::fabs(x)))));
  return std::round(x * mag) / mag;
}

inline double clamp(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

inline std::vector<double> clamp(const std::vector<double>& x, const std::vector<double>& lo,
                                 const std::vector<double>& hi) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = clamp(x[i], lo[i], hi[i]);
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace npcvx
