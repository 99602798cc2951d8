#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "npcvx/errors.hpp"
#include "npcvx/numeric.hpp"

namespace npcvx {

/// Finite sample space: atoms carry strictly positive base weights summing to
/// one (the reference measure). All measures handled by the library are given
/// by densities with respect to this base measure.
struct SampleSpace {
  std::vector<double> weights;
  std::vector<std::string> labels;  // optional, empty or one per atom

  std::size_t size() const { return weights.size(); }
};

/// Radon-Nikodym derivative of a probability measure w.r.t. the base measure:
/// values[i] = dP/dmu at atom i, so sum_i weights[i]*values[i] = 1.
struct Density {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Real-valued random variable on the sample space (one value per atom).
struct RandomVariable {
  std::vector<double> values;

  RandomVariable() = default;
  explicit RandomVariable(std::vector<double> v) : values(std::move(v)) {}
  RandomVariable(std::initializer_list<double> v) : values(v) {}

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

inline void check_dims(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got)
    throw Error(errc::dimension_mismatch,
                std::string(what) + ": expected " + std::to_string(expected) + " entries, got " +
                    std::to_string(got));
}

inline SampleSpace make_space(std::vector<double> weights, std::vector<std::string> labels = {}) {
  if (weights.empty()) throw Error(errc::invalid_argument, "sample space needs at least one atom");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w))
      throw Error(errc::non_positive_weight, "atom weight " + std::to_string(w) + " must be > 0");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > kConstructTol)
    throw Error(errc::not_normalized, "weights sum to " + std::to_string(sum));
  for (double& w : weights) w /= sum;
  if (!labels.empty()) check_dims(weights.size(), labels.size(), "labels");
  return SampleSpace{std::move(weights), std::move(labels)};
}

inline Density make_density(const SampleSpace& space, std::vector<double> values) {
  check_dims(space.size(), values.size(), "density");
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !std::isfinite(values[i]))
      throw Error(errc::invalid_argument, "density value " + std::to_string(values[i]) + " must be >= 0");
    sum += space.weights[i] * values[i];
  }
  if (std::fabs(sum - 1.0) > kConstructTol)
    throw Error(errc::not_normalized, "density integrates to " + std::to_string(sum));
  for (double& v : values) v /= sum;
  return Density{std::move(values)};
}

/// Convenience conversion: atom probabilities -> density w.r.t. the base measure.
inline Density density_from_probabilities(const SampleSpace& space, const std::vector<double>& probs) {
  check_dims(space.size(), probs.size(), "probabilities");
  std::vector<double> values(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) values[i] = probs[i] / space.weights[i];
  return make_density(space, std::move(values));
}

inline std::vector<double> atom_probabilities(const SampleSpace& space, const Density& d) {
  check_dims(space.size(), d.size(), "density");
  std::vector<double> probs(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) probs[i] = space.weights[i] * d.values[i];
  return probs;
}

/// The base measure itself as a density (identically one).
inline Density base_density(const SampleSpace& space) {
  return Density{std::vector<double>(space.size(), 1.0)};
}

/// E_P[X] = sum_i mu_i d_i x_i.
inline double expectation(const SampleSpace& space, const Density& d, const RandomVariable& x) {
  check_dims(space.size(), d.size(), "density");
  check_dims(space.size(), x.size(), "random variable");
  double sum = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) sum += space.weights[i] * d.values[i] * x.values[i];
  return sum;
}

/// Relative entropy of q w.r.t. p in nats, with the conventions 0*ln(0/.) = 0
/// and +infinity whenever q charges an atom p does not. Infinite divergence is
/// a legitimate value here (penalty functions take +infinity off their
/// effective domain), not an error.
inline double kl_divergence(const SampleSpace& space, const Density& q, const Density& p) {
  check_dims(space.size(), q.size(), "density q");
  check_dims(space.size(), p.size(), "density p");
  double sum = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double qi = q.values[i];
    if (qi <= 0.0) continue;
    const double pi = p.values[i];
    if (pi <= 0.0) return kInf;
    sum += space.weights[i] * qi * std::log(qi / pi);
  }
  // Gibbs: exact zero only at q == p; tiny negatives are rounding noise.
  return sum;
}

}  // namespace npcvx
