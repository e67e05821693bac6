#pragma once

#include <string>
#include <string_view>

#include "eoc/activations.hpp"

namespace eoc {

enum class Ensemble { lowrank_gaussian, lowrank_orthogonal };

Ensemble ensemble_from_name(std::string_view name);
std::string_view ensemble_name(Ensemble e) noexcept;

/// Hyperparameters of a constant-width low-rank network.
///
/// Each layer's weight matrix has rank r = round(gamma * width). The analytic
/// theory only ever sees the products gamma * sigma_alpha2 and gamma * sigma_b2,
/// exposed as weight_variance() and bias_variance().
struct NetworkConfig {
  double gamma = 1.0;
  double sigma_alpha2 = 1.0;
  double sigma_b2 = 0.0;
  int depth = 1;
  int width = 1000;
  ActivationFamily activation{Activation::tanh};
  Ensemble ensemble = Ensemble::lowrank_gaussian;

  double weight_variance() const noexcept { return gamma * sigma_alpha2; }
  double bias_variance() const noexcept { return gamma * sigma_b2; }

  int rank() const noexcept;

  /// Throws DomainError when any invariant is violated.
  void validate() const;

  /// Same network expressed with gamma = 1 and the variances absorbed.
  NetworkConfig rescaled_to_full_rank() const;

  /// Config with the given effective variances (gamma * sigma^2) at this gamma.
  NetworkConfig with_effective_variances(double weight_variance, double bias_variance) const;
};

void validate_gamma(double gamma);

} // namespace eoc
