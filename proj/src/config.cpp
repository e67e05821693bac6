#include "eoc/config.hpp"

#include <cmath>
#include <string>

#include "eoc/errors.hpp"

namespace eoc {

Ensemble ensemble_from_name(std::string_view name) {
  if (name == "gaussian" || name == "lowrank_gaussian") return Ensemble::lowrank_gaussian;
  if (name == "orthogonal" || name == "lowrank_orthogonal") return Ensemble::lowrank_orthogonal;
  throw DomainError("unknown ensemble '" + std::string(name) + "'");
}

std::string_view ensemble_name(Ensemble e) noexcept {
  return e == Ensemble::lowrank_gaussian ? "gaussian" : "orthogonal";
}

int NetworkConfig::rank() const noexcept { return static_cast<int>(std::lround(gamma * width)); }

void validate_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in (0, 1], got " + std::to_string(gamma));
}

void NetworkConfig::validate() const {
  validate_gamma(gamma);
  if (!(sigma_alpha2 >= 0.0) || !std::isfinite(sigma_alpha2)) throw DomainError("sigma_alpha2 must be finite and >= 0");
  if (!(sigma_b2 >= 0.0) || !std::isfinite(sigma_b2)) throw DomainError("sigma_b2 must be finite and >= 0");
  if (depth < 1) throw DomainError("depth must be >= 1");
  if (width < 1) throw DomainError("width must be >= 1");
  const int r = rank();
  if (r < 1 || r > width) {
    throw DomainError("rank round(gamma * width) = " + std::to_string(r) + " outside [1, width]");
  }
}

NetworkConfig NetworkConfig::rescaled_to_full_rank() const {
  NetworkConfig out = *this;
  out.gamma = 1.0;
  out.sigma_alpha2 = weight_variance();
  out.sigma_b2 = bias_variance();
  return out;
}

NetworkConfig NetworkConfig::with_effective_variances(double wv, double bv) const {
  NetworkConfig out = *this;
  out.sigma_alpha2 = wv / gamma;
  out.sigma_b2 = bv / gamma;
  return out;
}

} // namespace eoc
