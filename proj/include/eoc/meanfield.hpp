#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "eoc/config.hpp"
#include "eoc/quadrature.hpp"
#include "eoc/trajectory.hpp"

// Infinite-width signal propagation for low-rank networks.
//
// Every map depends on (gamma, sigma_alpha2, sigma_b2) only through the
// effective variances gamma*sigma_alpha2 and gamma*sigma_b2, so a low-rank
// network is the full-rank network with sigma_W^2 = gamma*sigma_alpha2 and
// sigma_b^2 -> gamma*sigma_b2.

namespace eoc {

enum class Phase { ordered, critical, chaotic };

std::string_view phase_name(Phase p) noexcept;

/// chi within `tolerance` of one is reported as critical.
Phase classify_phase(double chi, double tolerance = 1e-8) noexcept;

struct SolverOptions {
  double tolerance = 1e-10;
  int max_iter = 10'000;
  /// Undamped Picard steps before the 0.5 damping factor is switched on.
  int undamped_iter = 200;
};

struct QStarSolution {
  double q_star = 0.0;
  int iterations = 0;
  double residual = 0.0;  ///< |V(q_star) - q_star|
};

struct CStarSolution {
  double c_star = 1.0;
  int iterations = 0;
  double residual = 0.0;  ///< |corr(c_star) - c_star|
};

struct FixedPointReport {
  double q_star = 0.0;
  double c_star = 1.0;
  double chi = 0.0;
  int iterations = 0;
  double residual = 0.0;
  int c_iterations = 0;
  double c_residual = 0.0;
  Phase phase = Phase::ordered;
};

struct DepthScales {
  double xi_q = 0.0;
  double xi_c = 0.0;
  double xi_grad = 0.0;
};

struct EocPoint {
  double q_star = 0.0;
  double gamma_sigma_alpha2 = 0.0;
  double gamma_sigma_b2 = 0.0;
  double sigma_alpha2 = 0.0;  ///< unscaled, at the curve's gamma
  double sigma_b2 = 0.0;
};

/// q^l = gamma (sigma_alpha2 int phi(sqrt(q_prev) z)^2 Dz + sigma_b2).
double length_map(const NetworkConfig& cfg, double q_prev, const GaussHermiteRule& rule = default_rule());

/// Next-layer covariance of two inputs with lengths q11, q22 and covariance q12.
double covariance_map(const NetworkConfig& cfg, double q11, double q22, double q12,
                      const GaussHermiteRule& rule = default_rule());

/// covariance_map(q*, q*, c q*) / q*. Exactly 1 at c = 1.
double correlation_map(const NetworkConfig& cfg, double q_star, double c_prev,
                       const GaussHermiteRule& rule = default_rule());

/// Picard iteration of length_map from q_init. Throws NoConvergence.
QStarSolution solve_q_star(const NetworkConfig& cfg, double q_init = 1.0, const SolverOptions& opts = {},
                           const GaussHermiteRule& rule = default_rule());

/// chi_gamma = gamma sigma_alpha2 int phi'(sqrt(q*) z)^2 Dz.
double chi(const NetworkConfig& cfg, double q_star, const GaussHermiteRule& rule = default_rule());

/// Stable fixed point of the correlation map: 1 when chi <= 1, otherwise the
/// interior point reached by iterating from c = 0.
CStarSolution solve_c_star(const NetworkConfig& cfg, double q_star, const SolverOptions& opts = {},
                           const GaussHermiteRule& rule = default_rule());

/// q*, chi and c* together. When q* = 0 the correlation map is undefined and
/// c* is reported as 1 if chi <= 1 and NaN otherwise.
FixedPointReport solve_fixed_point(const NetworkConfig& cfg, double q_init = 1.0, const SolverOptions& opts = {},
                                   const GaussHermiteRule& rule = default_rule());

/// Edge-of-chaos curve parametrised by q*. Points with a negative bias
/// variance are dropped and runs of identical (gamma sigma_alpha2,
/// gamma sigma_b2) points collapse to the first one.
std::vector<EocPoint> eoc_curve(ActivationFamily activation, double gamma, std::span<const double> q_grid,
                                const GaussHermiteRule& rule = default_rule());

/// The critical point with fixed point q_star, if its bias variance is >= 0.
std::optional<EocPoint> eoc_point(ActivationFamily activation, double gamma, double q_star,
                                  const GaussHermiteRule& rule = default_rule());

/// Length, correlation and gradient depth scales at q_star; +inf when the
/// relevant slope equals one.
///
/// xi_c = xi_grad = -1/log(chi) in the ordered phase. In the chaotic phase the
/// correlation relaxes towards the interior c*, so xi_c uses the slope of the
/// correlation map at c*, and xi_grad reports the growth length 1/log(chi).
DepthScales depth_scales(const NetworkConfig& cfg, double q_star, const GaussHermiteRule& rule = default_rule());

/// Slope of the correlation map at c: gamma sigma_alpha2 int int phi'(u1) phi'(u2).
double correlation_slope(const NetworkConfig& cfg, double q_star, double c,
                         const GaussHermiteRule& rule = default_rule());

/// Ratios q~^l / q~^L = chi^(L - l) for l in [first_layer, last_layer]
/// with L = cfg.depth.
TrajectoryRecord gradient_norm_theory(const NetworkConfig& cfg, double q_star, int first_layer, int last_layer,
                                      const GaussHermiteRule& rule = default_rule());

/// Effective weight variance gamma*sigma_alpha2 at which the network with
/// effective bias variance `bias_variance` has chi equal to target_chi.
double weight_variance_for_chi(ActivationFamily activation, double bias_variance, double target_chi,
                               const GaussHermiteRule& rule = default_rule());

} // namespace eoc
