#include "eoc/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "eoc/errors.hpp"

namespace eoc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDivergence = 1e300;

double phi_squared_integral(ActivationFamily phi, double q, const GaussHermiteRule& rule) {
  const double s = std::sqrt(q);
  return gauss_1d(rule, [&](double z) {
    const double v = phi.value(s * z);
    return v * v;
  });
}

double dphi_moment(ActivationFamily phi, double q, int power, const GaussHermiteRule& rule) {
  const double s = std::sqrt(q);
  return gauss_1d(rule, [&](double z) { return std::pow(phi.first(s * z), 2 * power); });
}

double covariance_at_correlation(const NetworkConfig& cfg, double q11, double q22, double c,
                                 const GaussHermiteRule& rule) {
  const auto phi = cfg.activation;
  const double cross = gauss_2d_correlated(
      rule, [&](double u1, double u2) { return phi.value(u1) * phi.value(u2); }, q11, q22, c);
  return cfg.weight_variance() * cross + cfg.bias_variance();
}

// e-folding length of a perturbation multiplied by `slope` each layer.
double scale_from_slope(double slope, const char* what) {
  if (!(slope > 0.0)) {
    throw NonPositiveLogArgument(std::string(what) + ": log argument " + std::to_string(slope) + " is not positive",
                                 slope);
  }
  const double log_slope = std::log(slope);
  if (log_slope == 0.0) return kInf;
  return 1.0 / std::abs(log_slope);
}

void require_positive_q_star(double q_star, const char* what) {
  if (!(q_star > 0.0) || !std::isfinite(q_star)) {
    throw DomainError(std::string(what) + ": q_star must be positive and finite");
  }
}

} // namespace

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::ordered: return "ordered";
    case Phase::critical: return "critical";
    case Phase::chaotic: return "chaotic";
  }
  return "?";
}

Phase classify_phase(double chi_value, double tolerance) noexcept {
  if (std::abs(chi_value - 1.0) <= tolerance) return Phase::critical;
  return chi_value < 1.0 ? Phase::ordered : Phase::chaotic;
}

double length_map(const NetworkConfig& cfg, double q_prev, const GaussHermiteRule& rule) {
  if (!(q_prev >= 0.0)) throw DomainError("length_map: q_prev must be >= 0");
  return cfg.weight_variance() * phi_squared_integral(cfg.activation, q_prev, rule) + cfg.bias_variance();
}

double covariance_map(const NetworkConfig& cfg, double q11, double q22, double q12, const GaussHermiteRule& rule) {
  if (!(q11 > 0.0) || !(q22 > 0.0)) throw DomainError("covariance_map: q11 and q22 must be positive");
  const double norm = std::sqrt(q11 * q22);
  double c = q12 / norm;
  if (!(std::abs(c) <= 1.0 + 1e-12)) throw DomainError("covariance_map: |q12| exceeds sqrt(q11 q22)");
  c = std::clamp(c, -1.0, 1.0);
  return covariance_at_correlation(cfg, q11, q22, c, rule);
}

double correlation_map(const NetworkConfig& cfg, double q_star, double c_prev, const GaussHermiteRule& rule) {
  require_positive_q_star(q_star, "correlation_map");
  if (!(std::abs(c_prev) <= 1.0)) throw DomainError("correlation_map: |c_prev| must not exceed 1");
  if (c_prev == 1.0) return 1.0;
  return covariance_at_correlation(cfg, q_star, q_star, c_prev, rule) / q_star;
}

double chi(const NetworkConfig& cfg, double q_star, const GaussHermiteRule& rule) {
  if (!(q_star >= 0.0)) throw DomainError("chi: q_star must be >= 0");
  return cfg.weight_variance() * dphi_moment(cfg.activation, q_star, 1, rule);
}

double correlation_slope(const NetworkConfig& cfg, double q_star, double c, const GaussHermiteRule& rule) {
  require_positive_q_star(q_star, "correlation_slope");
  const auto phi = cfg.activation;
  return cfg.weight_variance() *
         gauss_2d_correlated(rule, [&](double u1, double u2) { return phi.first(u1) * phi.first(u2); }, q_star,
                             q_star, c);
}

QStarSolution solve_q_star(const NetworkConfig& cfg, double q_init, const SolverOptions& opts,
                           const GaussHermiteRule& rule) {
  cfg.validate();
  if (!(opts.tolerance > 0.0)) throw DomainError("solve_q_star: tolerance must be positive");
  if (!(q_init >= 0.0) || !std::isfinite(q_init)) throw DomainError("solve_q_star: q_init must be finite and >= 0");
  if (q_init == 0.0 && cfg.sigma_b2 > 0.0) throw DomainError("solve_q_star: q_init must be positive when sigma_b2 > 0");

  const auto phi = cfg.activation;
  if (cfg.bias_variance() == 0.0 && phi.is_smooth() && phi.value(0.0) == 0.0) {
    // Without bias the origin is a fixed point. It attracts everything when
    // the slope there is below one, and also at slope one for activations that
    // bend below their tangent, where Picard would only creep in like 1/l.
    const double slope = cfg.weight_variance() * phi.first(0.0) * phi.first(0.0);
    if (slope < 1.0 || (slope == 1.0 && phi.strictly_sublinear())) return {0.0, 0, 0.0};
  }

  double q = q_init;
  double residual = kInf;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const double next = length_map(cfg, q, rule);
    if (!std::isfinite(next) || next > kDivergence) {
      throw NoConvergence("solve_q_star: length map diverges (no finite fixed point)", it, next, kInf);
    }
    residual = std::abs(next - q);
    if (residual <= opts.tolerance) return {q, it, residual};
    const double step = it > opts.undamped_iter ? 0.5 : 1.0;
    q += step * (next - q);
  }
  throw NoConvergence("solve_q_star: no convergence after " + std::to_string(opts.max_iter) + " iterations",
                      opts.max_iter, q, residual);
}

CStarSolution solve_c_star(const NetworkConfig& cfg, double q_star, const SolverOptions& opts,
                           const GaussHermiteRule& rule) {
  require_positive_q_star(q_star, "solve_c_star");
  if (chi(cfg, q_star, rule) <= 1.0) return {1.0, 0, 0.0};

  auto gap = [&](double c) { return correlation_map(cfg, q_star, c, rule) - c; };

  // Picard from c = 0. The map is increasing, so the iterates climb
  // monotonically towards the first fixed point above 0.
  double c = 0.0;
  double residual = kInf;
  constexpr int kPicardBudget = 500;
  const int picard_iters = std::min(kPicardBudget, opts.max_iter);
  for (int it = 1; it <= picard_iters; ++it) {
    const double next = correlation_map(cfg, q_star, c, rule);
    residual = std::abs(next - c);
    if (residual <= opts.tolerance) return {c, it, residual};
    c = next;
  }

  // Near criticality the contraction rate approaches one; finish with a
  // bracketed solve between the last iterate and 1.
  const double g_lo = gap(c);
  if (!(g_lo > 0.0)) {
    throw NoConvergence("solve_c_star: Picard iteration stalled", picard_iters, c, residual);
  }
  double hi = c;
  double g_hi = g_lo;
  for (int k = 1; k <= 60 && g_hi > 0.0; ++k) {
    hi = 1.0 - (1.0 - c) * std::ldexp(1.0, -k);
    g_hi = gap(hi);
  }
  if (!(g_hi < 0.0)) {
    throw NoConvergence("solve_c_star: could not bracket the interior fixed point", picard_iters, c, g_lo);
  }

  std::uintmax_t max_iter = static_cast<std::uintmax_t>(std::max(1, opts.max_iter - picard_iters));
  const auto [a, b] = boost::math::tools::toms748_solve(
      gap, c, hi, g_lo, g_hi, boost::math::tools::eps_tolerance<double>(48), max_iter);
  const double root = 0.5 * (a + b);
  residual = std::abs(gap(root));
  const int total = picard_iters + static_cast<int>(max_iter);
  if (residual > opts.tolerance) {
    throw NoConvergence("solve_c_star: bracketed solve did not reach tolerance", total, root, residual);
  }
  return {root, total, residual};
}

FixedPointReport solve_fixed_point(const NetworkConfig& cfg, double q_init, const SolverOptions& opts,
                                   const GaussHermiteRule& rule) {
  const auto q = solve_q_star(cfg, q_init, opts, rule);
  FixedPointReport report;
  report.q_star = q.q_star;
  report.iterations = q.iterations;
  report.residual = q.residual;
  report.chi = chi(cfg, q.q_star, rule);
  report.phase = classify_phase(report.chi);
  if (q.q_star > 0.0) {
    const auto c = solve_c_star(cfg, q.q_star, opts, rule);
    report.c_star = c.c_star;
    report.c_iterations = c.iterations;
    report.c_residual = c.residual;
  } else {
    report.c_star = report.chi <= 1.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

std::optional<EocPoint> eoc_point(ActivationFamily activation, double gamma, double q_star,
                                  const GaussHermiteRule& rule) {
  activation.require_smooth("eoc_curve");
  validate_gamma(gamma);
  require_positive_q_star(q_star, "eoc_curve");
  const double mu1 = dphi_moment(activation, q_star, 1, rule);
  if (!(mu1 > 0.0)) return std::nullopt;
  const double wv = 1.0 / mu1;
  double bv = q_star - wv * phi_squared_integral(activation, q_star, rule);
  // Cancellation leaves round-off where the exact value is zero (identity).
  if (std::abs(bv) <= 64.0 * std::numeric_limits<double>::epsilon() * q_star) bv = 0.0;
  if (bv < 0.0) return std::nullopt;
  return EocPoint{q_star, wv, bv, wv / gamma, bv / gamma};
}

std::vector<EocPoint> eoc_curve(ActivationFamily activation, double gamma, std::span<const double> q_grid,
                                const GaussHermiteRule& rule) {
  activation.require_smooth("eoc_curve");
  validate_gamma(gamma);
  std::vector<EocPoint> out;
  for (double q : q_grid) {
    const auto point = eoc_point(activation, gamma, q, rule);
    if (!point) continue;
    if (!out.empty() && out.back().gamma_sigma_alpha2 == point->gamma_sigma_alpha2 &&
        out.back().gamma_sigma_b2 == point->gamma_sigma_b2) {
      continue;
    }
    out.push_back(*point);
  }
  return out;
}

DepthScales depth_scales(const NetworkConfig& cfg, double q_star, const GaussHermiteRule& rule) {
  const auto phi = cfg.activation;
  phi.require_smooth("depth_scales");
  if (!(q_star >= 0.0)) throw DomainError("depth_scales: q_star must be >= 0");

  const double chi_value = chi(cfg, q_star, rule);
  const double s = std::sqrt(q_star);
  const double curvature = gauss_1d(rule, [&](double z) { return phi.second(s * z) * phi.value(s * z); });

  DepthScales out;
  out.xi_q = scale_from_slope(chi_value + cfg.weight_variance() * curvature, "xi_q");
  out.xi_grad = scale_from_slope(chi_value, "xi_grad");
  if (chi_value <= 1.0) {
    out.xi_c = out.xi_grad;
  } else if (q_star > 0.0) {
    const double c_star = solve_c_star(cfg, q_star, {}, rule).c_star;
    out.xi_c = scale_from_slope(correlation_slope(cfg, q_star, c_star, rule), "xi_c");
  } else {
    out.xi_c = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

TrajectoryRecord gradient_norm_theory(const NetworkConfig& cfg, double q_star, int first_layer, int last_layer,
                                      const GaussHermiteRule& rule) {
  if (first_layer > last_layer) throw DomainError("gradient_norm_theory: empty layer range");
  if (last_layer > cfg.depth) throw DomainError("gradient_norm_theory: layer beyond network depth");
  const double chi_value = chi(cfg, q_star, rule);
  TrajectoryRecord out;
  out.quantity = Quantity::gradient_norm;
  out.width = cfg.width;
  for (int l = first_layer; l <= last_layer; ++l) out.push(l, std::pow(chi_value, cfg.depth - l));
  return out;
}

double weight_variance_for_chi(ActivationFamily activation, double bias_variance, double target_chi,
                               const GaussHermiteRule& rule) {
  if (!(target_chi > 0.0)) throw DomainError("weight_variance_for_chi: target must be positive");
  if (!(bias_variance >= 0.0)) throw DomainError("weight_variance_for_chi: bias variance must be >= 0");

  auto chi_at = [&](double wv) {
    NetworkConfig cfg;
    cfg.gamma = 1.0;
    cfg.sigma_alpha2 = wv;
    cfg.sigma_b2 = bias_variance;
    cfg.activation = activation;
    const double q = solve_q_star(cfg, 1.0, {}, rule).q_star;
    return chi(cfg, q, rule) - target_chi;
  };

  double lo = 1e-6;
  double hi = 1.0;
  double f_lo = chi_at(lo);
  double f_hi = chi_at(hi);
  if (f_lo > 0.0) throw DomainError("weight_variance_for_chi: target chi too small");
  while (f_hi < 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    if (hi > 1e6) throw DomainError("weight_variance_for_chi: target chi unreachable");
    f_hi = chi_at(hi);
  }
  if (f_hi == 0.0) return hi;
  std::uintmax_t max_iter = 200;
  const auto [a, b] =
      boost::math::tools::toms748_solve(chi_at, lo, hi, f_lo, f_hi, boost::math::tools::eps_tolerance<double>(50),
                                        max_iter);
  return 0.5 * (a + b);
}

} // namespace eoc
