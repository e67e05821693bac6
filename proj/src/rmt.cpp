#include "eoc/rmt.hpp"

#include <cmath>
#include <numbers>

#include "eoc/errors.hpp"

namespace eoc {

namespace {

void require_positive_scale(double sigma_alpha2) {
  if (!(sigma_alpha2 > 0.0) || !std::isfinite(sigma_alpha2)) throw DomainError("sigma_alpha2 must be positive");
}

// Integrates g(lam) rho_bulk(lam) over the support. With
// lam = a + (b - a)(1 - cos t)/2 the square-root edges cancel against the
// Jacobian and the integrand becomes smooth in t.
template <class G>
double bulk_integral(const MpBulk& bulk, G&& g, int quad_order) {
  const double a = bulk.lower;
  const double b = bulk.upper;
  const double half = 0.5 * (b - a);
  const auto& rule = GaussLegendreRule::cached(quad_order);
  return rule.integrate(
      [&](double t) {
        const double s = std::sin(t);
        const double lam = a + half * (1.0 - std::cos(t));
        // sqrt((b - lam)(lam - a)) dlam = half^2 sin^2 t dt
        return g(lam) * half * half * s * s / (2.0 * std::numbers::pi * bulk.scale * lam);
      },
      0.0, std::numbers::pi);
}

} // namespace

MpBulk mp_bulk(double gamma, double sigma_alpha2) {
  validate_gamma(gamma);
  require_positive_scale(sigma_alpha2);
  const double r = std::sqrt(gamma);
  return {sigma_alpha2, gamma, sigma_alpha2 * (1.0 - r) * (1.0 - r), sigma_alpha2 * (1.0 + r) * (1.0 + r), gamma};
}

double mp_density_eval(double gamma, double sigma_alpha2, double lam) {
  return AtomicPlusBulkDensity{{}, mp_bulk(gamma, sigma_alpha2)}.bulk_density(lam);
}

double AtomicPlusBulkDensity::bulk_density(double lam) const {
  if (!bulk || !(lam > bulk->lower) || !(lam < bulk->upper)) return 0.0;
  return std::sqrt((bulk->upper - lam) * (lam - bulk->lower)) / (2.0 * std::numbers::pi * bulk->scale * lam);
}

double AtomicPlusBulkDensity::moment(int k, int quad_order) const {
  if (k < 0) throw DomainError("moment order must be >= 0");
  double total = 0.0;
  for (const auto& a : atoms) total += a.mass * std::pow(a.location, k);
  if (bulk) total += bulk_integral(*bulk, [k](double lam) { return std::pow(lam, k); }, quad_order);
  return total;
}

double AtomicPlusBulkDensity::total_mass(int quad_order) const { return moment(0, quad_order); }

AtomicPlusBulkDensity point_mass(double location) { return {{Atom{location, 1.0}}, std::nullopt}; }

AtomicPlusBulkDensity ensemble_density(Ensemble ensemble, double gamma, double sigma_alpha2) {
  validate_gamma(gamma);
  require_positive_scale(sigma_alpha2);
  AtomicPlusBulkDensity d;
  if (gamma < 1.0) d.atoms.push_back({0.0, 1.0 - gamma});
  if (ensemble == Ensemble::lowrank_orthogonal) {
    d.atoms.push_back({sigma_alpha2, gamma});
  } else {
    d.bulk = mp_bulk(gamma, sigma_alpha2);
  }
  return d;
}

PowerSeries s_transform(Ensemble ensemble, double gamma, double sigma_alpha2, int order) {
  validate_gamma(gamma);
  require_positive_scale(sigma_alpha2);
  if (order < 1) throw DomainError("s_transform: order must be >= 1");
  const PowerSeries numerator({1.0, 1.0}, order);
  const PowerSeries denominator = ensemble == Ensemble::lowrank_orthogonal
                                      ? PowerSeries({1.0, 1.0 / gamma}, order)
                                      : PowerSeries({1.0, 1.0 + 1.0 / gamma, 1.0 / gamma}, order);
  return (1.0 / (gamma * sigma_alpha2)) * (numerator * denominator.reciprocal());
}

PowerSeries s_transform_from_moments(const std::vector<double>& moments, int order) {
  if (order < 1) throw DomainError("s_transform: order must be >= 1");
  if (moments.size() < static_cast<std::size_t>(order) + 1) {
    throw DomainError("s_transform: need moments m_1 .. m_(order+1)");
  }
  // M(w) = m1 w + m2 w^2 + ... ; one extra order because S divides by y.
  std::vector<double> m(static_cast<std::size_t>(order) + 2, 0.0);
  for (int k = 1; k <= order + 1; ++k) m[k] = moments[k - 1];
  if (m[1] == 0.0) throw ReversionFailure("S-transform undefined: first moment is zero");
  const PowerSeries inverse = PowerSeries(std::move(m)).reversion();
  std::vector<double> over_y(inverse.coefficients().begin() + 1, inverse.coefficients().end());
  return PowerSeries({1.0, 1.0}, order) * PowerSeries(std::move(over_y), order);
}

PowerSeries s_transform_from_density(const AtomicPlusBulkDensity& density, int order, int quad_order) {
  std::vector<double> moments;
  for (int k = 1; k <= order + 1; ++k) moments.push_back(density.moment(k, quad_order));
  return s_transform_from_moments(moments, order);
}

double s_coefficient(const PowerSeries& s, int k) { return s.normalised()[k]; }

SpectrumMoments jacobian_moments_analytic(const NetworkConfig& cfg, double q_star, const GaussHermiteRule& rule) {
  cfg.validate();
  if (!(q_star >= 0.0)) throw DomainError("jacobian_moments_analytic: q_star must be >= 0");
  if (!(cfg.sigma_alpha2 > 0.0)) throw DegenerateSpectrum("jacobian_moments_analytic: sigma_alpha2 is zero");
  const auto phi = cfg.activation;
  const double s = std::sqrt(q_star);
  const double mu1 = gauss_1d(rule, [&](double z) { return std::pow(phi.first(s * z), 2); });
  const double mu2 = gauss_1d(rule, [&](double z) { return std::pow(phi.first(s * z), 4); });
  if (!(mu1 > 0.0)) throw DegenerateSpectrum("jacobian_moments_analytic: mu1 = 0");

  // The normalised S-transform depends on gamma alone.
  const double s1 = s_coefficient(s_transform(cfg.ensemble, cfg.gamma, 1.0, 1), 1);
  const double depth = cfg.depth;
  const double chi = cfg.weight_variance() * mu1;

  SpectrumMoments out;
  out.source = MomentSource::analytic;
  out.depth = cfg.depth;
  out.m1 = std::pow(chi, depth);
  const double spread = mu2 / (mu1 * mu1) - 1.0 - s1;
  out.m2 = std::pow(chi, 2.0 * depth) * depth * (spread + 1.0 / depth);
  // m2 - m1^2 without the cancellation
  out.variance = std::pow(chi, 2.0 * depth) * depth * spread;
  return out;
}

} // namespace eoc
