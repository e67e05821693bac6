#pragma once

#include <optional>
#include <vector>

#include "eoc/config.hpp"
#include "eoc/power_series.hpp"
#include "eoc/quadrature.hpp"

// Spectral densities of W^T W for the low-rank ensembles and the S-transform
// route to the moments of the Jacobian spectrum.
//
// Marchenko-Pastur convention: for A of shape (gamma N) x N with entries of
// variance sigma_alpha2 / N, A^T A has an atom of mass 1 - gamma at 0 and a
// bulk of mass gamma on sigma_alpha2 [(1 - sqrt(gamma))^2, (1 + sqrt(gamma))^2].

namespace eoc {

inline constexpr int kDefaultSeriesOrder = 8;
inline constexpr int kDefaultMomentQuadOrder = 64;

struct Atom {
  double location = 0.0;
  double mass = 0.0;
};

struct MpBulk {
  double scale = 1.0;  ///< sigma_alpha2
  double shape = 1.0;  ///< gamma
  double lower = 0.0;
  double upper = 0.0;
  double mass = 0.0;
};

MpBulk mp_bulk(double gamma, double sigma_alpha2);

/// Bulk density of the convention above at lam; zero outside the support.
double mp_density_eval(double gamma, double sigma_alpha2, double lam);

struct AtomicPlusBulkDensity {
  std::vector<Atom> atoms;
  std::optional<MpBulk> bulk;

  double total_mass(int quad_order = kDefaultMomentQuadOrder) const;
  /// int lam^k rho(lam) dlam; atoms exactly, the bulk by Gauss-Legendre in
  /// the angle variable lam = a + (b - a)(1 - cos t)/2.
  double moment(int k, int quad_order = kDefaultMomentQuadOrder) const;
  /// Bulk density at lam (atoms are not included).
  double bulk_density(double lam) const;
};

AtomicPlusBulkDensity point_mass(double location);

/// Spectrum of W^T W for the ensemble.
AtomicPlusBulkDensity ensemble_density(Ensemble ensemble, double gamma, double sigma_alpha2);

/// Closed-form S-transform of W^T W as a series in z:
///   orthogonal: (gamma sigma_alpha2)^-1 (1 + z) / (1 + z / gamma)
///   gaussian:   (gamma sigma_alpha2)^-1 (1 + z) / (1 + z (1 + 1/gamma) + z^2 / gamma)
PowerSeries s_transform(Ensemble ensemble, double gamma, double sigma_alpha2, int order = kDefaultSeriesOrder);

/// S-transform from moments: M(w) = sum_k m_k w^k, then
/// S(y) = (1 + y) M^{-1}(y) / y. Throws ReversionFailure when m1 = 0.
PowerSeries s_transform_from_moments(const std::vector<double>& moments, int order = kDefaultSeriesOrder);

PowerSeries s_transform_from_density(const AtomicPlusBulkDensity& density, int order = kDefaultSeriesOrder,
                                     int quad_order = kDefaultMomentQuadOrder);

/// Coefficient s_k of the normalised S-transform 1 + s_1 z + s_2 z^2 + ...
double s_coefficient(const PowerSeries& s, int k);

enum class MomentSource { analytic, empirical };

struct SpectrumMoments {
  double m1 = 0.0;
  double m2 = 0.0;
  double variance = 0.0;
  MomentSource source = MomentSource::analytic;
  int depth = 0;
};

/// Moments of the J J^T spectrum for J = prod_l D^l W^l at equilibrium q*:
///   m1 = chi^L, m2 = chi^(2L) L (mu2/mu1^2 + 1/L - 1 - s1),
/// with mu_k = int phi'(sqrt(q*) z)^(2k) Dz. Throws DegenerateSpectrum if mu1 = 0.
SpectrumMoments jacobian_moments_analytic(const NetworkConfig& cfg, double q_star,
                                          const GaussHermiteRule& rule = default_rule());

} // namespace eoc
