#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eoc/errors.hpp"

namespace eoc {

inline constexpr int kDefaultQuadOrder = 61;

/// Gauss rule for the standard normal measure Dz: sum_i w_i f(z_i) ~ int f(z) Dz.
///
/// Nodes are the roots of the probabilists' Hermite polynomial He_n and the
/// weights sum to one. Built with Golub-Welsch: nodes are the eigenvalues of the
/// symmetric Jacobi matrix (zero diagonal, off-diagonal sqrt(k)) and weights the
/// squared first components of its normalised eigenvectors.
class GaussHermiteRule {
public:
  explicit GaussHermiteRule(int order);

  /// Process-wide immutable rule for `order`, built on first use.
  static const GaussHermiteRule& cached(int order);

  int order() const noexcept { return static_cast<int>(nodes_.size()); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }

private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

const GaussHermiteRule& default_rule();

/// Gauss-Legendre rule on [-1, 1]; weights sum to 2.
class GaussLegendreRule {
public:
  explicit GaussLegendreRule(int order);
  static const GaussLegendreRule& cached(int order);

  int order() const noexcept { return static_cast<int>(nodes_.size()); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }

  /// int_a^b f(x) dx.
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double sum = 0.0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) sum += weights_[i] * f(mid + half * nodes_[i]);
    return half * sum;
  }

private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

namespace detail {
[[noreturn]] void throw_non_finite(double z1, double z2);
}

/// int f(z) Dz.
template <class F>
  requires std::invocable<F&, double>
double gauss_1d(const GaussHermiteRule& rule, F&& f) {
  const auto z = rule.nodes();
  const auto w = rule.weights();
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = f(z[i]);
    if (!std::isfinite(v)) detail::throw_non_finite(z[i], NAN);
    sum += w[i] * v;
  }
  return sum;
}

/// Correlation at or beyond which the pair is treated as exactly (anti)aligned.
inline constexpr double kDegenerateCorrelation = 1.0 - 1e-12;

/// int int f(u1, u2) Dz1 Dz2 with u1 = sqrt(q11) z1 and
/// u2 = sqrt(q22) (c z1 + sqrt(1 - c^2) z2), by tensor-product quadrature.
///
/// For |c| > 1 - 1e-12 the degenerate form u2 = sign(c) sqrt(q22) z1 is used.
/// Throws DomainError unless q11, q22 > 0 and |c| <= 1.
template <class F>
  requires std::invocable<F&, double, double>
double gauss_2d_correlated(const GaussHermiteRule& rule, F&& f, double q11, double q22, double c) {
  if (!(q11 > 0.0) || !(q22 > 0.0)) throw DomainError("gauss_2d_correlated: variances must be positive");
  if (!(std::abs(c) <= 1.0)) throw DomainError("gauss_2d_correlated: |c| must not exceed 1");

  const double s1 = std::sqrt(q11);
  const double s2 = std::sqrt(q22);
  const auto z = rule.nodes();
  const auto w = rule.weights();

  if (std::abs(c) > kDegenerateCorrelation) {
    const double sign = c > 0.0 ? 1.0 : -1.0;
    return gauss_1d(rule, [&](double z1) { return f(s1 * z1, sign * s2 * z1); });
  }

  const double perp = std::sqrt((1.0 - c) * (1.0 + c));
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double u1 = s1 * z[i];
    const double along = c * z[i];
    double inner = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      const double v = f(u1, s2 * (along + perp * z[j]));
      if (!std::isfinite(v)) detail::throw_non_finite(z[i], z[j]);
      inner += w[j] * v;
    }
    sum += w[i] * inner;
  }
  return sum;
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo estimate of int f(z) Dz from `samples` standard normal draws.
/// Deterministic for a given seed. Throws DomainError if samples < 1 and
/// NonFiniteIntegrand on a non-finite sample.
McEstimate mc_oracle(const std::function<double(double)>& f, std::int64_t samples, std::uint64_t seed);

/// Monte-Carlo estimate of the correlated two-dimensional integral evaluated
/// by gauss_2d_correlated.
McEstimate mc_oracle(const std::function<double(double, double)>& f, double q11, double q22, double c,
                     std::int64_t samples, std::uint64_t seed);

} // namespace eoc
