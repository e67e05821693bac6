#pragma once

#include <span>
#include <vector>

namespace eoc {

/// Truncated power series a0 + a1 z + ... + aK z^K around z = 0.
///
/// Binary operations truncate to the smaller of the two orders.
class PowerSeries {
public:
  PowerSeries() : coeffs_(1, 0.0) {}
  /// Pads with zeros or truncates so that order() == order.
  PowerSeries(std::vector<double> coeffs, int order);
  explicit PowerSeries(std::vector<double> coeffs);

  static PowerSeries constant(double value, int order);
  /// The series z.
  static PowerSeries variable(int order);

  int order() const noexcept { return static_cast<int>(coeffs_.size()) - 1; }
  double operator[](int k) const { return coeffs_.at(static_cast<std::size_t>(k)); }
  std::span<const double> coefficients() const noexcept { return coeffs_; }

  double evaluate(double z) const noexcept;
  PowerSeries truncated(int order) const;

  friend PowerSeries operator+(const PowerSeries& a, const PowerSeries& b);
  friend PowerSeries operator-(const PowerSeries& a, const PowerSeries& b);
  friend PowerSeries operator*(const PowerSeries& a, const PowerSeries& b);
  friend PowerSeries operator*(double s, const PowerSeries& a);

  /// 1 / a. Throws ReversionFailure when a0 == 0.
  PowerSeries reciprocal() const;

  /// this(inner(z)). Requires inner[0] == 0 (DomainError otherwise).
  PowerSeries compose(const PowerSeries& inner) const;

  /// Compositional inverse g with this(g(y)) = y, by Lagrange inversion:
  /// [y^n] g = (1/n) [w^(n-1)] (w / f(w))^n. Requires a0 == 0 and a1 != 0;
  /// throws ReversionFailure otherwise.
  PowerSeries reversion() const;

  /// Divides every coefficient by a0, so the result starts with 1.
  PowerSeries normalised() const;

private:
  std::vector<double> coeffs_;
};

} // namespace eoc
