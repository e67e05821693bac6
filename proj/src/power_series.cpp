#include "eoc/power_series.hpp"

#include <algorithm>
#include <stdexcept>

#include "eoc/errors.hpp"

namespace eoc {

PowerSeries::PowerSeries(std::vector<double> coeffs, int order) : coeffs_(std::move(coeffs)) {
  if (order < 0) throw DomainError("power series order must be >= 0");
  coeffs_.resize(static_cast<std::size_t>(order) + 1, 0.0);
}

PowerSeries::PowerSeries(std::vector<double> coeffs) : coeffs_(std::move(coeffs)) {
  if (coeffs_.empty()) coeffs_.push_back(0.0);
}

PowerSeries PowerSeries::constant(double value, int order) { return PowerSeries({value}, order); }

PowerSeries PowerSeries::variable(int order) { return PowerSeries({0.0, 1.0}, order); }

double PowerSeries::evaluate(double z) const noexcept {
  double acc = 0.0;
  for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * z + *it;
  return acc;
}

PowerSeries PowerSeries::truncated(int order) const { return PowerSeries(coeffs_, order); }

PowerSeries operator+(const PowerSeries& a, const PowerSeries& b) {
  const int n = std::min(a.order(), b.order());
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) c[k] = a[k] + b[k];
  return PowerSeries(std::move(c));
}

PowerSeries operator-(const PowerSeries& a, const PowerSeries& b) { return a + (-1.0) * b; }

PowerSeries operator*(const PowerSeries& a, const PowerSeries& b) {
  const int n = std::min(a.order(), b.order());
  std::vector<double> c(static_cast<std::size_t>(n) + 1, 0.0);
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) c[i + j] += a[i] * b[j];
  }
  return PowerSeries(std::move(c));
}

PowerSeries operator*(double s, const PowerSeries& a) {
  std::vector<double> c(a.coefficients().begin(), a.coefficients().end());
  for (double& x : c) x *= s;
  return PowerSeries(std::move(c));
}

PowerSeries PowerSeries::reciprocal() const {
  if (coeffs_[0] == 0.0) throw ReversionFailure("reciprocal of a series with zero constant term");
  const int n = order();
  std::vector<double> r(static_cast<std::size_t>(n) + 1, 0.0);
  r[0] = 1.0 / coeffs_[0];
  for (int k = 1; k <= n; ++k) {
    double acc = 0.0;
    for (int j = 1; j <= k; ++j) acc += coeffs_[j] * r[k - j];
    r[k] = -acc * r[0];
  }
  return PowerSeries(std::move(r));
}

PowerSeries PowerSeries::compose(const PowerSeries& inner) const {
  if (inner[0] != 0.0) throw DomainError("compose: inner series must vanish at 0");
  const int n = std::min(order(), inner.order());
  const PowerSeries g = inner.truncated(n);
  PowerSeries acc = constant(coeffs_[n], n);
  for (int k = n - 1; k >= 0; --k) acc = acc * g + constant(coeffs_[k], n);
  return acc;
}

PowerSeries PowerSeries::reversion() const {
  if (coeffs_[0] != 0.0) throw ReversionFailure("reversion needs a series vanishing at 0");
  if (order() < 1 || coeffs_[1] == 0.0) throw ReversionFailure("reversion needs a nonzero linear coefficient");
  const int n = order();
  // f(w) / w, then its reciprocal h = w / f(w).
  std::vector<double> shifted(coeffs_.begin() + 1, coeffs_.end());
  const PowerSeries h = PowerSeries(std::move(shifted), n - 1).reciprocal();
  std::vector<double> g(static_cast<std::size_t>(n) + 1, 0.0);
  PowerSeries power = constant(1.0, n - 1);
  for (int k = 1; k <= n; ++k) {
    power = power * h;
    g[k] = power[k - 1] / k;
  }
  return PowerSeries(std::move(g));
}

PowerSeries PowerSeries::normalised() const {
  if (coeffs_[0] == 0.0) throw DomainError("cannot normalise a series with zero constant term");
  return (1.0 / coeffs_[0]) * *this;
}

} // namespace eoc
