#pragma once

#include <string>
#include <string_view>

namespace eoc {

enum class Activation { tanh, erf, identity, relu };

enum class Smoothness { C0, C2 };

/// Nonlinearity phi together with its first two derivatives.
///
/// Instances are cheap values; every member is a pure function of its input.
class ActivationFamily {
public:
  constexpr ActivationFamily() = default;
  constexpr explicit ActivationFamily(Activation kind) : kind_(kind) {}

  /// Parses "tanh", "erf", "identity" or "relu"; throws DomainError otherwise.
  static ActivationFamily from_name(std::string_view name);

  constexpr Activation kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;
  Smoothness smoothness() const noexcept;
  bool is_smooth() const noexcept { return smoothness() == Smoothness::C2; }

  /// Highest derivative order eval() accepts.
  int max_order() const noexcept { return is_smooth() ? 2 : 1; }

  /// |phi(x)| < phi'(0)|x| for every x != 0 (tanh, erf). Identity is linear
  /// and relu has no derivative at the origin, so both report false.
  bool strictly_sublinear() const noexcept;

  double value(double x) const noexcept;
  double first(double x) const noexcept;
  /// Throws UnsupportedDerivative for C0 families.
  double second(double x) const;

  /// order 0, 1 or 2. Throws UnsupportedDerivative when order exceeds
  /// max_order() and DomainError for any other order.
  double eval(int order, double x) const;

  /// Throws UnsupportedDerivative unless the family is C2.
  void require_smooth(std::string_view operation) const;

  friend constexpr bool operator==(ActivationFamily, ActivationFamily) = default;

private:
  Activation kind_ = Activation::tanh;
};

double eval(ActivationFamily family, int order, double x);

} // namespace eoc
