#include "eoc/activations.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "eoc/errors.hpp"

namespace eoc {

namespace {

constexpr double kTwoOverSqrtPi = 2.0 * std::numbers::inv_sqrtpi;

}

ActivationFamily ActivationFamily::from_name(std::string_view name) {
  if (name == "tanh") return ActivationFamily(Activation::tanh);
  if (name == "erf") return ActivationFamily(Activation::erf);
  if (name == "identity") return ActivationFamily(Activation::identity);
  if (name == "relu") return ActivationFamily(Activation::relu);
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

std::string_view ActivationFamily::name() const noexcept {
  switch (kind_) {
    case Activation::tanh: return "tanh";
    case Activation::erf: return "erf";
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
  }
  return "?";
}

Smoothness ActivationFamily::smoothness() const noexcept {
  return kind_ == Activation::relu ? Smoothness::C0 : Smoothness::C2;
}

bool ActivationFamily::strictly_sublinear() const noexcept {
  return kind_ == Activation::tanh || kind_ == Activation::erf;
}

double ActivationFamily::value(double x) const noexcept {
  switch (kind_) {
    case Activation::tanh: return std::tanh(x);
    case Activation::erf: return std::erf(x);
    case Activation::identity: return x;
    case Activation::relu: return x > 0.0 ? x : 0.0;
  }
  return 0.0;
}

double ActivationFamily::first(double x) const noexcept {
  switch (kind_) {
    case Activation::tanh: {
      // sech^2 via cosh keeps full relative precision in the tails
      const double c = std::cosh(x);
      return 1.0 / (c * c);
    }
    case Activation::erf: return kTwoOverSqrtPi * std::exp(-x * x);
    case Activation::identity: return 1.0;
    case Activation::relu: return x > 0.0 ? 1.0 : 0.0;
  }
  return 0.0;
}

double ActivationFamily::second(double x) const {
  switch (kind_) {
    case Activation::tanh: {
      const double c = std::cosh(x);
      return -2.0 * std::tanh(x) / (c * c);
    }
    case Activation::erf: return -2.0 * x * kTwoOverSqrtPi * std::exp(-x * x);
    case Activation::identity: return 0.0;
    case Activation::relu: break;
  }
  throw UnsupportedDerivative("relu has no second derivative");
}

double ActivationFamily::eval(int order, double x) const {
  switch (order) {
    case 0: return value(x);
    case 1: return first(x);
    case 2: return second(x);
    default: throw DomainError("derivative order must be 0, 1 or 2, got " + std::to_string(order));
  }
}

void ActivationFamily::require_smooth(std::string_view operation) const {
  if (!is_smooth()) {
    throw UnsupportedDerivative(std::string(operation) + " needs a C2 activation; " +
                                std::string(name()) + " is only C0");
  }
}

double eval(ActivationFamily family, int order, double x) { return family.eval(order, x); }

} // namespace eoc
