#include "eoc/trajectory.hpp"

#include <cmath>

#include "eoc/errors.hpp"

namespace eoc {

std::string_view quantity_name(Quantity q) noexcept {
  switch (q) {
    case Quantity::length: return "length";
    case Quantity::correlation: return "correlation";
    case Quantity::gradient_norm: return "gradient_norm";
    case Quantity::singular_spectrum: return "singular_spectrum";
  }
  return "?";
}

void TrajectoryRecord::push(int layer, double value) { push(layer, std::vector<double>{value}); }

void TrajectoryRecord::push(int layer, std::vector<double> value) {
  if (!layers.empty() && layer <= layers.back()) throw DomainError("trajectory layers must increase");
  layers.push_back(layer);
  values.push_back(std::move(value));
}

std::vector<double> TrajectoryRecord::scalars() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.at(0));
  return out;
}

bool TrajectoryRecord::well_formed() const {
  if (layers.size() != values.size()) return false;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (layers[i] <= layers[i - 1]) return false;
  }
  for (const auto& v : values) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

} // namespace eoc
