#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace eoc {

enum class Quantity { length, correlation, gradient_norm, singular_spectrum };

std::string_view quantity_name(Quantity q) noexcept;

/// Per-layer sequence of one propagated quantity. Scalar quantities store a
/// single value per layer; singular_spectrum stores the whole spectrum.
struct TrajectoryRecord {
  Quantity quantity = Quantity::length;
  std::vector<int> layers;
  std::vector<std::vector<double>> values;

  std::uint64_t seed = 0;
  int trial = 0;
  int width = 0;

  void push(int layer, double value);
  void push(int layer, std::vector<double> value);

  std::size_t size() const noexcept { return layers.size(); }
  double scalar(std::size_t i) const { return values.at(i).at(0); }
  std::vector<double> scalars() const;

  /// Layers strictly increasing and every value finite.
  bool well_formed() const;
};

} // namespace eoc
