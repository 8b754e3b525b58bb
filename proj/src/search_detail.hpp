#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hsforge/inversion.hpp"

namespace hsforge::detail {

// Accumulation order is part of the contract: every kernel sums bands
// 0..nb-1 in double so costs agree bit for bit.
inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
    sum += d * d;
  }
  return sum;
}

inline double finish_cost(double sum, std::size_t nb) { return std::sqrt(sum / static_cast<double>(nb)); }

inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.cost < b.cost || (a.cost == b.cost && a.index < b.index);
}

void search_naive(std::span<const float> obs, const LookupTable& lut, std::size_t n, std::span<Neighbor> out);

// LUT band values widened to double, band-major: values[b * entries + i].
struct SearchTable {
  explicit SearchTable(const LookupTable& lut);
  std::size_t entries;
  std::size_t bands;
  std::vector<double> values;
  std::vector<std::size_t> bound_bands;
  double bound_margin;
};

// Searches a block of pixel observations (pixel-major, finite values only).
void search_blocked(std::span<const float> observations, std::size_t pixels, const SearchTable& table, std::size_t n,
                    std::span<Neighbor> out);

}  // namespace hsforge::detail
