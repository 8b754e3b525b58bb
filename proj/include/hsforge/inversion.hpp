#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "hsforge/lut.hpp"
#include "hsforge/raster.hpp"
#include "hsforge/rtm.hpp"
#include "hsforge/spectral.hpp"

namespace hsforge {

struct InversionConfig {
  std::size_t n_best = 10;
  double low_percentile = 0.05;
  double high_percentile = 0.95;

  void validate(std::size_t lut_size) const;
};

struct Neighbor {
  std::size_t index = 0;
  double cost = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Root mean square difference, accumulated in double.
double rmse(std::span<const float> obs, std::span<const float> sim);
double rmse(std::span<const double> obs, std::span<const double> sim);

enum class SearchKernel {
  naive,      // serial reference: every cost, then partial sort
  optimized,  // pixel/LUT blocking with early abandoning
};

const char* kernel_name(SearchKernel k);

// n lowest-cost LUT entries for one observation, ascending by (cost, index).
std::vector<Neighbor> n_best(std::span<const float> obs, const LookupTable& lut, std::size_t n,
                             SearchKernel kernel = SearchKernel::optimized);

// Searches `pixels` observations stored pixel-major (pixels * band_count).
// Writes pixels * n neighbours; pixels with a non-finite band get index
// SIZE_MAX and cost +inf in every slot. Output is independent of `workers`.
void search_batch(std::span<const float> observations, const LookupTable& lut, std::size_t n, SearchKernel kernel,
                  int workers, std::span<Neighbor> out);

// Linear interpolation between order statistics at h = (n - 1) q.
double percentile(std::span<const double> sorted, double q);

struct EnsembleStats {
  ParameterVector median;
  ParameterVector low;
  ParameterVector high;
};

EnsembleStats ensemble_stats(std::span<const ParameterVector> entries, const InversionConfig& cfg);

struct PixelResult {
  ParameterVector median_params;
  ParameterVector p5_params;
  ParameterVector p95_params;
  double best_cost = 0.0;
  std::size_t best_index = 0;
};

PixelResult invert_pixel(std::span<const float> obs, const LookupTable& lut, const InversionConfig& cfg);

inline constexpr double kInvalidTrait = kInvalidTraitValue;
inline constexpr std::int64_t kInvalidIndex = -1;

// Per-pixel inversion output; trait arrays are band-sequential
// (trait, row, col) in canonical trait order.
struct TraitMaps {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> median, p5, p95;
  std::vector<double> cost;
  std::vector<std::int64_t> best_index;

  TraitMaps() = default;
  TraitMaps(std::size_t rows, std::size_t cols);

  std::size_t pixels() const { return rows * cols; }
  std::size_t index(std::size_t trait, std::size_t pixel) const { return trait * pixels() + pixel; }
  ParameterVector median_at(std::size_t pixel) const;
  bool valid(std::size_t pixel) const;
  std::size_t invalid_count() const;
  // Mean best cost over valid pixels, NaN when none is valid.
  double mean_cost() const;

  friend bool operator==(const TraitMaps&, const TraitMaps&) = default;
};

// `cube` is a float32 raster whose band axis matches the LUT bands.
TraitMaps invert_image(const RasterCube& cube, const LookupTable& lut, const InversionConfig& cfg, int workers = 1,
                       SearchKernel kernel = SearchKernel::optimized);

// 16-band float32 raster of one trait component, bands named by trait.
RasterCube traits_to_raster(const std::vector<double>& values, std::size_t rows, std::size_t cols);
// Reads medians back from a 16-band trait raster (costs become NaN).
TraitMaps traits_from_raster(const RasterCube& raster);

// Forward simulation of every valid pixel's median parameters; invalid
// pixels (all traits at the sentinel) get a zero spectrum.
RasterCube simulate_from_traits(const TraitMaps& traits, const RtmInputs& rtm, const ParameterRanges& ranges,
                                int workers = 1);

}  // namespace hsforge
