#include "hsforge/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>

#include "search_detail.hpp"

namespace hsforge {

void InversionConfig::validate(std::size_t lut_size) const {
  if (n_best == 0) throw std::invalid_argument("n_best must be positive");
  if (n_best > lut_size) {
    throw std::invalid_argument("n_best = " + std::to_string(n_best) + " exceeds LUT size " + std::to_string(lut_size));
  }
  if (!(low_percentile >= 0.0 && low_percentile < high_percentile && high_percentile <= 1.0)) {
    throw std::invalid_argument("percentiles must satisfy 0 <= low < high <= 1");
  }
}

namespace {

template <typename T>
double rmse_impl(std::span<const T> obs, std::span<const T> sim) {
  if (obs.size() != sim.size()) {
    throw ShapeError("rmse length mismatch: " + std::to_string(obs.size()) + " vs " + std::to_string(sim.size()));
  }
  if (obs.empty()) throw ShapeError("rmse of empty vectors");
  double sum = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const double d = static_cast<double>(obs[k]) - static_cast<double>(sim[k]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(obs.size()));
}

}  // namespace

double rmse(std::span<const float> obs, std::span<const float> sim) { return rmse_impl(obs, sim); }
double rmse(std::span<const double> obs, std::span<const double> sim) { return rmse_impl(obs, sim); }

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::domain_error("percentile of an empty ensemble");
  if (!(q >= 0.0 && q <= 1.0)) throw std::domain_error("percentile level outside [0, 1]");
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto f = static_cast<std::size_t>(std::floor(h));
  if (f + 1 >= sorted.size()) return sorted[f];
  const double lo = sorted[f];
  const double hi = sorted[f + 1];
  // Clamp keeps the result monotone in q under rounding.
  return std::clamp(lo + (h - static_cast<double>(f)) * (hi - lo), lo, hi);
}

EnsembleStats ensemble_stats(std::span<const ParameterVector> entries, const InversionConfig& cfg) {
  if (entries.empty()) throw std::domain_error("ensemble is empty");
  EnsembleStats s;
  std::vector<double> column(entries.size());
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    for (std::size_t i = 0; i < entries.size(); ++i) column[i] = entries[i][t];
    std::sort(column.begin(), column.end());
    s.median[t] = percentile(column, 0.5);
    s.low[t] = percentile(column, cfg.low_percentile);
    s.high[t] = percentile(column, cfg.high_percentile);
  }
  return s;
}

PixelResult invert_pixel(std::span<const float> obs, const LookupTable& lut, const InversionConfig& cfg) {
  cfg.validate(lut.size());
  const auto best = n_best(obs, lut, cfg.n_best);
  std::vector<ParameterVector> members;
  members.reserve(best.size());
  for (const auto& nb : best) members.push_back(lut.params[nb.index]);
  const EnsembleStats s = ensemble_stats(members, cfg);
  return {s.median, s.low, s.high, best.front().cost, best.front().index};
}

// ---------------------------------------------------------------------------

TraitMaps::TraitMaps(std::size_t r, std::size_t c)
    : rows(r),
      cols(c),
      median(r * c * kTraitCount, 0.0),
      p5(r * c * kTraitCount, 0.0),
      p95(r * c * kTraitCount, 0.0),
      cost(r * c, 0.0),
      best_index(r * c, 0) {}

ParameterVector TraitMaps::median_at(std::size_t pixel) const {
  ParameterVector p;
  for (std::size_t t = 0; t < kTraitCount; ++t) p[t] = median[index(t, pixel)];
  return p;
}

bool TraitMaps::valid(std::size_t pixel) const {
  for (std::size_t t = 0; t < kTraitCount; ++t) {
    if (median[index(t, pixel)] != kInvalidTrait) return true;
  }
  return false;
}

std::size_t TraitMaps::invalid_count() const {
  std::size_t n = 0;
  for (std::size_t p = 0; p < pixels(); ++p) n += valid(p) ? 0 : 1;
  return n;
}

double TraitMaps::mean_cost() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < pixels(); ++p) {
    if (!valid(p)) continue;
    sum += cost[p];
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

TraitMaps invert_image(const RasterCube& cube, const LookupTable& lut, const InversionConfig& cfg, int workers,
                       SearchKernel kernel) {
  if (lut.size() == 0) throw std::invalid_argument("LUT is empty");
  cfg.validate(lut.size());
  const std::size_t nb = lut.band_count();
  if (cube.bands() != nb) {
    throw ShapeError("cube has " + std::to_string(cube.bands()) + " bands, LUT has " + std::to_string(nb));
  }
  if (!cube.band_names.empty() && cube.band_names != lut.band_names) {
    throw ShapeError("cube band names do not match the LUT band set");
  }
  const auto data = cube.data<float>();
  const std::size_t pixels = cube.pixels();

  // Pixel-major copy of the band-sequential cube.
  std::vector<float> obs(pixels * nb);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t p = 0; p < pixels; ++p) obs[p * nb + b] = data[b * pixels + p];
  }

  const std::size_t n = cfg.n_best;
  std::vector<Neighbor> found(pixels * n);
  search_batch(obs, lut, n, kernel, workers, found);

  TraitMaps maps(cube.rows(), cube.cols());
#pragma omp parallel num_threads(workers)
  {
    std::vector<ParameterVector> members(n);
#pragma omp for schedule(static)
    for (std::size_t p = 0; p < pixels; ++p) {
      const Neighbor* best = found.data() + p * n;
      if (best[0].index == SIZE_MAX) {
        for (std::size_t t = 0; t < kTraitCount; ++t) {
          maps.median[maps.index(t, p)] = kInvalidTrait;
          maps.p5[maps.index(t, p)] = kInvalidTrait;
          maps.p95[maps.index(t, p)] = kInvalidTrait;
        }
        maps.cost[p] = std::numeric_limits<double>::infinity();
        maps.best_index[p] = kInvalidIndex;
        continue;
      }
      for (std::size_t k = 0; k < n; ++k) members[k] = lut.params[best[k].index];
      const EnsembleStats s = ensemble_stats(members, cfg);
      for (std::size_t t = 0; t < kTraitCount; ++t) {
        maps.median[maps.index(t, p)] = s.median[t];
        maps.p5[maps.index(t, p)] = s.low[t];
        maps.p95[maps.index(t, p)] = s.high[t];
      }
      maps.cost[p] = best[0].cost;
      maps.best_index[p] = static_cast<std::int64_t>(best[0].index);
    }
  }
  return maps;
}

RasterCube traits_to_raster(const std::vector<double>& values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols * kTraitCount) throw ShapeError("trait array size mismatch");
  RasterCube r(rows, cols, kTraitCount, DataType::float32);
  auto out = r.data<float>();
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<float>(values[i]);
  r.band_names.assign(trait_names().begin(), trait_names().end());
  return r;
}

TraitMaps traits_from_raster(const RasterCube& raster) {
  if (raster.bands() != kTraitCount) {
    throw ShapeError("trait raster has " + std::to_string(raster.bands()) + " bands, expected " +
                     std::to_string(kTraitCount));
  }
  TraitMaps maps(raster.rows(), raster.cols());
  const auto in = raster.data<float>();
  for (std::size_t i = 0; i < in.size(); ++i) maps.median[i] = static_cast<double>(in[i]);
  maps.p5 = maps.median;
  maps.p95 = maps.median;
  std::fill(maps.cost.begin(), maps.cost.end(), std::numeric_limits<double>::quiet_NaN());
  std::fill(maps.best_index.begin(), maps.best_index.end(), kInvalidIndex);
  return maps;
}

RasterCube simulate_from_traits(const TraitMaps& traits, const RtmInputs& rtm, const ParameterRanges& ranges,
                                int workers) {
  if (workers < 1) throw std::invalid_argument("worker count must be >= 1");
  const SpectralGrid& grid = rtm.coeffs.grid;
  const std::size_t pixels = traits.pixels();
  RasterCube cube(traits.rows, traits.cols, grid.count, DataType::float32);
  auto out = cube.data<float>();

  std::exception_ptr failure;
  std::size_t failure_pixel = SIZE_MAX;
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!traits.valid(p)) continue;  // zero spectrum
    try {
      const ParameterVector params = traits.median_at(p);
      const std::size_t bad = ranges.first_violation(params);
      if (bad != kTraitCount) {
        std::ostringstream msg;
        msg << "pixel (row " << p / traits.cols << ", col " << p % traits.cols << "): trait " << trait_name(bad)
            << " = " << params[bad] << " outside [" << ranges[bad].min << ", " << ranges[bad].max << "]";
        throw ParameterError(msg.str());
      }
      const Spectrum s = forward(params, rtm);
      for (std::size_t b = 0; b < grid.count; ++b) out[b * pixels + p] = static_cast<float>(s[b]);
    } catch (...) {
#pragma omp critical(hsforge_simulate_failure)
      if (p < failure_pixel) {
        failure_pixel = p;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);

  cube.wavelengths.resize(grid.count);
  for (std::size_t b = 0; b < grid.count; ++b) cube.wavelengths[b] = grid.wavelength(b);
  return cube;
}

}  // namespace hsforge
