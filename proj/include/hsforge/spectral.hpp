#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hsforge {

class GridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BandCoverageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Regular wavelength axis. wavelength(i) = start_nm + i * step_nm.
struct SpectralGrid {
  double start_nm = 400.0;
  double step_nm = 10.0;
  std::size_t count = 211;

  double wavelength(std::size_t i) const { return start_nm + static_cast<double>(i) * step_nm; }
  double end_nm() const { return wavelength(count - 1); }
  bool contains(double nm) const { return nm >= start_nm && nm <= end_nm(); }

  // 400-2500 nm at 10 nm, 211 samples.
  static SpectralGrid canonical() { return {}; }

  friend bool operator==(const SpectralGrid&, const SpectralGrid&) = default;
};

SpectralGrid make_grid(double start_nm, double end_nm, double step_nm);

// Reflectance sampled on a SpectralGrid. Values must be finite.
class Spectrum {
 public:
  Spectrum(SpectralGrid grid, std::vector<double> values);

  const SpectralGrid& grid() const { return grid_; }
  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  SpectralGrid grid_;
  std::vector<double> values_;
};

struct SensorBand {
  std::string name;
  double center_nm = 0.0;
  double width_nm = 0.0;

  double lower_nm() const { return center_nm - 0.5 * width_nm; }
  double upper_nm() const { return center_nm + 0.5 * width_nm; }
};

// Ordered band list; the order defines the band axis of multispectral cubes.
class BandSet {
 public:
  BandSet() = default;
  explicit BandSet(std::vector<SensorBand> bands);

  std::size_t size() const { return bands_.size(); }
  const SensorBand& operator[](std::size_t i) const { return bands_[i]; }
  auto begin() const { return bands_.begin(); }
  auto end() const { return bands_.end(); }

  // Position of the band with the given name; throws std::out_of_range.
  std::size_t index_of(std::string_view name) const;
  std::vector<std::string> names() const;

 private:
  std::vector<SensorBand> bands_;
};

// Sentinel-2 MSI bands B1..B12 (without B10), boxcar approximations.
BandSet default_sensor_bands();

// `name,center_nm,width_nm` per line, '#' starts a comment.
BandSet load_band_set(const std::filesystem::path& path);

// Unweighted mean of the grid samples inside [center - width/2, center + width/2].
double band_average(const Spectrum& spectrum, const SensorBand& band);

// Precomputed grid-index ranges for repeated band averaging on one grid.
class BandResampler {
 public:
  BandResampler(const SpectralGrid& grid, const BandSet& bands);

  std::size_t band_count() const { return ranges_.size(); }
  // `values` are samples on the resampler's grid; writes band_count() outputs.
  void apply(std::span<const double> values, std::span<float> out) const;
  std::vector<double> apply(const Spectrum& spectrum) const;

 private:
  SpectralGrid grid_;
  std::vector<std::pair<std::size_t, std::size_t>> ranges_;  // [first, last)
};

// ---------------------------------------------------------------------------
// Trait model

inline constexpr std::size_t kTraitCount = 16;

// Canonical trait order; also the band order of every trait raster.
enum class Trait : std::size_t {
  n_struct,
  cab,
  car,
  cant,
  cbrown,
  cw,
  cm,
  lai,
  lidfa,
  lidfb,
  type_lidf,
  hspot,
  soil_index,
  theta_s,
  theta_v,
  phi_rel,
};

std::string_view trait_name(Trait t);
std::string_view trait_name(std::size_t index);
const std::array<std::string, kTraitCount>& trait_names();

struct ParameterVector {
  std::array<double, kTraitCount> values{};

  double& operator[](Trait t) { return values[static_cast<std::size_t>(t)]; }
  double operator[](Trait t) const { return values[static_cast<std::size_t>(t)]; }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  static ParameterVector from_span(std::span<const double> values);

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

struct Interval {
  double min = 0.0;
  double max = 0.0;

  bool degenerate() const { return min == max; }
  double width() const { return max - min; }
  bool contains(double v, double tol = 0.0) const { return v >= min - tol && v <= max + tol; }
};

class ParameterRanges {
 public:
  // Table ranges with the soil selector fixed to `soil_index`.
  static ParameterRanges defaults(std::size_t soil_index = 0);

  Interval& operator[](Trait t) { return intervals_[static_cast<std::size_t>(t)]; }
  const Interval& operator[](Trait t) const { return intervals_[static_cast<std::size_t>(t)]; }
  const Interval& operator[](std::size_t i) const { return intervals_[i]; }
  Interval& operator[](std::size_t i) { return intervals_[i]; }

  // Throws ParameterError when min > max or the soil selector is not a fixed integer.
  void validate() const;
  // First trait outside its interval, or kTraitCount when all are inside.
  std::size_t first_violation(const ParameterVector& p, double tol = 1e-9) const;
  bool contains(const ParameterVector& p, double tol = 1e-9) const {
    return first_violation(p, tol) == kTraitCount;
  }

 private:
  std::array<Interval, kTraitCount> intervals_{};
};

}  // namespace hsforge
