#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsforge/rtm.hpp"
#include "hsforge/spectral.hpp"

namespace hsforge {

class ConstraintInfeasibleError : public std::runtime_error {
 public:
  ConstraintInfeasibleError(const std::string& what, double acceptance_rate)
      : std::runtime_error(what), acceptance_rate_(acceptance_rate) {}
  double acceptance_rate() const { return acceptance_rate_; }

 private:
  double acceptance_rate_;
};

class LutFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LutGridMismatchError : public LutFormatError {
 public:
  using LutFormatError::LutFormatError;
};

struct LhsConfig {
  std::size_t target_size = 50000;
  std::uint64_t seed = 0;
  ParameterRanges ranges = ParameterRanges::defaults();
  int max_refill_rounds = 20;
  // false: a single sampling round, rejected candidates are dropped.
  bool refill = true;
};

struct ConstraintConfig {
  bool coupling_enabled = true;
  double coupling_intercept = 10.0;  // ug/cm2
  double coupling_slope = 15.0;      // ug/cm2 per unit LAI
  double coupling_halfwidth = 40.0;  // ug/cm2
  bool green_peak_enabled = true;
  double green_window_lo_nm = 500.0;
  double green_window_hi_nm = 600.0;
  double green_threshold_nm = 547.0;

  void validate(const SpectralGrid& grid) const;
};

// mt19937_64 with portable uniform, integer, and normal transforms
// (the std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  // Uniform on the open interval (0, 1).
  double uniform_open();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double normal();

 private:
  std::mt19937_64 engine_;
};

// Seed for the `stream`-th independent draw sequence derived from `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Latin hypercube over the ranges; degenerate ranges emit their fixed value.
std::vector<ParameterVector> lhs_sample(const ParameterRanges& ranges, std::size_t m, std::uint64_t seed);

bool cab_lai_accept(const ParameterVector& params, const ConstraintConfig& constraints);
bool green_peak_accept(const Spectrum& spectrum, const ConstraintConfig& constraints);
// Wavelength of the maximum inside the green window; ties go to the longer wavelength.
double green_peak_wavelength(const Spectrum& spectrum, const ConstraintConfig& constraints);

using Digest = std::array<std::uint8_t, 32>;

// Simulated entries searched during inversion. Spectra and band values are
// stored row-major, one row per entry.
struct LookupTable {
  SpectralGrid grid;
  std::vector<std::string> band_names;
  std::vector<ParameterVector> params;
  std::vector<float> spectra;      // size() * grid.count
  std::vector<float> band_values;  // size() * band_names.size()
  std::uint64_t seed = 0;
  Digest config_digest{};

  std::size_t size() const { return params.size(); }
  std::size_t band_count() const { return band_names.size(); }
  std::span<const float> spectrum(std::size_t i) const {
    return std::span<const float>(spectra).subspan(i * grid.count, grid.count);
  }
  std::span<const float> bands(std::size_t i) const {
    return std::span<const float>(band_values).subspan(i * band_count(), band_count());
  }
  void validate() const;
};

struct LutBuildStats {
  std::size_t candidates = 0;
  std::size_t coupling_rejections = 0;
  std::size_t green_peak_rejections = 0;
  int rounds = 0;
  double acceptance_rate() const {
    return candidates == 0 ? 0.0
                           : 1.0 - static_cast<double>(coupling_rejections + green_peak_rejections) /
                                       static_cast<double>(candidates);
  }
};

LookupTable build_lut(const LhsConfig& lhs, const ConstraintConfig& constraints, const RtmInputs& rtm,
                      const BandSet& bands, int workers = 1, LutBuildStats* stats = nullptr);

// Digest of every input that determines the table contents.
Digest lut_config_digest(const LhsConfig& lhs, const ConstraintConfig& constraints, const RtmInputs& rtm,
                         const BandSet& bands);

void save_lut(const LookupTable& lut, const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_lut(const LookupTable& lut);
LookupTable load_lut(const std::filesystem::path& path, const SpectralGrid& expected_grid = SpectralGrid::canonical());
LookupTable deserialize_lut(std::span<const std::uint8_t> bytes,
                            const SpectralGrid& expected_grid = SpectralGrid::canonical());

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace hsforge
