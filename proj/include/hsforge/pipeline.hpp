#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "hsforge/inversion.hpp"
#include "hsforge/lut.hpp"
#include "hsforge/raster.hpp"
#include "hsforge/rtm.hpp"
#include "hsforge/spectral.hpp"

namespace hsforge {

// Reference soil regions shipped with the generator.
const std::vector<std::string>& reference_regions();

struct PipelineConfig {
  double grid_start_nm = 400.0;
  double grid_end_nm = 2500.0;
  double grid_step_nm = 10.0;
  std::optional<std::filesystem::path> band_file;
  std::optional<std::filesystem::path> coeff_file;
  std::optional<std::filesystem::path> soil_file;
  LhsConfig lhs;
  ConstraintConfig constraints;
  InversionConfig inversion;
  RtmConfig rtm;
  std::string region = "france";
  int workers = 1;
  std::uint64_t seed = 0;

  SpectralGrid grid() const;
  BandSet bands() const;
  // Coefficients and soil library; the region must name a soil.
  RtmInputs rtm_inputs() const;
  // Table ranges with the soil selector fixed to the region's soil.
  ParameterRanges ranges(const RtmInputs& rtm) const;
  // LHS settings with the configured seed and region ranges applied.
  LhsConfig lhs_config(const RtmInputs& rtm) const;
  void validate() const;
};

LookupTable build_lut_for(const PipelineConfig& cfg, LutBuildStats* stats = nullptr);

struct SyntheticSceneSpec {
  std::size_t tiles = 4;
  std::size_t rows = kTileSize;
  std::size_t cols = kTileSize;
  double smoothness = 8.0;  // trait-field correlation length in pixels
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::string tile_prefix = "SYN";

  void validate() const;
};

struct SyntheticTile {
  std::string tile_id;
  RasterCube sensor;       // rows x cols x bands float32
  RasterCube truth;        // rows x cols x 16 float32
  RasterCube scene_class;  // rows x cols x 1 uint8
  std::vector<ParameterVector> truth_params;  // row-major pixels, full precision
};

std::string synthetic_tile_id(const SyntheticSceneSpec& spec, std::size_t tile);

// Smooth value-noise field in (0, 1), row-major.
std::vector<double> value_noise_field(std::size_t rows, std::size_t cols, double correlation_px, std::uint64_t seed);

SyntheticTile synthesize_tile(const SyntheticSceneSpec& spec, const PipelineConfig& cfg, const RtmInputs& rtm,
                              const BandSet& bands, std::size_t tile);

// Writes <out_dir>/<tile_id>/{sensor,truth,quality_scene_classification}.
std::vector<std::string> cmd_synth_input(const SyntheticSceneSpec& spec, const PipelineConfig& cfg,
                                         const std::filesystem::path& out_dir);

struct ManifestRow {
  std::string tile_id;
  double mean_cost = 0.0;
  std::size_t invalid_pixels = 0;
  std::string status;  // "ok" or the error message
};

inline constexpr const char* kSensorStem = "sensor";
inline constexpr const char* kTruthStem = "truth";

// Tile directories under `input_dir` holding a `sensor` raster, sorted by name.
std::vector<std::filesystem::path> list_input_tiles(const std::filesystem::path& input_dir);

// Inverts, simulates, and writes one bundle per input tile, then writes
// `<dataset_root>/<region>_manifest.csv`.
std::vector<ManifestRow> cmd_make_dataset(const std::filesystem::path& input_dir, const LookupTable& lut,
                                          const std::filesystem::path& dataset_root, const PipelineConfig& cfg,
                                          bool overwrite = false);

void write_manifest(const std::vector<ManifestRow>& rows, const std::filesystem::path& path);

struct BenchTiming {
  SearchKernel kernel;
  int workers;
  double seconds;
  double comparisons_per_second;
};

struct BenchReport {
  std::size_t pixels = 0;
  std::size_t lut_size = 0;
  std::size_t bands = 0;
  std::size_t n_best = 0;
  std::vector<BenchTiming> timings;
  bool kernels_agree = false;
  bool workers_agree = false;

  const BenchTiming& timing(SearchKernel kernel, int workers) const;
  void print(std::ostream& out) const;
};

// Observations are LUT band vectors with Gaussian noise (sigma 0.01).
std::vector<float> benchmark_observations(const LookupTable& lut, std::size_t pixels, std::uint64_t seed);

// Times both kernels at 1 and `workers` threads. Throws std::runtime_error
// when any two runs disagree.
BenchReport cmd_bench(const LookupTable& lut, std::size_t pixel_count, int workers, std::size_t n_best,
                      std::uint64_t seed);

// CSV with header `wavelength_nm,r<row>_c<col>,...`, one row per band.
void cmd_export_spectra(const RasterCube& cube, const std::vector<std::pair<std::size_t, std::size_t>>& pixels,
                        std::ostream& out);

}  // namespace hsforge
