#include "hsforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "text_util.hpp"

namespace hsforge {

namespace fs = std::filesystem;

const std::vector<std::string>& reference_regions() {
  static const std::vector<std::string> regions = {"africa", "france", "india", "spain"};
  return regions;
}

// ---------------------------------------------------------------------------
// Configuration

SpectralGrid PipelineConfig::grid() const { return make_grid(grid_start_nm, grid_end_nm, grid_step_nm); }

BandSet PipelineConfig::bands() const { return band_file ? load_band_set(*band_file) : default_sensor_bands(); }

RtmInputs PipelineConfig::rtm_inputs() const {
  const SpectralGrid g = grid();
  RtmInputs rtm;
  rtm.coeffs = coeff_file ? load_coefficients(*coeff_file, g) : generate_reference_coefficients(g);
  if (soil_file) {
    rtm.soils = load_soils(*soil_file, g);
  } else {
    auto regions = reference_regions();
    if (std::find(regions.begin(), regions.end(), region) == regions.end()) regions.push_back(region);
    rtm.soils = generate_reference_soils(g, regions);
  }
  rtm.soils.index_of(region);  // throws for an unknown region
  rtm.config = this->rtm;
  return rtm;
}

ParameterRanges PipelineConfig::ranges(const RtmInputs& rtm) const {
  ParameterRanges r = lhs.ranges;
  const double soil = static_cast<double>(rtm.soils.index_of(region));
  r[Trait::soil_index] = {soil, soil};
  return r;
}

LhsConfig PipelineConfig::lhs_config(const RtmInputs& rtm) const {
  LhsConfig out = lhs;
  out.seed = seed;
  out.ranges = ranges(rtm);
  return out;
}

void PipelineConfig::validate() const {
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (region.empty()) throw std::invalid_argument("region must not be empty");
  const SpectralGrid g = grid();
  constraints.validate(g);
  rtm.validate();
  if (lhs.target_size == 0) throw std::invalid_argument("lut size must be positive");
  if (!(inversion.low_percentile >= 0.0 && inversion.low_percentile < inversion.high_percentile &&
        inversion.high_percentile <= 1.0)) {
    throw std::invalid_argument("percentiles must satisfy 0 <= low < high <= 1");
  }
  if (inversion.n_best == 0) throw std::invalid_argument("n_best must be positive");
}

LookupTable build_lut_for(const PipelineConfig& cfg, LutBuildStats* stats) {
  cfg.validate();
  const RtmInputs rtm = cfg.rtm_inputs();
  return build_lut(cfg.lhs_config(rtm), cfg.constraints, rtm, cfg.bands(), cfg.workers, stats);
}

// ---------------------------------------------------------------------------
// Synthetic scenes

void SyntheticSceneSpec::validate() const {
  if (tiles == 0 || rows == 0 || cols == 0) throw std::invalid_argument("synthetic scene counts must be positive");
  if (!(smoothness > 0.0)) throw std::invalid_argument("smoothness must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise sigma must be non-negative");
}

std::string synthetic_tile_id(const SyntheticSceneSpec& spec, std::size_t tile) {
  std::ostringstream id;
  id << spec.tile_prefix << '_' << std::setw(4) << std::setfill('0') << tile;
  return id.str();
}

std::vector<double> value_noise_field(std::size_t rows, std::size_t cols, double correlation_px, std::uint64_t seed) {
  const auto nodes = [&](std::size_t n) { return static_cast<std::size_t>(std::floor((n - 1) / correlation_px)) + 2; };
  const std::size_t nr = nodes(rows), nc = nodes(cols);
  Rng rng(seed);
  std::vector<double> lattice(nr * nc);
  for (auto& v : lattice) v = rng.uniform_open();
  const auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };

  std::vector<double> field(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = static_cast<double>(r) / correlation_px;
    const auto y0 = static_cast<std::size_t>(y);
    const double ty = smooth(y - static_cast<double>(y0));
    for (std::size_t c = 0; c < cols; ++c) {
      const double x = static_cast<double>(c) / correlation_px;
      const auto x0 = static_cast<std::size_t>(x);
      const double tx = smooth(x - static_cast<double>(x0));
      const double v00 = lattice[y0 * nc + x0], v01 = lattice[y0 * nc + x0 + 1];
      const double v10 = lattice[(y0 + 1) * nc + x0], v11 = lattice[(y0 + 1) * nc + x0 + 1];
      const double top = v00 + tx * (v01 - v00);
      const double bottom = v10 + tx * (v11 - v10);
      field[r * cols + c] = std::clamp(top + ty * (bottom - top), 0.0, 1.0);
    }
  }
  return field;
}

SyntheticTile synthesize_tile(const SyntheticSceneSpec& spec, const PipelineConfig& cfg, const RtmInputs& rtm,
                              const BandSet& bands, std::size_t tile) {
  spec.validate();
  const std::size_t pixels = spec.rows * spec.cols;
  const std::uint64_t tile_seed = derive_seed(spec.seed, tile);
  const ParameterRanges ranges = cfg.ranges(rtm);
  const auto is_geometry = [](std::size_t j) {
    return j == static_cast<std::size_t>(Trait::theta_s) || j == static_cast<std::size_t>(Trait::theta_v) ||
           j == static_cast<std::size_t>(Trait::phi_rel);
  };

  SyntheticTile out;
  out.tile_id = synthetic_tile_id(spec, tile);
  out.truth_params.resize(pixels);

  // One acquisition geometry per tile, spatial fields for everything else.
  Rng geometry_rng(derive_seed(tile_seed, 1000));
  for (std::size_t j = 0; j < kTraitCount; ++j) {
    const Interval& iv = ranges[j];
    if (iv.degenerate()) {
      for (auto& p : out.truth_params) p[j] = iv.min;
    } else if (is_geometry(j)) {
      const double v = iv.min + geometry_rng.uniform_open() * iv.width();
      for (auto& p : out.truth_params) p[j] = v;
    } else {
      const auto field = value_noise_field(spec.rows, spec.cols, spec.smoothness, derive_seed(tile_seed, j));
      for (std::size_t p = 0; p < pixels; ++p) out.truth_params[p][j] = iv.min + field[p] * iv.width();
    }
  }
  // Chlorophyll follows the LUT's coupling envelope so scenes stay inside the sampled prior.
  if (cfg.constraints.coupling_enabled && !ranges[Trait::cab].degenerate()) {
    const auto& c = cfg.constraints;
    const Interval& cab = ranges[Trait::cab];
    const auto field =
        value_noise_field(spec.rows, spec.cols, spec.smoothness, derive_seed(tile_seed, static_cast<std::uint64_t>(Trait::cab)));
    for (std::size_t p = 0; p < pixels; ++p) {
      auto& params = out.truth_params[p];
      const double center = c.coupling_intercept + c.coupling_slope * params[Trait::lai];
      params[Trait::cab] = std::clamp(center + c.coupling_halfwidth * (2.0 * field[p] - 1.0), cab.min, cab.max);
    }
  }

  const std::size_t nb = bands.size();
  const BandResampler resampler(rtm.coeffs.grid, bands);
  out.sensor = RasterCube(spec.rows, spec.cols, nb, DataType::float32);
  out.sensor.band_names = bands.names();
  std::vector<float> pixel_bands(pixels * nb);

  std::exception_ptr failure;
  std::size_t failure_pixel = SIZE_MAX;
#pragma omp parallel for schedule(dynamic, 16) num_threads(cfg.workers)
  for (std::size_t p = 0; p < pixels; ++p) {
    try {
      const Spectrum s = forward(out.truth_params[p], rtm);
      resampler.apply(s.values(), std::span<float>(pixel_bands).subspan(p * nb, nb));
    } catch (...) {
#pragma omp critical(hsforge_synth_failure)
      if (p < failure_pixel) {
        failure_pixel = p;
        failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);

  auto sensor = out.sensor.data<float>();
  Rng noise_rng(derive_seed(tile_seed, 2000));
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t b = 0; b < nb; ++b) {
      float v = pixel_bands[p * nb + b];
      if (spec.noise_sigma > 0.0) v = static_cast<float>(static_cast<double>(v) + spec.noise_sigma * noise_rng.normal());
      sensor[b * pixels + p] = v;
    }
  }

  std::vector<double> truth(pixels * kTraitCount);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t t = 0; t < kTraitCount; ++t) truth[t * pixels + p] = out.truth_params[p][t];
  }
  out.truth = traits_to_raster(truth, spec.rows, spec.cols);

  // Sentinel-2 scene classes: 4 vegetation, 5 not vegetated.
  out.scene_class = RasterCube(spec.rows, spec.cols, 1, DataType::uint8);
  auto cls = out.scene_class.data<std::uint8_t>();
  for (std::size_t p = 0; p < pixels; ++p) cls[p] = out.truth_params[p][Trait::lai] >= 0.5 ? 4 : 5;
  return out;
}

std::vector<std::string> cmd_synth_input(const SyntheticSceneSpec& spec, const PipelineConfig& cfg,
                                         const fs::path& out_dir) {
  spec.validate();
  cfg.validate();
  const RtmInputs rtm = cfg.rtm_inputs();
  const BandSet bands = cfg.bands();
  std::vector<std::string> ids;
  for (std::size_t t = 0; t < spec.tiles; ++t) {
    const SyntheticTile tile = synthesize_tile(spec, cfg, rtm, bands, t);
    const fs::path dir = out_dir / tile.tile_id;
    fs::create_directories(dir);
    write_raster(tile.sensor, dir / kSensorStem);
    write_raster(tile.truth, dir / kTruthStem);
    write_raster(tile.scene_class, dir / "quality_scene_classification");
    ids.push_back(tile.tile_id);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Dataset assembly

std::vector<fs::path> list_input_tiles(const fs::path& input_dir) {
  if (!fs::is_directory(input_dir)) throw std::runtime_error("input directory " + input_dir.string() + " not found");
  std::vector<fs::path> tiles;
  for (const auto& entry : fs::directory_iterator(input_dir)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / (std::string(kSensorStem) + ".hdr"))) {
      tiles.push_back(entry.path());
    }
  }
  std::sort(tiles.begin(), tiles.end());
  return tiles;
}

void write_manifest(const std::vector<ManifestRow>& rows, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << "tile_id,mean_cost,invalid_pixels,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.tile_id << ',' << detail::format_number(r.mean_cost) << ',' << r.invalid_pixels << ',' << status << '\n';
  }
}

std::vector<ManifestRow> cmd_make_dataset(const fs::path& input_dir, const LookupTable& lut, const fs::path& dataset_root,
                                          const PipelineConfig& cfg, bool overwrite) {
  cfg.validate();
  const RtmInputs rtm = cfg.rtm_inputs();
  if (!(lut.grid == rtm.coeffs.grid)) throw LutGridMismatchError("LUT grid differs from the pipeline grid");
  const ParameterRanges ranges = cfg.ranges(rtm);
  std::vector<ManifestRow> manifest;
  for (const auto& tile_dir : list_input_tiles(input_dir)) {
    ManifestRow row;
    row.tile_id = tile_dir.filename().string();
    try {
      const RasterCube sensor = read_raster(tile_dir / kSensorStem);
      const TraitMaps maps = invert_image(sensor, lut, cfg.inversion, cfg.workers);
      TileBundle bundle;
      bundle.region = cfg.region;
      bundle.tile_id = row.tile_id;
      bundle.surf_refl = simulate_from_traits(maps, rtm, ranges, cfg.workers);
      bundle.traits = traits_to_raster(maps.median, maps.rows, maps.cols);
      bundle.p5 = traits_to_raster(maps.p5, maps.rows, maps.cols);
      bundle.p95 = traits_to_raster(maps.p95, maps.rows, maps.cols);
      const fs::path scl = tile_dir / "quality_scene_classification";
      if (fs::is_regular_file(fs::path(scl).concat(".hdr"))) {
        bundle.scene_class = read_raster(scl);
      } else {
        bundle.scene_class = RasterCube(maps.rows, maps.cols, 1, DataType::uint8);
      }
      write_tile_bundle(bundle, dataset_root, overwrite);
      row.mean_cost = maps.mean_cost();
      row.invalid_pixels = maps.invalid_count();
      row.status = "ok";
    } catch (const std::exception& e) {
      row.mean_cost = std::numeric_limits<double>::quiet_NaN();
      row.status = std::string("error: ") + e.what();
    }
    manifest.push_back(std::move(row));
  }
  write_manifest(manifest, dataset_root / (cfg.region + "_manifest.csv"));
  return manifest;
}

// ---------------------------------------------------------------------------
// Benchmark

const BenchTiming& BenchReport::timing(SearchKernel kernel, int workers) const {
  for (const auto& t : timings) {
    if (t.kernel == kernel && t.workers == workers) return t;
  }
  throw std::out_of_range("no timing for requested kernel/worker combination");
}

void BenchReport::print(std::ostream& out) const {
  out << "pixels=" << pixels << " lut_entries=" << lut_size << " bands=" << bands << " n_best=" << n_best << '\n';
  for (const auto& t : timings) {
    out << std::left << std::setw(10) << kernel_name(t.kernel) << " workers=" << std::setw(3) << t.workers
        << " seconds=" << std::fixed << std::setprecision(3) << t.seconds << " throughput=" << std::scientific
        << std::setprecision(3) << t.comparisons_per_second << " cmp/s" << std::defaultfloat << '\n';
  }
  out << "kernels_agree=" << (kernels_agree ? "yes" : "no") << " workers_agree=" << (workers_agree ? "yes" : "no")
      << '\n';
}

std::vector<float> benchmark_observations(const LookupTable& lut, std::size_t pixels, std::uint64_t seed) {
  if (lut.size() == 0) throw std::invalid_argument("LUT is empty");
  const std::size_t nb = lut.band_count();
  Rng rng(seed);
  std::vector<float> obs(pixels * nb);
  for (std::size_t p = 0; p < pixels; ++p) {
    const auto src = lut.bands(rng.below(lut.size()));
    for (std::size_t b = 0; b < nb; ++b) obs[p * nb + b] = static_cast<float>(src[b] + 0.01 * rng.normal());
  }
  return obs;
}

BenchReport cmd_bench(const LookupTable& lut, std::size_t pixel_count, int workers, std::size_t n_best,
                      std::uint64_t seed) {
  if (pixel_count == 0) throw std::invalid_argument("pixel count must be positive");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  const auto obs = benchmark_observations(lut, pixel_count, seed);
  BenchReport report;
  report.pixels = pixel_count;
  report.lut_size = lut.size();
  report.bands = lut.band_count();
  report.n_best = n_best;

  std::vector<int> worker_counts = {1};
  if (workers != 1) worker_counts.push_back(workers);
  std::vector<std::vector<Neighbor>> results;
  for (const SearchKernel kernel : {SearchKernel::naive, SearchKernel::optimized}) {
    for (const int w : worker_counts) {
      std::vector<Neighbor> out(pixel_count * n_best);
      const auto t0 = std::chrono::steady_clock::now();
      search_batch(obs, lut, n_best, kernel, w, out);
      const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const double comparisons = static_cast<double>(pixel_count) * static_cast<double>(lut.size());
      report.timings.push_back({kernel, w, seconds, comparisons / seconds});
      results.push_back(std::move(out));
    }
  }
  const std::size_t per_kernel = worker_counts.size();
  report.workers_agree = true;
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 1; i < per_kernel; ++i) {
      report.workers_agree = report.workers_agree && results[k * per_kernel + i] == results[k * per_kernel];
    }
  }
  report.kernels_agree = results[0] == results[per_kernel];
  if (!report.kernels_agree || !report.workers_agree) {
    std::ostringstream msg;
    report.print(msg);
    throw std::runtime_error("search kernels disagree\n" + msg.str());
  }
  return report;
}

void cmd_export_spectra(const RasterCube& cube, const std::vector<std::pair<std::size_t, std::size_t>>& pixels,
                        std::ostream& out) {
  if (pixels.empty()) throw std::invalid_argument("pixel list is empty");
  if (cube.wavelengths.size() != cube.bands()) {
    throw std::invalid_argument("cube header has no wavelength axis");
  }
  for (const auto& [r, c] : pixels) {
    if (r >= cube.rows() || c >= cube.cols()) {
      throw std::invalid_argument("pixel (" + std::to_string(r) + ", " + std::to_string(c) + ") outside " +
                                  std::to_string(cube.rows()) + "x" + std::to_string(cube.cols()) + " cube");
    }
  }
  out << "wavelength_nm";
  for (const auto& [r, c] : pixels) out << ",r" << r << "_c" << c;
  out << '\n';
  const auto data = cube.data<float>();
  for (std::size_t b = 0; b < cube.bands(); ++b) {
    out << detail::format_number(cube.wavelengths[b]);
    for (const auto& [r, c] : pixels) out << ',' << detail::format_number(data[cube.index(r, c, b)]);
    out << '\n';
  }
}

}  // namespace hsforge
