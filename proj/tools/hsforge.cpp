// hsforge: command-line driver for the synthetic hyperspectral dataset pipeline.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "hsforge/inversion.hpp"
#include "hsforge/lut.hpp"
#include "hsforge/pipeline.hpp"
#include "hsforge/raster.hpp"
#include "hsforge/rtm.hpp"

namespace fs = std::filesystem;
using namespace hsforge;

namespace {

void add_pipeline_options(CLI::App& app, PipelineConfig& cfg) {
  app.add_option("--seed", cfg.seed, "Random seed");
  app.add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--region", cfg.region, "Region name; selects the soil spectrum");
  app.add_option("--grid-start,--grid_start", cfg.grid_start_nm, "First wavelength (nm)");
  app.add_option("--grid-end,--grid_end", cfg.grid_end_nm, "Last wavelength (nm)");
  app.add_option("--grid-step,--grid_step", cfg.grid_step_nm, "Wavelength step (nm)");
  app.add_option("--band-file,--band_file", cfg.band_file, "Band set override (name,center_nm,width_nm)");
  app.add_option("--coeff-file,--coeff_file", cfg.coeff_file, "Leaf coefficient CSV");
  app.add_option("--soil-file,--soil_file", cfg.soil_file, "Soil library CSV");

  app.add_option("--lut-size,--lut_size", cfg.lhs.target_size, "Number of LUT entries (M)");
  app.add_option("--max-refill-rounds,--max_refill_rounds", cfg.lhs.max_refill_rounds, "Extra LHS rounds");
  app.add_flag("!--no-refill,!--no_refill", cfg.lhs.refill, "Drop rejected samples instead of refilling to M");

  app.add_option("--coupling", cfg.constraints.coupling_enabled, "Enable the Cab-LAI envelope (true/false)");
  app.add_option("--coupling-intercept,--coupling_intercept", cfg.constraints.coupling_intercept);
  app.add_option("--coupling-slope,--coupling_slope", cfg.constraints.coupling_slope);
  app.add_option("--coupling-halfwidth,--coupling_halfwidth", cfg.constraints.coupling_halfwidth);
  app.add_option("--green-peak,--green_peak", cfg.constraints.green_peak_enabled,
                 "Enable the green-peak filter (true/false)");
  app.add_option("--green-threshold,--green_threshold", cfg.constraints.green_threshold_nm);

  app.add_option("--n-best,--n_best", cfg.inversion.n_best, "Ensemble size");
  app.add_option("--low-percentile,--low_percentile", cfg.inversion.low_percentile);
  app.add_option("--high-percentile,--high_percentile", cfg.inversion.high_percentile);

  app.add_option("--kd,--k_d", cfg.rtm.k_d, "Diffuse extinction per unit LAI");
  app.add_option("--max-zenith,--max_zenith_deg", cfg.rtm.max_zenith_deg, "Zenith clamp (degrees)");
}

std::vector<fs::path> find_tile_dirs(const fs::path& root) {
  const auto is_tile = [](const fs::path& p) {
    for (const char* stem : kBundleStems) {
      if (fs::exists(p / (std::string(stem) + ".hdr")) || fs::exists(p / (std::string(stem) + ".img"))) return true;
    }
    return false;
  };
  if (is_tile(root)) return {root};
  std::vector<fs::path> tiles;
  for (const auto& region : fs::directory_iterator(root)) {
    if (!region.is_directory()) continue;
    for (const auto& tile : fs::directory_iterator(region.path())) {
      if (tile.is_directory()) tiles.push_back(tile.path());
    }
  }
  std::sort(tiles.begin(), tiles.end());
  return tiles;
}

int run_validate(const std::vector<fs::path>& roots) {
  std::size_t tiles = 0, failed = 0;
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) {
      std::cerr << "hsforge: error: " << root.string() << ": not a directory\n";
      ++failed;
      continue;
    }
    for (const auto& dir : find_tile_dirs(root)) {
      ++tiles;
      const ValidationReport report = validate_bundle(dir);
      if (report.ok()) continue;
      ++failed;
      for (const auto& v : report.violations) std::cerr << "hsforge: error: " << dir.string() << ": " << v << '\n';
    }
  }
  std::cout << "validated " << tiles << " tile(s), " << failed << " with violations\n";
  return failed == 0 && tiles > 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}

std::pair<std::size_t, std::size_t> parse_pixel(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw CLI::ValidationError("--pixel", "expected row,col but got " + text);
  return {std::stoul(text.substr(0, comma)), std::stoul(text.substr(comma + 1))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic hyperspectral dataset generator: LUT inversion and forward canopy simulation", "hsforge"};
  app.set_config("--config", "", "INI file of key = value settings; command-line flags take precedence");
  app.require_subcommand(1);
  app.fallthrough();

  PipelineConfig cfg;
  add_pipeline_options(app, cfg);

  fs::path out;
  fs::path input;
  fs::path lut_path;
  bool overwrite = false;

  auto* gen_coeffs = app.add_subcommand("gen-coeffs", "Write the reference leaf coefficient table");
  gen_coeffs->add_option("--out", out, "Output CSV")->required();

  std::vector<std::string> regions = reference_regions();
  auto* gen_soil = app.add_subcommand("gen-soil", "Write the reference soil library");
  gen_soil->add_option("--out", out, "Output CSV")->required();
  gen_soil->add_option("--regions", regions, "Region names")->delimiter(',');

  auto* build_lut_cmd = app.add_subcommand("build-lut", "Sample, simulate, filter, and save the lookup table");
  build_lut_cmd->add_option("--out", out, "Output LUT file")->required();

  SyntheticSceneSpec scene;
  auto* synth = app.add_subcommand("synth-input", "Generate synthetic 12-band input tiles with ground truth");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--tiles", scene.tiles, "Number of tiles");
  synth->add_option("--smoothness", scene.smoothness, "Trait-field correlation length (pixels)");
  synth->add_option("--noise-sigma,--noise_sigma", scene.noise_sigma, "Additive Gaussian noise on band values");
  synth->add_option("--tile-prefix,--tile_prefix", scene.tile_prefix, "Tile identifier prefix");

  auto* invert = app.add_subcommand("invert", "Invert one multiband raster against a LUT");
  invert->add_option("--lut", lut_path, "LUT file")->required();
  invert->add_option("--input", input, "Input raster stem (without .img/.hdr)")->required();
  invert->add_option("--out", out, "Output directory for traits/p5/p95/cost")->required();

  auto* simulate = app.add_subcommand("simulate", "Forward-simulate a trait raster to a full-spectrum cube");
  simulate->add_option("--traits", input, "Trait raster stem")->required();
  simulate->add_option("--out", out, "Output raster stem")->required();

  auto* make_dataset = app.add_subcommand("make-dataset", "Invert input tiles and write tile bundles");
  make_dataset->add_option("--input", input, "Directory of input tiles")->required();
  make_dataset->add_option("--lut", lut_path, "LUT file")->required();
  make_dataset->add_option("--out", out, "Dataset root")->required();
  make_dataset->add_flag("--overwrite", overwrite, "Replace existing tile directories");

  std::vector<fs::path> validate_paths;
  auto* validate = app.add_subcommand("validate", "Check tile bundles (a tile directory or a dataset root)");
  validate->add_option("paths", validate_paths, "Tile directories or dataset roots")->required();

  std::vector<std::string> pixel_args;
  auto* export_spectra = app.add_subcommand("export-spectra", "Export pixel spectra as CSV");
  export_spectra->add_option("--cube", input, "Cube raster stem")->required();
  export_spectra->add_option("--pixel", pixel_args, "Pixel as row,col (repeatable)")->required();
  export_spectra->add_option("--out", out, "Output CSV (default stdout)");

  std::size_t bench_pixels = 4096;
  auto* bench = app.add_subcommand("bench", "Time the naive and optimized search kernels");
  bench->add_option("--lut", lut_path, "LUT file")->required();
  bench->add_option("--pixels", bench_pixels, "Number of observations");

  CLI11_PARSE(app, argc, argv);

  try {
    cfg.validate();
    if (gen_coeffs->parsed()) {
      save_coefficients(generate_reference_coefficients(cfg.grid()), out);
    } else if (gen_soil->parsed()) {
      save_soils(generate_reference_soils(cfg.grid(), regions), out);
    } else if (build_lut_cmd->parsed()) {
      LutBuildStats stats;
      const LookupTable lut = build_lut_for(cfg, &stats);
      save_lut(lut, out);
      std::cout << "entries=" << lut.size() << " candidates=" << stats.candidates
                << " coupling_rejections=" << stats.coupling_rejections
                << " green_peak_rejections=" << stats.green_peak_rejections << " rounds=" << stats.rounds
                << " digest=" << to_hex(lut.config_digest) << '\n';
    } else if (synth->parsed()) {
      scene.seed = cfg.seed;
      for (const auto& id : cmd_synth_input(scene, cfg, out)) std::cout << id << '\n';
    } else if (invert->parsed()) {
      const LookupTable lut = load_lut(lut_path, cfg.grid());
      const RasterCube cube = read_raster(input);
      const TraitMaps maps = invert_image(cube, lut, cfg.inversion, cfg.workers);
      fs::create_directories(out);
      write_raster(traits_to_raster(maps.median, maps.rows, maps.cols), out / "traits");
      write_raster(traits_to_raster(maps.p5, maps.rows, maps.cols), out / "p5");
      write_raster(traits_to_raster(maps.p95, maps.rows, maps.cols), out / "p95");
      RasterCube cost(maps.rows, maps.cols, 1, DataType::float32);
      auto c = cost.data<float>();
      for (std::size_t p = 0; p < maps.pixels(); ++p) c[p] = static_cast<float>(maps.cost[p]);
      cost.band_names = {"rmse"};
      write_raster(cost, out / "cost");
      std::cout << "mean_cost=" << maps.mean_cost() << " invalid_pixels=" << maps.invalid_count() << '\n';
    } else if (simulate->parsed()) {
      const RtmInputs rtm = cfg.rtm_inputs();
      const TraitMaps traits = traits_from_raster(read_raster(input));
      write_raster(simulate_from_traits(traits, rtm, cfg.ranges(rtm), cfg.workers), out);
    } else if (make_dataset->parsed()) {
      const LookupTable lut = load_lut(lut_path, cfg.grid());
      const auto manifest = cmd_make_dataset(input, lut, out, cfg, overwrite);
      int failures = 0;
      for (const auto& row : manifest) {
        if (row.status == "ok") {
          std::cout << row.tile_id << " ok\n";
        } else {
          std::cerr << "hsforge: error: tile " << row.tile_id << ": " << row.status << '\n';
          ++failures;
        }
      }
      if (manifest.empty()) {
        std::cerr << "hsforge: error: no input tiles found in " << input.string() << '\n';
        return EXIT_FAILURE;
      }
      return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
    } else if (validate->parsed()) {
      return run_validate(validate_paths);
    } else if (export_spectra->parsed()) {
      std::vector<std::pair<std::size_t, std::size_t>> pixels;
      for (const auto& p : pixel_args) pixels.push_back(parse_pixel(p));
      const RasterCube cube = read_raster(input);
      if (out.empty()) {
        cmd_export_spectra(cube, pixels, std::cout);
      } else {
        std::ofstream file(out);
        if (!file) throw std::runtime_error("cannot write " + out.string());
        cmd_export_spectra(cube, pixels, file);
      }
    } else if (bench->parsed()) {
      const LookupTable lut = load_lut(lut_path, cfg.grid());
      const BenchReport report = cmd_bench(lut, bench_pixels, cfg.workers, cfg.inversion.n_best, cfg.seed);
      report.print(std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "hsforge: error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
