// Acceptance checks, one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance --only 8   run a single criterion

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "hsforge/pipeline.hpp"
#include "support/random_lut.hpp"
#include "support/tmpdir.hpp"

using namespace hsforge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const SpectralGrid kGrid = SpectralGrid::canonical();

PipelineConfig base_config(std::size_t lut_size, int workers) {
  PipelineConfig cfg;
  cfg.lhs.target_size = lut_size;
  cfg.seed = 2024;
  cfg.workers = workers;
  return cfg;
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// ---------------------------------------------------------------------------
// Oracles

// Sort a copy, then interpolate at h = (n - 1) q.
double sorted_interp(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double h = static_cast<double>(v.size() - 1) * q;
  const auto f = static_cast<std::size_t>(h);
  if (f + 1 >= v.size()) return v.back();
  return v[f] + (h - static_cast<double>(f)) * (v[f + 1] - v[f]);
}

std::vector<Neighbor> full_sort(std::span<const float> obs, const LookupTable& lut, std::size_t n) {
  std::vector<Neighbor> all(lut.size());
  for (std::size_t i = 0; i < lut.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const double d = static_cast<double>(obs[k]) - static_cast<double>(lut.bands(i)[k]);
      s += d * d;
    }
    all[i] = {i, std::sqrt(s / static_cast<double>(obs.size()))};
  }
  std::stable_sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) { return a.cost < b.cost; });
  all.resize(n);
  return all;
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    i = j + 1;
  }
  return rank;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

RasterCube cube_from_pixels(const std::vector<float>& obs, std::size_t rows, std::size_t cols,
                            const LookupTable& lut) {
  const std::size_t nb = lut.band_count();
  RasterCube cube(rows, cols, nb, DataType::float32);
  cube.band_names = lut.band_names;
  auto d = cube.data<float>();
  for (std::size_t p = 0; p < rows * cols; ++p) {
    for (std::size_t b = 0; b < nb; ++b) d[b * rows * cols + p] = obs[p * nb + b];
  }
  return cube;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome grid_constant() {
  const auto t0 = Clock::now();
  const auto g = make_grid(400, 2500, 10);
  const double dt = seconds_since(t0);
  const bool ok = g.count == 211 && g.wavelength(g.count - 1) == 2500.0 && dt < 1e-3;
  return {ok, "count=" + std::to_string(g.count) + " last=" + fmt("%.17g", g.wavelength(g.count - 1)) +
                  " time=" + fmt("%.2e", dt) + "s (211, 2500, <1ms)"};
}

Outcome lhs_stratification() {
  const auto t0 = Clock::now();
  const auto ranges = ParameterRanges::defaults();
  std::size_t bad_strata = 0, bad_fixed = 0;
  for (std::size_t m : {10, 256}) {
    const auto s = lhs_sample(ranges, m, 31 + m);
    for (std::size_t j = 0; j < kTraitCount; ++j) {
      const Interval& iv = ranges[j];
      if (iv.degenerate()) {
        for (const auto& p : s) bad_fixed += p[j] != iv.min;
        continue;
      }
      std::vector<std::size_t> per_stratum(m, 0);
      for (const auto& p : s) {
        const double pos = (p[j] - iv.min) / iv.width() * static_cast<double>(m);
        const auto k = static_cast<std::size_t>(std::floor(pos));
        if (k < m) ++per_stratum[k];
      }
      for (auto c : per_stratum) bad_strata += c != 1;
    }
    for (const auto& p : s) bad_fixed += (p[Trait::lidfb] != 0.0) + (p[Trait::type_lidf] != 1.0);
  }
  const double dt = seconds_since(t0);
  return {bad_strata == 0 && bad_fixed == 0 && dt < 1.0,
          "strata_violations=" + std::to_string(bad_strata) + " fixed_violations=" + std::to_string(bad_fixed) +
              " time=" + fmt("%.3f", dt) + "s (0, 0, <1s)"};
}

Outcome leaf_energy() {
  const auto t0 = Clock::now();
  const auto coeffs = generate_reference_coefficients(kGrid);
  double worst_zero = 0.0, worst_excess = -1.0;
  ParameterVector zero;  // all contents zero
  for (int i = 0; i <= 15; ++i) {
    zero[Trait::n_struct] = 1.0 + 0.1 * i;
    const auto leaf = leaf_optics(zero, coeffs);
    for (std::size_t k = 0; k < kGrid.count; ++k)
      worst_zero = std::max(worst_zero, std::abs(leaf.rho_leaf[k] + leaf.tau_leaf[k] - 1.0));
  }
  for (const auto& p : lhs_sample(ParameterRanges::defaults(), 1000, 77)) {
    const auto leaf = leaf_optics(p, coeffs);
    for (std::size_t k = 0; k < kGrid.count; ++k)
      worst_excess = std::max(worst_excess, leaf.rho_leaf[k] + leaf.tau_leaf[k] - 1.0);
  }
  const double dt = seconds_since(t0);
  return {worst_zero <= 1e-9 && worst_excess <= 1e-9 && dt < 5.0,
          "max|sum-1|(zero)=" + fmt("%.2e", worst_zero) + " max(sum-1)(random)=" + fmt("%.2e", worst_excess) +
              " time=" + fmt("%.2f", dt) + "s (<=1e-9, <=1e-9, <5s)"};
}

Outcome zero_canopy() {
  const auto t0 = Clock::now();
  const auto coeffs = generate_reference_coefficients(kGrid);
  const auto soils = generate_reference_soils(kGrid, reference_regions());
  auto ranges = ParameterRanges::defaults();
  ranges[Trait::soil_index] = {0, 0};
  double worst = 0.0;
  std::size_t i = 0;
  for (auto p : lhs_sample(ranges, 100, 5)) {
    p[Trait::lai] = 0.0;
    p[Trait::soil_index] = static_cast<double>(i++ % soils.size());
    const auto out = forward(p, coeffs, soils, RtmConfig{});
    const auto& s = soils.at(static_cast<std::size_t>(p[Trait::soil_index]));
    for (std::size_t k = 0; k < kGrid.count; ++k) worst = std::max(worst, std::abs(out[k] - s[k]));
  }
  const double dt = seconds_since(t0);
  return {worst <= 1e-12 && dt < 1.0, "max|rho-soil|=" + fmt("%.2e", worst) + " time=" + fmt("%.3f", dt) +
                                           "s (<=1e-12, <1s)"};
}

Outcome self_inversion() {
  const auto t0 = Clock::now();
  const auto cfg = base_config(5000, worker_count());
  const auto lut = build_lut_for(cfg);
  std::vector<float> obs;
  std::vector<std::size_t> picks;
  for (std::size_t k = 0; k < 100; ++k) {
    picks.push_back(k * 50 + 7);
    const auto b = lut.bands(picks.back());
    obs.insert(obs.end(), b.begin(), b.end());
  }
  const auto maps = invert_image(cube_from_pixels(obs, 10, 10, lut), lut, InversionConfig{}, cfg.workers);
  std::size_t wrong_top = 0, order_violations = 0;
  for (std::size_t p = 0; p < 100; ++p) {
    wrong_top += maps.best_index[p] != static_cast<std::int64_t>(picks[p]) || maps.cost[p] != 0.0;
    for (std::size_t t = 0; t < kTraitCount; ++t) {
      const std::size_t i = maps.index(t, p);
      order_violations += !(maps.p5[i] <= maps.median[i] && maps.median[i] <= maps.p95[i]);
    }
  }
  const double dt = seconds_since(t0);
  return {wrong_top == 0 && order_violations == 0 && dt < 5.0,
          "wrong_top1=" + std::to_string(wrong_top) + " order_violations=" + std::to_string(order_violations) +
              " time=" + fmt("%.2f", dt) + "s (0, 0, <5s)"};
}

Outcome percentile_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> u(-100, 100);
  InversionConfig cfg;
  double worst = 0.0;
  for (int e = 0; e < 10000; ++e) {
    std::vector<ParameterVector> ens(1 + e % 20);
    for (auto& p : ens) {
      for (std::size_t t = 0; t < kTraitCount; ++t) p[t] = u(gen);
    }
    const auto st = ensemble_stats(ens, cfg);
    for (std::size_t t = 0; t < kTraitCount; ++t) {
      std::vector<double> col;
      for (const auto& p : ens) col.push_back(p[t]);
      worst = std::max({worst, std::abs(st.median[t] - sorted_interp(col, 0.5)),
                        std::abs(st.low[t] - sorted_interp(col, 0.05)), std::abs(st.high[t] - sorted_interp(col, 0.95))});
    }
  }
  std::vector<ParameterVector> ten(10);
  for (int i = 0; i < 10; ++i) ten[i][Trait::cab] = 10 - i;
  const auto s = ensemble_stats(ten, cfg);
  const double m = s.median[Trait::cab], lo = s.low[Trait::cab], hi = s.high[Trait::cab];
  const bool example = std::abs(m - 5.5) <= 1e-12 && std::abs(lo - 1.45) <= 1e-12 && std::abs(hi - 9.55) <= 1e-12;
  const double dt = seconds_since(t0);
  return {worst <= 1e-12 && example && dt < 5.0,
          "max_dev=" + fmt("%.2e", worst) + " 1..10 -> (" + fmt("%.15g", m) + ", " + fmt("%.15g", lo) + ", " +
              fmt("%.15g", hi) + ") time=" + fmt("%.2f", dt) + "s (<=1e-12, (5.5, 1.45, 9.55), <5s)"};
}

Outcome nbest_oracle() {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0;
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (std::uint64_t inst = 0; inst < 1000; ++inst) {
    const auto lut = random_lut(2000, 12, 10000 + inst, inst % 4 == 0 ? 0.0625f : 0.0f);
    std::vector<float> obs(12);
    for (auto& v : obs) v = u(gen);
    if (inst % 7 == 0) std::copy_n(lut.bands(inst).begin(), 12, obs.begin());
    mismatches += n_best(obs, lut, 10, SearchKernel::optimized) != full_sort(obs, lut, 10);
  }
  const double dt = seconds_since(t0);
  return {mismatches == 0 && dt < 30.0,
          "mismatched_instances=" + std::to_string(mismatches) + "/1000 time=" + fmt("%.2f", dt) + "s (0, <30s)"};
}

Outcome noisy_round_trip() {
  const auto t0 = Clock::now();
  TempDir dir("accept_c08");
  auto cfg = base_config(20000, worker_count());
  SyntheticSceneSpec spec;
  spec.tiles = 4;
  spec.noise_sigma = 0.005;
  spec.seed = 88;
  const auto ids = cmd_synth_input(spec, cfg, dir.path());
  const auto lut = build_lut_for(cfg);
  std::vector<double> cab_true, cab_est, cw_true, cw_est;
  for (const auto& id : ids) {
    const auto sensor = read_raster(dir / id / kSensorStem);
    const auto truth = read_raster(dir / id / kTruthStem);
    const auto maps = invert_image(sensor, lut, cfg.inversion, cfg.workers);
    for (std::size_t p = 0; p < maps.pixels(); ++p) {
      if (!maps.valid(p)) continue;
      const std::size_t r = p / maps.cols, c = p % maps.cols;
      cab_true.push_back(truth.value(r, c, static_cast<std::size_t>(Trait::cab)));
      cab_est.push_back(maps.median[maps.index(static_cast<std::size_t>(Trait::cab), p)]);
      cw_true.push_back(truth.value(r, c, static_cast<std::size_t>(Trait::cw)));
      cw_est.push_back(maps.median[maps.index(static_cast<std::size_t>(Trait::cw), p)]);
    }
  }
  const double rho_cab = spearman(cab_true, cab_est), rho_cw = spearman(cw_true, cw_est);
  const double dt = seconds_since(t0);
  return {rho_cab >= 0.7 && rho_cw >= 0.5 && dt < 180.0,
          "spearman_cab=" + fmt("%.4f", rho_cab) + " spearman_cw=" + fmt("%.4f", rho_cw) +
              " valid_pixels=" + std::to_string(cab_true.size()) + " time=" + fmt("%.1f", dt) +
              "s (>=0.7, >=0.5, <180s)"};
}

Outcome scheduling_determinism() {
  const auto t0 = Clock::now();
  auto cfg = base_config(5000, 1);
  SyntheticSceneSpec spec;
  spec.tiles = 1;
  spec.noise_sigma = 0.005;
  const auto rtm = cfg.rtm_inputs();
  const auto tile = synthesize_tile(spec, cfg, rtm, cfg.bands(), 0);
  const auto lut = build_lut_for(cfg);
  const auto one = invert_image(tile.sensor, lut, cfg.inversion, 1);
  const bool two = invert_image(tile.sensor, lut, cfg.inversion, 2) == one;
  const bool eight = invert_image(tile.sensor, lut, cfg.inversion, 8) == one;
  const double dt = seconds_since(t0);
  return {two && eight && dt < 60.0, std::string("identical@2=") + (two ? "yes" : "no") +
                                         " identical@8=" + (eight ? "yes" : "no") + " time=" + fmt("%.2f", dt) +
                                         "s (yes, yes, <60s)"};
}

Outcome raster_round_trip() {
  const auto t0 = Clock::now();
  TempDir dir("accept_c10");
  std::mt19937_64 gen(10);
  RasterCube f(64, 64, 211, DataType::float32);
  for (auto& v : f.data<float>()) v = std::uniform_real_distribution<float>(0, 1)(gen);
  for (std::size_t i = 0; i < kGrid.count; ++i) f.wavelengths.push_back(kGrid.wavelength(i));
  RasterCube u8(64, 64, 1, DataType::uint8);
  for (auto& v : u8.data<std::uint8_t>()) v = static_cast<std::uint8_t>(gen() % 256);
  write_raster(f, dir / "f");
  write_raster(u8, dir / "u8");
  const auto fb = read_raster(dir / "f");
  const bool f_ok = fb == f && std::memcmp(fb.data<float>().data(), f.data<float>().data(), f.size() * 4) == 0;
  const bool u_ok = read_raster(dir / "u8") == u8;

  RasterCube patch(32, 32, 3, DataType::float32);
  for (auto& v : patch.data<float>()) v = std::uniform_real_distribution<float>(0, 1)(gen);
  const auto up = nn_upsample_2x(patch);
  std::size_t up_bad = 0;
  const auto src = patch.data<float>();
  const auto dst = up.data<float>();
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < 64; ++i) {
      for (std::size_t j = 0; j < 64; ++j) up_bad += dst[(b * 64 + i) * 64 + j] != src[(b * 32 + i / 2) * 32 + j / 2];
    }
  }
  const double dt = seconds_since(t0);
  return {f_ok && u_ok && up_bad == 0 && up.rows() == 64 && dt < 5.0,
          std::string("float32_bitexact=") + (f_ok ? "yes" : "no") + " uint8_exact=" + (u_ok ? "yes" : "no") +
              " upsample_mismatches=" + std::to_string(up_bad) + " time=" + fmt("%.2f", dt) + "s (yes, yes, 0, <5s)"};
}

Outcome bundle_layout() {
  const auto t0 = Clock::now();
  TempDir in("accept_c11_in"), out("accept_c11_out");
  auto cfg = base_config(5000, worker_count());
  SyntheticSceneSpec spec;
  spec.tiles = 4;
  spec.noise_sigma = 0.005;
  cmd_synth_input(spec, cfg, in.path());
  const auto lut = build_lut_for(cfg);
  const auto rows = cmd_make_dataset(in.path(), lut, out.path(), cfg);
  std::size_t layout_bad = 0, violations = 0, failed = 0;
  std::size_t tiles = 0;
  for (const auto& region_dir : fs::directory_iterator(out.path())) {
    if (!region_dir.is_directory()) continue;
    layout_bad += region_dir.path().filename() != cfg.region;
    for (const auto& tile : fs::directory_iterator(region_dir)) {
      ++tiles;
      std::set<std::string> files;
      for (const auto& f : fs::directory_iterator(tile)) files.insert(f.path().filename().string());
      std::set<std::string> expect;
      for (const char* stem : kBundleStems) {
        expect.insert(std::string(stem) + ".img");
        expect.insert(std::string(stem) + ".hdr");
      }
      layout_bad += files != expect;
      violations += validate_bundle(tile.path()).violations.size();
    }
  }
  for (const auto& r : rows) failed += r.status != "ok";
  const double dt = seconds_since(t0);
  return {tiles == 4 && rows.size() == 4 && layout_bad == 0 && violations == 0 && failed == 0 && dt < 120.0,
          "tiles=" + std::to_string(tiles) + " manifest_rows=" + std::to_string(rows.size()) +
              " layout_errors=" + std::to_string(layout_bad) + " violations=" + std::to_string(violations) +
              " failed_tiles=" + std::to_string(failed) + " time=" + fmt("%.1f", dt) + "s (4, 4, 0, 0, 0, <120s)"};
}

Outcome performance() {
  const int workers = 8;
  auto cfg = base_config(50000, workers);
  const auto lut = build_lut_for(cfg);
  const auto obs = benchmark_observations(lut, 4096, 12);
  const auto cube = cube_from_pixels(obs, 64, 64, lut);
  const InversionConfig inv;

  auto timed = [&](int w, SearchKernel k, TraitMaps& out) {
    const auto t0 = Clock::now();
    out = invert_image(cube, lut, inv, w, k);
    return seconds_since(t0);
  };
  TraitMaps reference, serial, parallel;
  timed(1, SearchKernel::naive, reference);
  const double t1 = timed(1, SearchKernel::optimized, serial);
  const double t8 = timed(workers, SearchKernel::optimized, parallel);
  const bool same = serial == reference && parallel == reference;
  const double speedup = t1 / t8;
  return {t8 <= 5.0 && speedup >= 3.0 && same,
          "time@8=" + fmt("%.3f", t8) + "s time@1=" + fmt("%.3f", t1) + "s speedup=" + fmt("%.2f", speedup) +
              "x naive_deviation=" + (same ? "none" : "yes") +
              " hardware_threads=" + std::to_string(std::thread::hardware_concurrency()) + " (<=5s, >=3x, none)"};
}

Outcome constraint_behavior() {
  const auto t0 = Clock::now();
  auto cfg = base_config(20000, worker_count());
  const auto lut = build_lut_for(cfg);
  std::size_t violations = 0;
  for (const auto& p : lut.params) {
    const double center = cfg.constraints.coupling_intercept + cfg.constraints.coupling_slope * p[Trait::lai];
    violations += std::abs(p[Trait::cab] - center) > cfg.constraints.coupling_halfwidth;
  }
  auto peak_at = [](double nm) {
    std::vector<double> v(kGrid.count);
    for (std::size_t i = 0; i < kGrid.count; ++i) v[i] = 0.1 - 1e-4 * std::abs(kGrid.wavelength(i) - nm);
    return Spectrum(kGrid, v);
  };
  const bool rej530 = !green_peak_accept(peak_at(530), cfg.constraints);
  const bool acc550 = green_peak_accept(peak_at(550), cfg.constraints);
  const double dt = seconds_since(t0);
  return {lut.size() == 20000 && violations == 0 && rej530 && acc550 && dt < 10.0,
          "entries=" + std::to_string(lut.size()) + " envelope_violations=" + std::to_string(violations) +
              " reject530=" + (rej530 ? "yes" : "no") + " accept550=" + (acc550 ? "yes" : "no") +
              " time=" + fmt("%.2f", dt) + "s (0, yes, yes, <10s)"};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria", "acceptance"};
  int only = 0;
  app.add_option("--only", only, "Run a single criterion (1-13)")->check(CLI::Range(1, 13));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"grid constant", grid_constant},
      {"LHS stratification", lhs_stratification},
      {"leaf energy conservation", leaf_energy},
      {"zero-canopy identity", zero_canopy},
      {"self-inversion identity", self_inversion},
      {"percentile oracle", percentile_oracle},
      {"n-best oracle", nbest_oracle},
      {"noisy round trip", noisy_round_trip},
      {"scheduling determinism", scheduling_determinism},
      {"raster round trip", raster_round_trip},
      {"bundle layout", bundle_layout},
      {"performance", performance},
      {"constraint behavior", constraint_behavior},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " c" << (i < 9 ? "0" : "") << i + 1 << ' ' << criteria[i].name << ": "
              << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
