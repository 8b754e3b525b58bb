#include "hsforge/rtm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "text_util.hpp"

namespace hsforge {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kReflectanceTol = 1e-9;

double gauss(double x, double mu, double sigma, double amplitude) {
  const double d = x - mu;
  return amplitude * std::exp(-d * d / (2.0 * sigma * sigma));
}

void check_grid_column(const std::vector<std::string>& row, const SpectralGrid& grid, std::size_t i,
                       const std::filesystem::path& path) {
  const double w = detail::parse_number<double>(row.at(0));
  if (std::abs(w - grid.wavelength(i)) > 1e-6) {
    throw GridError(path.string() + ": row " + std::to_string(i + 1) + " has wavelength " +
                    detail::format_number(w) + ", expected " + detail::format_number(grid.wavelength(i)));
  }
}

// Reads a CSV whose first column is the wavelength axis of `grid`.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_grid_csv(
    const std::filesystem::path& path, const SpectralGrid& grid) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  auto header = detail::split(line, ',');
  if (header.size() < 2 || header[0] != "wavelength_nm") {
    throw std::runtime_error(path.string() + ": header must start with wavelength_nm");
  }
  std::vector<std::vector<double>> columns(header.size() - 1);
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const auto row = detail::split(line, ',');
    if (row.size() != header.size()) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(row_index + 1) + " has " +
                               std::to_string(row.size()) + " fields, expected " + std::to_string(header.size()));
    }
    if (row_index >= grid.count) throw GridError(path.string() + ": more rows than grid samples");
    check_grid_column(row, grid, row_index, path);
    for (std::size_t c = 1; c < row.size(); ++c) columns[c - 1].push_back(detail::parse_number<double>(row[c]));
    ++row_index;
  }
  if (row_index != grid.count) {
    throw GridError(path.string() + ": " + std::to_string(row_index) + " rows, grid has " +
                    std::to_string(grid.count));
  }
  header.erase(header.begin());
  return {std::move(header), std::move(columns)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Coefficients

void CoefficientTable::validate() const {
  const std::vector<double>* cols[] = {&k_ab, &k_ar, &k_ant, &k_brown, &k_w, &k_m, &r_if};
  for (const auto* col : cols) {
    if (col->size() != grid.count) throw GridError("coefficient column length differs from grid count");
    for (double v : *col) {
      if (!std::isfinite(v) || v < 0.0) throw GridError("coefficients must be finite and non-negative");
    }
  }
  for (double r : r_if) {
    if (r >= 0.5) throw GridError("interface reflectance must be below 0.5");
  }
}

CoefficientTable generate_reference_coefficients(const SpectralGrid& grid) {
  if (grid.start_nm > 400.0 || grid.end_nm() < 2500.0) {
    throw GridError("reference coefficients need a grid covering 400-2500 nm");
  }
  CoefficientTable t;
  t.grid = grid;
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double l = grid.wavelength(i);
    t.k_ab.push_back(gauss(l, 430, 30, 0.06) + gauss(l, 662, 25, 0.08));
    t.k_ar.push_back(gauss(l, 470, 30, 0.08));
    t.k_ant.push_back(gauss(l, 550, 25, 0.05));
    t.k_brown.push_back(0.8 * std::exp(-(l - 400.0) / 250.0));
    t.k_w.push_back(gauss(l, 1200, 50, 10) + gauss(l, 1450, 60, 20) + gauss(l, 1940, 70, 35));
    t.k_m.push_back(1.5 * std::max(0.0, (l - 800.0) / 1700.0) + gauss(l, 2100, 300, 6));
    t.r_if.push_back(0.04);
  }
  return t;
}

void save_coefficients(const CoefficientTable& table, const std::filesystem::path& path) {
  table.validate();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "wavelength_nm,k_ab,k_ar,k_ant,k_brown,k_w,k_m,r_if\n";
  for (std::size_t i = 0; i < table.grid.count; ++i) {
    out << detail::format_number(table.grid.wavelength(i));
    for (const auto* col : {&table.k_ab, &table.k_ar, &table.k_ant, &table.k_brown, &table.k_w, &table.k_m,
                            &table.r_if}) {
      out << ',' << detail::format_number((*col)[i]);
    }
    out << '\n';
  }
}

CoefficientTable load_coefficients(const std::filesystem::path& path, const SpectralGrid& grid) {
  auto [names, columns] = read_grid_csv(path, grid);
  const std::vector<std::string> expected = {"k_ab", "k_ar", "k_ant", "k_brown", "k_w", "k_m", "r_if"};
  if (names != expected) {
    throw std::runtime_error(path.string() + ": header must be wavelength_nm,k_ab,k_ar,k_ant,k_brown,k_w,k_m,r_if");
  }
  CoefficientTable t{grid,
                     std::move(columns[0]),
                     std::move(columns[1]),
                     std::move(columns[2]),
                     std::move(columns[3]),
                     std::move(columns[4]),
                     std::move(columns[5]),
                     std::move(columns[6])};
  t.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Soils

const Spectrum& SoilLibrary::at(std::size_t index) const {
  if (index >= spectra.size()) {
    throw SoilLookupError("soil index " + std::to_string(index) + " outside library of " +
                          std::to_string(spectra.size()));
  }
  return spectra[index];
}

std::size_t SoilLibrary::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw SoilLookupError("no soil named " + name);
  return static_cast<std::size_t>(it - names.begin());
}

SoilLibrary generate_reference_soils(const SpectralGrid& grid, const std::vector<std::string>& region_names) {
  if (region_names.empty()) throw std::invalid_argument("at least one region name is required");
  SoilLibrary lib;
  for (const auto& region : region_names) {
    double c0 = 0.0, c1 = 0.0;
    if (region == "africa") {
      c0 = 0.10, c1 = 0.35;
    } else if (region == "france") {
      c0 = 0.06, c1 = 0.22;
    } else if (region == "spain") {
      c0 = 0.12, c1 = 0.40;
    } else if (region == "india") {
      c0 = 0.08, c1 = 0.30;
    } else {
      // Unknown regions get coefficients from an FNV-1a seeded generator.
      std::uint64_t h = 1469598103934665603ull;
      for (unsigned char ch : region) h = (h ^ ch) * 1099511628211ull;
      std::mt19937_64 rng(h);
      constexpr double kScale = 1.0 / 18446744073709551616.0;
      c0 = 0.05 + 0.10 * (static_cast<double>(rng()) * kScale);
      c1 = 0.20 + 0.20 * (static_cast<double>(rng()) * kScale);
    }
    std::vector<double> values(grid.count);
    for (std::size_t i = 0; i < grid.count; ++i) {
      values[i] = std::clamp(c0 + c1 * (grid.wavelength(i) - 400.0) / 2100.0, 0.02, 0.6);
    }
    lib.names.push_back(region);
    lib.spectra.emplace_back(grid, std::move(values));
  }
  return lib;
}

void save_soils(const SoilLibrary& soils, const std::filesystem::path& path) {
  if (soils.spectra.empty()) throw std::invalid_argument("empty soil library");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& grid = soils.spectra.front().grid();
  out << "wavelength_nm";
  for (const auto& n : soils.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < grid.count; ++i) {
    out << detail::format_number(grid.wavelength(i));
    for (const auto& s : soils.spectra) out << ',' << detail::format_number(s[i]);
    out << '\n';
  }
}

SoilLibrary load_soils(const std::filesystem::path& path, const SpectralGrid& grid) {
  auto [names, columns] = read_grid_csv(path, grid);
  SoilLibrary lib;
  for (std::size_t c = 0; c < names.size(); ++c) {
    for (double v : columns[c]) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::runtime_error(path.string() + ": soil " + names[c] + " outside [0, 1]");
    }
    lib.names.push_back(names[c]);
    lib.spectra.emplace_back(grid, std::move(columns[c]));
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Leaf

void RtmConfig::validate() const {
  if (!(k_d > 0.0)) throw std::invalid_argument("k_d must be positive");
  if (!(max_zenith_deg < 90.0 && max_zenith_deg > 0.0)) {
    throw std::invalid_argument("max_zenith_deg must lie in (0, 90)");
  }
}

Plate add_layers(Plate a, Plate b) {
  const double denom = 1.0 - a.rho * b.rho;
  return {a.rho + a.tau * a.tau * b.rho / denom, a.tau * b.tau / denom};
}

Plate single_plate(double k, double r) {
  const double t = std::exp(-k);
  const double denom = 1.0 - r * r * t * t;
  const double one_minus_r_sq = (1.0 - r) * (1.0 - r);
  return {r + one_minus_r_sq * r * t * t / denom, one_minus_r_sq * t / denom};
}

namespace {

Plate stack_of(Plate plate, int layers) {
  Plate acc = plate;
  for (int i = 1; i < layers; ++i) acc = add_layers(acc, plate);
  return acc;
}

}  // namespace

Plate plate_stack(double k_total, double r, double n) {
  if (!(n >= 1.0)) throw ParameterError("leaf structure parameter must be >= 1");
  const Plate plate = single_plate(k_total / n, r);
  const double lower = std::floor(n);
  const double frac = n - lower;
  const Plate lo = stack_of(plate, static_cast<int>(lower));
  if (frac == 0.0) return lo;
  const Plate hi = add_layers(lo, plate);
  return {lo.rho + frac * (hi.rho - lo.rho), lo.tau + frac * (hi.tau - lo.tau)};
}

LeafOptics leaf_optics(const ParameterVector& p, const CoefficientTable& c) {
  const double n = p[Trait::n_struct];
  if (!(n >= 1.0)) throw ParameterError("leaf structure parameter N must be >= 1");
  const std::size_t count = c.grid.count;
  std::vector<double> rho(count), tau(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double k = p[Trait::cab] * c.k_ab[i] + p[Trait::car] * c.k_ar[i] + p[Trait::cant] * c.k_ant[i] +
                     p[Trait::cbrown] * c.k_brown[i] + p[Trait::cw] * c.k_w[i] + p[Trait::cm] * c.k_m[i];
    const Plate leaf = plate_stack(k, c.r_if[i], n);
    rho[i] = leaf.rho;
    tau[i] = leaf.tau;
  }
  return {Spectrum(c.grid, std::move(rho)), Spectrum(c.grid, std::move(tau))};
}

// ---------------------------------------------------------------------------
// Canopy

double g_function(double zenith_deg, double leaf_angle_deg) {
  if (!(zenith_deg >= 0.0 && zenith_deg < 90.0)) {
    throw GeometryError("zenith angle " + detail::format_number(zenith_deg) + " outside [0, 90)");
  }
  if (!(leaf_angle_deg >= 0.0 && leaf_angle_deg < 90.0)) {
    throw GeometryError("leaf angle " + detail::format_number(leaf_angle_deg) + " outside [0, 90)");
  }
  const double th = zenith_deg * kDeg;
  const double tl = leaf_angle_deg * kDeg;
  const double cc = std::cos(th) * std::cos(tl);
  const double ss = std::sin(th) * std::sin(tl);
  // |cot th * cot tl| >= 1  <=>  |cos th cos tl| >= |sin th sin tl|
  if (zenith_deg == 0.0 || std::abs(cc) >= std::abs(ss)) return cc;
  const double psi = std::acos(cc / ss);
  return cc * (1.0 + (2.0 / std::numbers::pi) * (std::tan(psi) - psi));
}

SlabResponse two_stream_slab(double rho_leaf, double tau_leaf, double lai, double k_d) {
  const double omega = rho_leaf + tau_leaf;
  const double beta = omega > 0.0 ? 0.5 + 0.5 * (rho_leaf - tau_leaf) / omega : 0.5;
  const double a = k_d * (1.0 - omega * (1.0 - beta));
  const double b = k_d * omega * beta;
  const double gamma = std::sqrt(std::max(0.0, a * a - b * b));
  if (gamma < 1e-9) {
    const double bl = b * lai;
    return {bl / (1.0 + bl), 1.0 / (1.0 + bl)};
  }
  const double r_inf = b / (a + gamma);
  const double e = std::exp(-gamma * lai);
  const double d = 1.0 - r_inf * r_inf * e * e;
  return {r_inf * (1.0 - e * e) / d, (1.0 - r_inf * r_inf) * e / d};
}

CanopyGeometry canopy_geometry(const ParameterVector& p, const RtmConfig& cfg) {
  const double ts = std::min(p[Trait::theta_s], cfg.max_zenith_deg);
  const double tv = std::min(p[Trait::theta_v], cfg.max_zenith_deg);
  const double lidfa = p[Trait::lidfa];
  CanopyGeometry g;
  g.k_sun = g_function(ts, lidfa) / std::cos(ts * kDeg);
  g.k_view = g_function(tv, lidfa) / std::cos(tv * kDeg);
  // Angle between the unit sun and view directions; atan2 of |cross| and
  // dot stays exact at zero where acos of the dot product would not.
  const double phi = p[Trait::phi_rel] * kDeg;
  const double sx = std::sin(ts * kDeg), sz = std::cos(ts * kDeg);
  const double vx = std::sin(tv * kDeg) * std::cos(phi), vy = std::sin(tv * kDeg) * std::sin(phi);
  const double vz = std::cos(tv * kDeg);
  const double cx = -sz * vy, cy = sz * vx - sx * vz, cz = sx * vy;
  g.phase_angle = std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), sx * vx + sz * vz);
  const double hotspot = std::exp(-g.phase_angle / p[Trait::hspot]);
  g.gap_so = std::exp(-(g.k_sun + g.k_view - std::sqrt(g.k_sun * g.k_view) * hotspot) * p[Trait::lai]);
  return g;
}

Spectrum canopy_reflectance(const LeafOptics& leaf, const Spectrum& soil, const ParameterVector& p,
                            const RtmConfig& cfg) {
  const SpectralGrid& grid = leaf.rho_leaf.grid();
  if (!(soil.grid() == grid) || !(leaf.tau_leaf.grid() == grid)) {
    throw GridError("leaf and soil spectra are on different grids");
  }
  if (!(p[Trait::hspot] > 0.0)) throw ParameterError("hotspot parameter must be positive");
  if (!(p[Trait::lai] >= 0.0)) throw ParameterError("LAI must be non-negative");
  const CanopyGeometry g = canopy_geometry(p, cfg);
  const double lai = p[Trait::lai];
  std::vector<double> out(grid.count);
  for (std::size_t i = 0; i < grid.count; ++i) {
    const SlabResponse slab = two_stream_slab(leaf.rho_leaf[i], leaf.tau_leaf[i], lai, cfg.k_d);
    const double rs = soil[i];
    const double r_veg = slab.reflectance + slab.transmittance * slab.transmittance * rs / (1.0 - slab.reflectance * rs);
    const double rho = g.gap_so * rs + (1.0 - g.gap_so) * r_veg;
    if (!(rho >= -kReflectanceTol && rho <= 1.0 + kReflectanceTol)) {
      throw RtmConsistencyError("canopy reflectance " + detail::format_number(rho) + " at " +
                                detail::format_number(grid.wavelength(i)) + " nm outside [0, 1]");
    }
    out[i] = rho;
  }
  return Spectrum(grid, std::move(out));
}

Spectrum forward(const ParameterVector& params, const CoefficientTable& coeffs, const SoilLibrary& soils,
                 const RtmConfig& cfg) {
  const double s = params[Trait::soil_index];
  if (!(s >= 0.0) || s != std::floor(s)) {
    throw SoilLookupError("soil index " + detail::format_number(s) + " is not a non-negative integer");
  }
  const Spectrum& soil = soils.at(static_cast<std::size_t>(s));
  return canopy_reflectance(leaf_optics(params, coeffs), soil, params, cfg);
}

}  // namespace hsforge
