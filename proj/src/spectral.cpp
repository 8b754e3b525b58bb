#include "hsforge/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hsforge {

namespace {

// Grid membership tolerance in nm.
constexpr double kNmTol = 1e-9;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

SpectralGrid make_grid(double start_nm, double end_nm, double step_nm) {
  if (!(step_nm > 0.0)) throw GridError("grid step must be positive");
  if (!(end_nm >= start_nm)) throw GridError("grid end must not precede start");
  const double span = (end_nm - start_nm) / step_nm;
  const double steps = std::round(span);
  if (std::abs(span - steps) > 1e-9) {
    std::ostringstream msg;
    msg << "grid range [" << start_nm << ", " << end_nm << "] is not a multiple of step " << step_nm;
    throw GridError(msg.str());
  }
  return SpectralGrid{start_nm, step_nm, static_cast<std::size_t>(steps) + 1};
}

Spectrum::Spectrum(SpectralGrid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.count) {
    throw GridError("spectrum length " + std::to_string(values_.size()) +
                    " does not match grid count " + std::to_string(grid_.count));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw GridError("non-finite spectrum value at " + std::to_string(grid_.wavelength(i)) + " nm");
    }
  }
}

BandSet::BandSet(std::vector<SensorBand> bands) : bands_(std::move(bands)) {
  std::set<std::string> seen;
  for (const auto& b : bands_) {
    if (!seen.insert(b.name).second) throw std::invalid_argument("duplicate band name " + b.name);
    if (!(b.width_nm >= 0.0)) throw std::invalid_argument("negative width for band " + b.name);
  }
}

std::size_t BandSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    if (bands_[i].name == name) return i;
  }
  throw std::out_of_range("no band named " + std::string(name));
}

std::vector<std::string> BandSet::names() const {
  std::vector<std::string> out;
  out.reserve(bands_.size());
  for (const auto& b : bands_) out.push_back(b.name);
  return out;
}

BandSet default_sensor_bands() {
  return BandSet({
      {"B1", 443, 21},
      {"B2", 490, 66},
      {"B3", 560, 36},
      {"B4", 665, 31},
      {"B5", 705, 15},
      {"B6", 740, 15},
      {"B7", 783, 20},
      {"B8", 842, 115},
      {"B8A", 865, 21},
      {"B9", 945, 20},
      {"B11", 1610, 90},
      {"B12", 2190, 180},
  });
}

BandSet load_band_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open band file " + path.string());
  std::vector<SensorBand> bands;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string name, center, width;
    if (!std::getline(fields, name, ',') || !std::getline(fields, center, ',') ||
        !std::getline(fields, width)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected name,center_nm,width_nm");
    }
    try {
      bands.push_back({trim(name), std::stod(center), std::stod(width)});
    } catch (const std::logic_error&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
  }
  if (bands.empty()) throw std::runtime_error("band file " + path.string() + " defines no bands");
  return BandSet(std::move(bands));
}

namespace {

std::pair<std::size_t, std::size_t> band_index_range(const SpectralGrid& grid, const SensorBand& band) {
  const double lo = band.lower_nm();
  const double hi = band.upper_nm();
  std::size_t first = grid.count, last = 0;
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double w = grid.wavelength(i);
    if (w >= lo - kNmTol && w <= hi + kNmTol) {
      first = std::min(first, i);
      last = i + 1;
    }
  }
  if (first >= last) {
    throw BandCoverageError("band " + band.name + " covers no sample of the spectral grid");
  }
  return {first, last};
}

}  // namespace

double band_average(const Spectrum& spectrum, const SensorBand& band) {
  const auto [first, last] = band_index_range(spectrum.grid(), band);
  double sum = 0.0;
  for (std::size_t i = first; i < last; ++i) sum += spectrum[i];
  return sum / static_cast<double>(last - first);
}

BandResampler::BandResampler(const SpectralGrid& grid, const BandSet& bands) : grid_(grid) {
  ranges_.reserve(bands.size());
  for (const auto& b : bands) ranges_.push_back(band_index_range(grid, b));
}

void BandResampler::apply(std::span<const double> values, std::span<float> out) const {
  if (values.size() != grid_.count || out.size() != ranges_.size()) {
    throw GridError("band resampler size mismatch");
  }
  for (std::size_t b = 0; b < ranges_.size(); ++b) {
    const auto [first, last] = ranges_[b];
    double sum = 0.0;
    for (std::size_t i = first; i < last; ++i) sum += values[i];
    out[b] = static_cast<float>(sum / static_cast<double>(last - first));
  }
}

std::vector<double> BandResampler::apply(const Spectrum& spectrum) const {
  if (!(spectrum.grid() == grid_)) throw GridError("spectrum grid differs from resampler grid");
  std::vector<double> out(ranges_.size());
  for (std::size_t b = 0; b < ranges_.size(); ++b) {
    const auto [first, last] = ranges_[b];
    double sum = 0.0;
    for (std::size_t i = first; i < last; ++i) sum += spectrum[i];
    out[b] = sum / static_cast<double>(last - first);
  }
  return out;
}

// ---------------------------------------------------------------------------

const std::array<std::string, kTraitCount>& trait_names() {
  static const std::array<std::string, kTraitCount> names = {
      "N",     "Cab",      "Car",  "Cant",       "Cbrown",  "Cw",      "Cm",     "LAI",
      "LIDFa", "LIDFb",    "TypeLIDF", "hspot",  "soil_index", "theta_s", "theta_v", "phi_rel",
  };
  return names;
}

std::string_view trait_name(std::size_t index) {
  if (index >= kTraitCount) throw std::out_of_range("trait index out of range");
  return trait_names()[index];
}

std::string_view trait_name(Trait t) { return trait_name(static_cast<std::size_t>(t)); }

ParameterVector ParameterVector::from_span(std::span<const double> values) {
  if (values.size() != kTraitCount) {
    throw ParameterError("parameter vector needs " + std::to_string(kTraitCount) + " values, got " +
                         std::to_string(values.size()));
  }
  ParameterVector p;
  std::copy(values.begin(), values.end(), p.values.begin());
  return p;
}

ParameterRanges ParameterRanges::defaults(std::size_t soil_index) {
  ParameterRanges r;
  const double soil = static_cast<double>(soil_index);
  r[Trait::n_struct] = {1.0, 2.5};
  r[Trait::cab] = {0.0, 160.0};
  r[Trait::car] = {0.0, 60.0};
  r[Trait::cant] = {0.0, 5.0};
  r[Trait::cbrown] = {0.0, 1.0};
  r[Trait::cw] = {0.0, 0.07};
  r[Trait::cm] = {0.0, 0.1};
  r[Trait::lai] = {0.0, 10.0};
  r[Trait::lidfa] = {30.0, 70.0};
  r[Trait::lidfb] = {0.0, 0.0};
  r[Trait::type_lidf] = {1.0, 1.0};
  r[Trait::hspot] = {0.01, 0.5};
  r[Trait::soil_index] = {soil, soil};
  r[Trait::theta_s] = {15.0, 80.0};
  r[Trait::theta_v] = {0.0, 35.0};
  r[Trait::phi_rel] = {100.0, 150.0};
  return r;
}

void ParameterRanges::validate() const {
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    const auto& iv = intervals_[i];
    if (!std::isfinite(iv.min) || !std::isfinite(iv.max) || iv.min > iv.max) {
      throw ParameterError("invalid range for " + std::string(trait_name(i)));
    }
  }
  const auto& soil = (*this)[Trait::soil_index];
  if (!soil.degenerate() || soil.min < 0.0 || soil.min != std::floor(soil.min)) {
    throw ParameterError("soil_index range must be a single non-negative integer");
  }
}

std::size_t ParameterRanges::first_violation(const ParameterVector& p, double tol) const {
  for (std::size_t i = 0; i < kTraitCount; ++i) {
    if (!std::isfinite(p[i]) || !intervals_[i].contains(p[i], tol)) return i;
  }
  return kTraitCount;
}

}  // namespace hsforge
