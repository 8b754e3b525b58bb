#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsforge/spectral.hpp"

namespace hsforge {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Reflectance left [0, 1] beyond round-off; indicates a model bug.
class RtmConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SoilLookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Specific absorption spectra of the leaf constituents plus the plate
// interface reflectance. Pigments in cm2/ug, water and dry matter in cm2/g.
struct CoefficientTable {
  SpectralGrid grid;
  std::vector<double> k_ab, k_ar, k_ant, k_brown, k_w, k_m, r_if;

  // Throws GridError on length mismatch or invalid values.
  void validate() const;
};

CoefficientTable generate_reference_coefficients(const SpectralGrid& grid);

// CSV: wavelength_nm,k_ab,k_ar,k_ant,k_brown,k_w,k_m,r_if
void save_coefficients(const CoefficientTable& table, const std::filesystem::path& path);
CoefficientTable load_coefficients(const std::filesystem::path& path, const SpectralGrid& grid);

struct LeafOptics {
  Spectrum rho_leaf;
  Spectrum tau_leaf;
};

struct SoilLibrary {
  std::vector<std::string> names;
  std::vector<Spectrum> spectra;

  std::size_t size() const { return names.size(); }
  const Spectrum& at(std::size_t index) const;
  // Index of the soil with this name; throws SoilLookupError.
  std::size_t index_of(const std::string& name) const;
};

SoilLibrary generate_reference_soils(const SpectralGrid& grid, const std::vector<std::string>& region_names);

// CSV: wavelength_nm,<name1>,<name2>,...
void save_soils(const SoilLibrary& soils, const std::filesystem::path& path);
SoilLibrary load_soils(const std::filesystem::path& path, const SpectralGrid& grid);

struct RtmConfig {
  double k_d = 1.0;             // diffuse extinction per unit LAI
  double max_zenith_deg = 85.0;  // zenith clamp

  void validate() const;
};

// Layer-adding of two plates (reflectance, transmittance).
struct Plate {
  double rho = 0.0;
  double tau = 0.0;
};

Plate add_layers(Plate a, Plate b);
// Single plate with per-layer absorption `k` and interface reflectance `r`.
Plate single_plate(double k, double r);
// Plate stack for a real-valued layer count n >= 1.
Plate plate_stack(double k_total, double r, double n);

LeafOptics leaf_optics(const ParameterVector& params, const CoefficientTable& coeffs);

// Mean projection of a leaf at fixed inclination onto a direction at `zenith_deg`.
double g_function(double zenith_deg, double leaf_angle_deg);

// Two-stream slab response of a homogeneous canopy layer.
struct SlabResponse {
  double reflectance = 0.0;
  double transmittance = 0.0;
};

SlabResponse two_stream_slab(double rho_leaf, double tau_leaf, double lai, double k_d);

// Sun/view directional terms shared by every wavelength of one simulation.
struct CanopyGeometry {
  double k_sun = 0.0;
  double k_view = 0.0;
  double phase_angle = 0.0;  // radians
  double gap_so = 1.0;       // bidirectional gap probability
};

CanopyGeometry canopy_geometry(const ParameterVector& params, const RtmConfig& cfg);

Spectrum canopy_reflectance(const LeafOptics& leaf, const Spectrum& soil, const ParameterVector& params,
                            const RtmConfig& cfg);

// Everything the forward model needs besides the parameter vector.
struct RtmInputs {
  CoefficientTable coeffs;
  SoilLibrary soils;
  RtmConfig config;
};

Spectrum forward(const ParameterVector& params, const CoefficientTable& coeffs, const SoilLibrary& soils,
                 const RtmConfig& cfg);

inline Spectrum forward(const ParameterVector& params, const RtmInputs& rtm) {
  return forward(params, rtm.coeffs, rtm.soils, rtm.config);
}

}  // namespace hsforge
