#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace hsforge {

class RasterFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Header `data type` codes.
enum class DataType : int { uint8 = 1, float32 = 4, uint16 = 12 };

std::size_t bytes_per_sample(DataType t);

// Band-sequential raster: index = (band * rows + row) * cols + col.
class RasterCube {
 public:
  RasterCube() = default;
  RasterCube(std::size_t rows, std::size_t cols, std::size_t bands, DataType dtype);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t bands() const { return bands_; }
  std::size_t pixels() const { return rows_ * cols_; }
  std::size_t size() const { return rows_ * cols_ * bands_; }
  DataType dtype() const;

  std::size_t index(std::size_t row, std::size_t col, std::size_t band) const {
    return (band * rows_ + row) * cols_ + col;
  }

  // Typed payload; throws RasterFormatError on dtype mismatch.
  template <typename T>
  std::span<T> data();
  template <typename T>
  std::span<const T> data() const;

  template <typename T>
  T at(std::size_t row, std::size_t col, std::size_t band) const {
    return data<T>()[index(row, col, band)];
  }
  // Any dtype widened to double.
  double value(std::size_t row, std::size_t col, std::size_t band) const;

  std::vector<std::string> band_names;
  std::vector<double> wavelengths;

  friend bool operator==(const RasterCube&, const RasterCube&) = default;

 private:
  std::size_t rows_ = 0, cols_ = 0, bands_ = 0;
  std::variant<std::vector<float>, std::vector<std::uint8_t>, std::vector<std::uint16_t>> data_;
};

// Writes `<stem>.img` and `<stem>.hdr`.
void write_raster(const RasterCube& cube, const std::filesystem::path& stem);
RasterCube read_raster(const std::filesystem::path& stem);

struct RasterHeader {
  std::size_t samples = 0;  // cols
  std::size_t lines = 0;    // rows
  std::size_t bands = 0;
  DataType dtype = DataType::float32;
  std::vector<std::string> band_names;
  std::vector<double> wavelengths;
};

RasterHeader read_header(const std::filesystem::path& hdr_path);

std::vector<RasterCube> crop_patches(const RasterCube& raster, std::size_t patch_rows, std::size_t patch_cols);
RasterCube nn_upsample_2x(const RasterCube& patch);

// ---------------------------------------------------------------------------
// Tile bundles

inline constexpr std::size_t kTileSize = 64;
inline constexpr std::size_t kBundleSpectralBands = 211;
inline constexpr std::size_t kBundleTraitBands = 16;
// Trait value written for pixels that could not be inverted.
inline constexpr float kInvalidTraitValue = -9999.0f;

struct TileBundle {
  std::string region;
  std::string tile_id;
  RasterCube surf_refl;    // 64 x 64 x 211 float32
  RasterCube traits;       // 64 x 64 x 16 float32
  RasterCube p5;           // 64 x 64 x 16 float32
  RasterCube p95;          // 64 x 64 x 16 float32
  RasterCube scene_class;  // 64 x 64 x 1 uint8
};

inline constexpr const char* kBundleStems[] = {"surf_refl", "traits", "p5", "p95", "quality_scene_classification"};

// Throws ShapeError when a raster violates the bundle shapes.
void check_bundle_shapes(const TileBundle& bundle);

std::vector<std::filesystem::path> write_tile_bundle(const TileBundle& bundle, const std::filesystem::path& dataset_root,
                                                     bool overwrite = false);

struct ValidationReport {
  std::filesystem::path tile_dir;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_bundle(const std::filesystem::path& tile_dir);

}  // namespace hsforge
