#include "hsforge/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "text_util.hpp"

namespace hsforge {

static_assert(std::endian::native == std::endian::little, "raster payloads are written little-endian");

namespace fs = std::filesystem;

std::size_t bytes_per_sample(DataType t) {
  switch (t) {
    case DataType::uint8:
      return 1;
    case DataType::uint16:
      return 2;
    case DataType::float32:
      return 4;
  }
  throw RasterFormatError("unknown data type");
}

RasterCube::RasterCube(std::size_t rows, std::size_t cols, std::size_t bands, DataType dtype)
    : rows_(rows), cols_(cols), bands_(bands) {
  if (rows == 0 || cols == 0 || bands == 0) throw ShapeError("raster dimensions must be positive");
  const std::size_t n = rows * cols * bands;
  switch (dtype) {
    case DataType::float32:
      data_ = std::vector<float>(n, 0.0f);
      break;
    case DataType::uint8:
      data_ = std::vector<std::uint8_t>(n, 0);
      break;
    case DataType::uint16:
      data_ = std::vector<std::uint16_t>(n, 0);
      break;
  }
}

DataType RasterCube::dtype() const {
  switch (data_.index()) {
    case 0:
      return DataType::float32;
    case 1:
      return DataType::uint8;
    default:
      return DataType::uint16;
  }
}

template <typename T>
std::span<T> RasterCube::data() {
  auto* v = std::get_if<std::vector<T>>(&data_);
  if (v == nullptr) throw RasterFormatError("raster data type mismatch");
  return *v;
}

template <typename T>
std::span<const T> RasterCube::data() const {
  const auto* v = std::get_if<std::vector<T>>(&data_);
  if (v == nullptr) throw RasterFormatError("raster data type mismatch");
  return *v;
}

template std::span<float> RasterCube::data<float>();
template std::span<std::uint8_t> RasterCube::data<std::uint8_t>();
template std::span<std::uint16_t> RasterCube::data<std::uint16_t>();
template std::span<const float> RasterCube::data<float>() const;
template std::span<const std::uint8_t> RasterCube::data<std::uint8_t>() const;
template std::span<const std::uint16_t> RasterCube::data<std::uint16_t>() const;

double RasterCube::value(std::size_t row, std::size_t col, std::size_t band) const {
  const std::size_t i = index(row, col, band);
  return std::visit([i](const auto& v) { return static_cast<double>(v[i]); }, data_);
}

// ---------------------------------------------------------------------------
// Header + payload

namespace {

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

void check_list_item(const std::string& item) {
  if (item.find_first_of(",{}\n") != std::string::npos) {
    throw RasterFormatError("band name '" + item + "' contains a reserved character");
  }
}

std::vector<std::string> parse_list(const std::string& value) {
  std::string v = detail::trim(value);
  if (v.size() < 2 || v.front() != '{' || v.back() != '}') throw RasterFormatError("malformed list value: " + v);
  v = v.substr(1, v.size() - 2);
  if (detail::trim(v).empty()) return {};
  return detail::split(v, ',');
}

std::size_t parse_count(const std::map<std::string, std::string>& kv, const std::string& key,
                        const fs::path& path) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw RasterFormatError(path.string() + ": missing header key '" + key + "'");
  try {
    const long long v = detail::parse_number<long long>(it->second);
    if (v <= 0) throw std::invalid_argument("non-positive");
    return static_cast<std::size_t>(v);
  } catch (const std::invalid_argument&) {
    throw RasterFormatError(path.string() + ": bad value for '" + key + "': " + it->second);
  }
}

}  // namespace

RasterHeader read_header(const fs::path& hdr_path) {
  std::ifstream in(hdr_path);
  if (!in) throw RasterFormatError("missing header file " + hdr_path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;  // "ENVI" signature and blank lines
    const std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    // Brace lists may continue over several lines.
    if (!value.empty() && value.front() == '{') {
      while (value.find('}') == std::string::npos) {
        std::string more;
        if (!std::getline(in, more)) throw RasterFormatError(hdr_path.string() + ": unterminated list for " + key);
        value += more;
      }
    }
    kv[key] = value;
  }

  RasterHeader h;
  h.samples = parse_count(kv, "samples", hdr_path);
  h.lines = parse_count(kv, "lines", hdr_path);
  h.bands = parse_count(kv, "bands", hdr_path);
  const auto dt = kv.find("data type");
  if (dt == kv.end()) throw RasterFormatError(hdr_path.string() + ": missing header key 'data type'");
  if (dt->second == "4") {
    h.dtype = DataType::float32;
  } else if (dt->second == "1") {
    h.dtype = DataType::uint8;
  } else if (dt->second == "12") {
    h.dtype = DataType::uint16;
  } else {
    throw RasterFormatError(hdr_path.string() + ": unsupported data type code " + dt->second);
  }
  const auto il = kv.find("interleave");
  if (il == kv.end() || il->second != "bsq") throw RasterFormatError(hdr_path.string() + ": interleave must be bsq");
  const auto bo = kv.find("byte order");
  if (bo == kv.end() || bo->second != "0") throw RasterFormatError(hdr_path.string() + ": byte order must be 0");
  if (const auto hoff = kv.find("header offset"); hoff != kv.end() && detail::trim(hoff->second) != "0") {
    throw RasterFormatError(hdr_path.string() + ": non-zero header offset is not supported");
  }
  if (const auto bn = kv.find("band names"); bn != kv.end()) {
    h.band_names = parse_list(bn->second);
    if (h.band_names.size() != h.bands) throw RasterFormatError(hdr_path.string() + ": band names count differs from bands");
  }
  if (const auto wl = kv.find("wavelength"); wl != kv.end()) {
    for (const auto& item : parse_list(wl->second)) {
      try {
        h.wavelengths.push_back(detail::parse_number<double>(item));
      } catch (const std::invalid_argument&) {
        throw RasterFormatError(hdr_path.string() + ": bad wavelength '" + item + "'");
      }
    }
    if (h.wavelengths.size() != h.bands) throw RasterFormatError(hdr_path.string() + ": wavelength count differs from bands");
  }
  return h;
}

void write_raster(const RasterCube& cube, const fs::path& stem) {
  if (cube.size() == 0) throw ShapeError("cannot write an empty raster");
  if (!cube.band_names.empty() && cube.band_names.size() != cube.bands()) {
    throw ShapeError("band names count differs from band count");
  }
  if (!cube.wavelengths.empty() && cube.wavelengths.size() != cube.bands()) {
    throw ShapeError("wavelength count differs from band count");
  }
  for (const auto& n : cube.band_names) check_list_item(n);
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());

  std::ostringstream hdr;
  hdr << "ENVI\n";
  hdr << "samples = " << cube.cols() << '\n';
  hdr << "lines = " << cube.rows() << '\n';
  hdr << "bands = " << cube.bands() << '\n';
  hdr << "header offset = 0\n";
  hdr << "data type = " << static_cast<int>(cube.dtype()) << '\n';
  hdr << "interleave = bsq\n";
  hdr << "byte order = 0\n";
  if (!cube.band_names.empty()) {
    hdr << "band names = {";
    for (std::size_t b = 0; b < cube.band_names.size(); ++b) hdr << (b ? ", " : "") << cube.band_names[b];
    hdr << "}\n";
  }
  if (!cube.wavelengths.empty()) {
    hdr << "wavelength units = Nanometers\n";
    hdr << "wavelength = {";
    for (std::size_t b = 0; b < cube.wavelengths.size(); ++b) {
      hdr << (b ? ", " : "") << detail::format_number(cube.wavelengths[b]);
    }
    hdr << "}\n";
  }

  std::ofstream img(with_ext(stem, ".img"), std::ios::binary);
  if (!img) throw RasterFormatError("cannot write " + with_ext(stem, ".img").string());
  const auto write_payload = [&](auto span) {
    img.write(reinterpret_cast<const char*>(span.data()), static_cast<std::streamsize>(span.size_bytes()));
  };
  switch (cube.dtype()) {
    case DataType::float32:
      write_payload(cube.data<float>());
      break;
    case DataType::uint8:
      write_payload(cube.data<std::uint8_t>());
      break;
    case DataType::uint16:
      write_payload(cube.data<std::uint16_t>());
      break;
  }
  if (!img) throw RasterFormatError("write failed for " + with_ext(stem, ".img").string());

  std::ofstream h(with_ext(stem, ".hdr"));
  if (!h) throw RasterFormatError("cannot write " + with_ext(stem, ".hdr").string());
  h << hdr.str();
}

RasterCube read_raster(const fs::path& stem) {
  const RasterHeader h = read_header(with_ext(stem, ".hdr"));
  const fs::path img_path = with_ext(stem, ".img");
  std::ifstream img(img_path, std::ios::binary | std::ios::ate);
  if (!img) throw RasterFormatError("missing payload file " + img_path.string());
  const auto actual = static_cast<std::size_t>(img.tellg());
  const std::size_t expected = h.lines * h.samples * h.bands * bytes_per_sample(h.dtype);
  if (actual != expected) {
    throw RasterFormatError(img_path.string() + ": payload has " + std::to_string(actual) + " bytes, header implies " +
                            std::to_string(expected));
  }
  img.seekg(0);
  RasterCube cube(h.lines, h.samples, h.bands, h.dtype);
  const auto read_payload = [&](auto span) {
    img.read(reinterpret_cast<char*>(span.data()), static_cast<std::streamsize>(span.size_bytes()));
  };
  switch (h.dtype) {
    case DataType::float32:
      read_payload(cube.data<float>());
      break;
    case DataType::uint8:
      read_payload(cube.data<std::uint8_t>());
      break;
    case DataType::uint16:
      read_payload(cube.data<std::uint16_t>());
      break;
  }
  if (!img) throw RasterFormatError("read failed for " + img_path.string());
  cube.band_names = h.band_names;
  cube.wavelengths = h.wavelengths;
  return cube;
}

// ---------------------------------------------------------------------------
// Preprocessing

namespace {

template <typename T>
void copy_window(const RasterCube& src, RasterCube& dst, std::size_t r0, std::size_t c0) {
  const auto in = src.data<T>();
  auto out = dst.data<T>();
  for (std::size_t b = 0; b < dst.bands(); ++b) {
    for (std::size_t r = 0; r < dst.rows(); ++r) {
      const auto* row = in.data() + src.index(r0 + r, c0, b);
      std::copy(row, row + dst.cols(), out.data() + dst.index(r, 0, b));
    }
  }
}

template <typename T>
void replicate_2x(const RasterCube& src, RasterCube& dst) {
  const auto in = src.data<T>();
  auto out = dst.data<T>();
  for (std::size_t b = 0; b < dst.bands(); ++b) {
    for (std::size_t r = 0; r < dst.rows(); ++r) {
      for (std::size_t c = 0; c < dst.cols(); ++c) out[dst.index(r, c, b)] = in[src.index(r / 2, c / 2, b)];
    }
  }
}

template <typename F>
void dispatch(DataType t, F&& f) {
  switch (t) {
    case DataType::float32:
      f(float{});
      break;
    case DataType::uint8:
      f(std::uint8_t{});
      break;
    case DataType::uint16:
      f(std::uint16_t{});
      break;
  }
}

}  // namespace

std::vector<RasterCube> crop_patches(const RasterCube& raster, std::size_t patch_rows, std::size_t patch_cols) {
  if (patch_rows == 0 || patch_cols == 0) throw ShapeError("patch dimensions must be positive");
  if (patch_rows > raster.rows() || patch_cols > raster.cols()) {
    throw ShapeError("patch " + std::to_string(patch_rows) + "x" + std::to_string(patch_cols) +
                     " larger than raster " + std::to_string(raster.rows()) + "x" + std::to_string(raster.cols()));
  }
  std::vector<RasterCube> patches;
  for (std::size_t pr = 0; pr + patch_rows <= raster.rows(); pr += patch_rows) {
    for (std::size_t pc = 0; pc + patch_cols <= raster.cols(); pc += patch_cols) {
      RasterCube patch(patch_rows, patch_cols, raster.bands(), raster.dtype());
      dispatch(raster.dtype(), [&](auto tag) { copy_window<decltype(tag)>(raster, patch, pr, pc); });
      patch.band_names = raster.band_names;
      patch.wavelengths = raster.wavelengths;
      patches.push_back(std::move(patch));
    }
  }
  return patches;
}

RasterCube nn_upsample_2x(const RasterCube& patch) {
  if (patch.rows() != 32 || patch.cols() != 32) {
    throw ShapeError("nearest-neighbour upsampling expects a 32x32 patch, got " + std::to_string(patch.rows()) +
                     "x" + std::to_string(patch.cols()));
  }
  RasterCube out(64, 64, patch.bands(), patch.dtype());
  dispatch(patch.dtype(), [&](auto tag) { replicate_2x<decltype(tag)>(patch, out); });
  out.band_names = patch.band_names;
  out.wavelengths = patch.wavelengths;
  return out;
}

// ---------------------------------------------------------------------------
// Bundles

namespace {

struct ExpectedShape {
  const char* stem;
  std::size_t bands;
  DataType dtype;
};

constexpr ExpectedShape kExpected[] = {
    {"surf_refl", kBundleSpectralBands, DataType::float32},
    {"traits", kBundleTraitBands, DataType::float32},
    {"p5", kBundleTraitBands, DataType::float32},
    {"p95", kBundleTraitBands, DataType::float32},
    {"quality_scene_classification", 1, DataType::uint8},
};

const char* dtype_name(DataType t) {
  switch (t) {
    case DataType::float32:
      return "float32";
    case DataType::uint8:
      return "uint8";
    case DataType::uint16:
      return "uint16";
  }
  return "?";
}

void check_shape(const RasterCube& cube, const ExpectedShape& e) {
  if (cube.rows() != kTileSize || cube.cols() != kTileSize || cube.bands() != e.bands || cube.dtype() != e.dtype) {
    std::ostringstream msg;
    msg << e.stem << ": expected " << kTileSize << "x" << kTileSize << "x" << e.bands << " " << dtype_name(e.dtype)
        << ", got " << cube.rows() << "x" << cube.cols() << "x" << cube.bands() << " " << dtype_name(cube.dtype());
    throw ShapeError(msg.str());
  }
}

}  // namespace

void check_bundle_shapes(const TileBundle& b) {
  check_shape(b.surf_refl, kExpected[0]);
  check_shape(b.traits, kExpected[1]);
  check_shape(b.p5, kExpected[2]);
  check_shape(b.p95, kExpected[3]);
  check_shape(b.scene_class, kExpected[4]);
}

std::vector<fs::path> write_tile_bundle(const TileBundle& bundle, const fs::path& dataset_root, bool overwrite) {
  check_bundle_shapes(bundle);
  if (bundle.region.empty() || bundle.tile_id.empty()) throw std::invalid_argument("bundle needs region and tile id");
  const fs::path dir = dataset_root / bundle.region / bundle.tile_id;
  if (fs::exists(dir)) {
    if (!overwrite) throw std::runtime_error("tile directory " + dir.string() + " already exists");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  const RasterCube* cubes[] = {&bundle.surf_refl, &bundle.traits, &bundle.p5, &bundle.p95, &bundle.scene_class};
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < std::size(kExpected); ++i) {
    const fs::path stem = dir / kExpected[i].stem;
    write_raster(*cubes[i], stem);
    written.push_back(with_ext(stem, ".img"));
    written.push_back(with_ext(stem, ".hdr"));
  }
  return written;
}

ValidationReport validate_bundle(const fs::path& tile_dir) {
  ValidationReport report;
  report.tile_dir = tile_dir;
  auto& v = report.violations;
  if (!fs::is_directory(tile_dir)) {
    v.push_back(tile_dir.string() + ": not a directory");
    return report;
  }

  std::map<std::string, RasterCube> cubes;
  for (const auto& e : kExpected) {
    const fs::path stem = tile_dir / e.stem;
    bool present = true;
    for (const char* ext : {".img", ".hdr"}) {
      if (!fs::is_regular_file(with_ext(stem, ext))) {
        v.push_back(std::string(e.stem) + ext + ": missing");
        present = false;
      }
    }
    if (!present) continue;
    try {
      RasterCube cube = read_raster(stem);
      check_shape(cube, e);
      cubes.emplace(e.stem, std::move(cube));
    } catch (const std::exception& ex) {
      v.push_back(ex.what());
    }
  }

  if (const auto it = cubes.find("surf_refl"); it != cubes.end()) {
    const RasterCube& c = it->second;
    const auto data = c.data<float>();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const float x = data[i];
      if (!std::isfinite(x) || x < 0.0f || x > 1.0f) {
        const std::size_t band = i / c.pixels(), row = (i % c.pixels()) / c.cols(), col = i % c.cols();
        std::ostringstream msg;
        msg << "surf_refl: reflectance " << x << " outside [0, 1] at row " << row << ", col " << col << ", band "
            << band;
        v.push_back(msg.str());
      }
    }
  }

  const auto med = cubes.find("traits");
  const auto lo = cubes.find("p5");
  const auto hi = cubes.find("p95");
  for (const auto& it : {med, lo, hi}) {
    if (it == cubes.end()) continue;
    const auto data = it->second.data<float>();
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (!std::isfinite(data[i])) {
        v.push_back(it->first + ": non-finite value at flat index " + std::to_string(i));
      }
    }
  }
  if (med != cubes.end() && lo != cubes.end() && hi != cubes.end()) {
    const RasterCube& m = med->second;
    const auto dm = m.data<float>();
    const auto dl = lo->second.data<float>();
    const auto dh = hi->second.data<float>();
    for (std::size_t i = 0; i < dm.size(); ++i) {
      if (!(dl[i] <= dm[i] && dm[i] <= dh[i])) {
        const std::size_t band = i / m.pixels(), row = (i % m.pixels()) / m.cols(), col = i % m.cols();
        std::ostringstream msg;
        msg << "traits: ordering p5 <= median <= p95 violated at row " << row << ", col " << col << ", band " << band
            << " (" << dl[i] << ", " << dm[i] << ", " << dh[i] << ")";
        v.push_back(msg.str());
      }
    }
  }
  return report;
}

}  // namespace hsforge
