#include "hsforge/lut.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "text_util.hpp"

namespace hsforge {

static_assert(std::endian::native == std::endian::little, "LUT serialization assumes a little-endian host");

// ---------------------------------------------------------------------------
// Random draws

double Rng::uniform_open() {
  // 53 random bits centred in their cell: never exactly 0 or 1.
  return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection sampling on the largest multiple of `bound`.
  const std::uint64_t limit = bound * (UINT64_MAX / bound);
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % bound;
}

double Rng::normal() {
  const double u1 = uniform_open();
  const double u2 = uniform_open();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over seed and stream index
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<ParameterVector> lhs_sample(const ParameterRanges& ranges, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("LHS sample size must be positive");
  std::vector<ParameterVector> samples(m);
  Rng rng(seed);
  std::vector<std::size_t> perm(m);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t j = 0; j < kTraitCount; ++j) {
    const Interval& iv = ranges[j];
    if (iv.degenerate()) {
      for (auto& s : samples) s[j] = iv.min;
      continue;
    }
    // Fisher-Yates over {1..m}
    for (std::size_t i = 0; i < m; ++i) perm[i] = i + 1;
    for (std::size_t i = m - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    for (std::size_t i = 0; i < m; ++i) {
      const double u = rng.uniform_open();
      const double v = iv.min + (static_cast<double>(perm[i]) - u) * inv_m * iv.width();
      samples[i][j] = std::clamp(v, iv.min, iv.max);
    }
  }
  return samples;
}

// ---------------------------------------------------------------------------
// Plausibility filters

void ConstraintConfig::validate(const SpectralGrid& grid) const {
  if (!(coupling_halfwidth > 0.0)) throw std::invalid_argument("coupling half-width must be positive");
  if (green_peak_enabled) {
    if (!(green_window_lo_nm <= green_window_hi_nm) || !grid.contains(green_window_lo_nm) ||
        !grid.contains(green_window_hi_nm)) {
      throw std::invalid_argument("green-peak window must lie within the spectral grid");
    }
  }
}

bool cab_lai_accept(const ParameterVector& p, const ConstraintConfig& c) {
  if (!c.coupling_enabled) return true;
  const double center = c.coupling_intercept + c.coupling_slope * p[Trait::lai];
  return std::abs(p[Trait::cab] - center) <= c.coupling_halfwidth;
}

double green_peak_wavelength(const Spectrum& spectrum, const ConstraintConfig& c) {
  const SpectralGrid& grid = spectrum.grid();
  double best_value = -INFINITY;
  double best_nm = NAN;
  for (std::size_t i = 0; i < grid.count; ++i) {
    const double w = grid.wavelength(i);
    if (w < c.green_window_lo_nm - 1e-9 || w > c.green_window_hi_nm + 1e-9) continue;
    if (spectrum[i] >= best_value) {
      best_value = spectrum[i];
      best_nm = w;
    }
  }
  if (std::isnan(best_nm)) throw BandCoverageError("green-peak window contains no grid sample");
  return best_nm;
}

bool green_peak_accept(const Spectrum& spectrum, const ConstraintConfig& c) {
  if (!c.green_peak_enabled) return true;
  return green_peak_wavelength(spectrum, c) >= c.green_threshold_nm;
}

// ---------------------------------------------------------------------------
// Table construction

void LookupTable::validate() const {
  if (spectra.size() != params.size() * grid.count) throw LutFormatError("LUT spectra size mismatch");
  if (band_values.size() != params.size() * band_names.size()) throw LutFormatError("LUT band value size mismatch");
}

namespace {

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw std::runtime_error("SHA-256 initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view s) { EVP_DigestUpdate(ctx_, s.data(), s.size()); }
  Digest finish() {
    Digest d{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, d.data(), &len);
    return d;
  }

 private:
  EVP_MD_CTX* ctx_;
};

}  // namespace

Digest lut_config_digest(const LhsConfig& lhs, const ConstraintConfig& c, const RtmInputs& rtm,
                         const BandSet& bands) {
  using detail::format_number;
  std::ostringstream text;
  text << "hsforge-lut-v1\n";
  text << "size=" << lhs.target_size << " seed=" << lhs.seed << " refill=" << lhs.refill
       << " rounds=" << lhs.max_refill_rounds << '\n';
  for (std::size_t j = 0; j < kTraitCount; ++j) {
    text << trait_name(j) << '=' << format_number(lhs.ranges[j].min) << ',' << format_number(lhs.ranges[j].max)
         << '\n';
  }
  text << "coupling=" << c.coupling_enabled << ',' << format_number(c.coupling_intercept) << ','
       << format_number(c.coupling_slope) << ',' << format_number(c.coupling_halfwidth) << '\n';
  text << "green=" << c.green_peak_enabled << ',' << format_number(c.green_window_lo_nm) << ','
       << format_number(c.green_window_hi_nm) << ',' << format_number(c.green_threshold_nm) << '\n';
  text << "rtm=" << format_number(rtm.config.k_d) << ',' << format_number(rtm.config.max_zenith_deg) << '\n';
  for (const auto& b : bands) {
    text << "band=" << b.name << ',' << format_number(b.center_nm) << ',' << format_number(b.width_nm) << '\n';
  }
  const SpectralGrid& g = rtm.coeffs.grid;
  text << "grid=" << format_number(g.start_nm) << ',' << format_number(g.step_nm) << ',' << g.count << '\n';
  Sha256 sha;
  sha.update(text.str());
  const auto& k = rtm.coeffs;
  for (const auto* col : {&k.k_ab, &k.k_ar, &k.k_ant, &k.k_brown, &k.k_w, &k.k_m, &k.r_if}) {
    sha.update(std::string_view(reinterpret_cast<const char*>(col->data()), col->size() * sizeof(double)));
  }
  for (std::size_t s = 0; s < rtm.soils.size(); ++s) {
    sha.update(rtm.soils.names[s]);
    const auto v = rtm.soils.spectra[s].values();
    sha.update(std::string_view(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double)));
  }
  return sha.finish();
}

LookupTable build_lut(const LhsConfig& lhs, const ConstraintConfig& constraints, const RtmInputs& rtm,
                      const BandSet& bands, int workers, LutBuildStats* stats) {
  if (lhs.target_size == 0) throw std::invalid_argument("LUT size must be positive");
  if (workers < 1) throw std::invalid_argument("worker count must be >= 1");
  lhs.ranges.validate();
  rtm.coeffs.validate();
  rtm.config.validate();
  const SpectralGrid grid = rtm.coeffs.grid;
  constraints.validate(grid);
  const BandResampler resampler(grid, bands);
  const std::size_t nb = bands.size();
  const std::size_t target = lhs.target_size;

  LookupTable lut;
  lut.grid = grid;
  lut.band_names = bands.names();
  lut.seed = lhs.seed;
  lut.config_digest = lut_config_digest(lhs, constraints, rtm, bands);
  lut.params.reserve(target);
  lut.spectra.reserve(target * grid.count);
  lut.band_values.reserve(target * nb);

  LutBuildStats local;
  constexpr std::size_t kChunk = 4096;
  std::vector<float> chunk_spectra(kChunk * grid.count);
  std::vector<float> chunk_bands(kChunk * nb);
  std::vector<char> chunk_green(kChunk);
  std::vector<char> chunk_coupled(kChunk);

  const int rounds = lhs.refill ? 1 + lhs.max_refill_rounds : 1;
  for (int round = 0; round < rounds && lut.size() < target; ++round) {
    ++local.rounds;
    const auto candidates = lhs_sample(lhs.ranges, target, derive_seed(lhs.seed, static_cast<std::uint64_t>(round)));
    for (std::size_t begin = 0; begin < candidates.size() && lut.size() < target; begin += kChunk) {
      const std::size_t n = std::min(kChunk, candidates.size() - begin);
      for (std::size_t i = 0; i < n; ++i) chunk_coupled[i] = cab_lai_accept(candidates[begin + i], constraints);

      std::exception_ptr failure;
      std::size_t failure_index = SIZE_MAX;
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
      for (std::size_t i = 0; i < n; ++i) {
        if (!chunk_coupled[i]) continue;
        try {
          const Spectrum s = forward(candidates[begin + i], rtm);
          std::copy(s.values().begin(), s.values().end(), chunk_spectra.begin() + i * grid.count);
          resampler.apply(s.values(), std::span<float>(chunk_bands).subspan(i * nb, nb));
          chunk_green[i] = green_peak_accept(s, constraints);
        } catch (...) {
#pragma omp critical(hsforge_lut_failure)
          if (i < failure_index) {
            failure_index = i;
            failure = std::current_exception();
          }
        }
      }
      if (failure) std::rethrow_exception(failure);

      // Sequential acceptance keeps the table independent of the worker count.
      for (std::size_t i = 0; i < n && lut.size() < target; ++i) {
        ++local.candidates;
        if (!chunk_coupled[i]) {
          ++local.coupling_rejections;
          continue;
        }
        if (!chunk_green[i]) {
          ++local.green_peak_rejections;
          continue;
        }
        lut.params.push_back(candidates[begin + i]);
        const auto spec = std::span<const float>(chunk_spectra).subspan(i * grid.count, grid.count);
        lut.spectra.insert(lut.spectra.end(), spec.begin(), spec.end());
        const auto bv = std::span<const float>(chunk_bands).subspan(i * nb, nb);
        lut.band_values.insert(lut.band_values.end(), bv.begin(), bv.end());
      }
    }
  }
  if (stats != nullptr) *stats = local;
  if (lhs.refill && lut.size() < target) {
    std::ostringstream msg;
    msg << "only " << lut.size() << " of " << target << " LUT entries accepted after " << local.rounds
        << " sampling rounds (acceptance rate " << local.acceptance_rate() << ")";
    throw ConstraintInfeasibleError(msg.str(), local.acceptance_rate());
  }
  return lut;
}

// ---------------------------------------------------------------------------
// Binary persistence

namespace {

constexpr char kMagic[6] = {'H', 'S', 'L', 'U', 'T', '\0'};
constexpr std::uint16_t kVersion = 1;

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T value;
    get_bytes(&value, sizeof(T));
    return value;
  }
  void get_bytes(void* out, std::size_t n) {
    if (n > bytes_.size() - pos_) throw LutFormatError("LUT file is truncated");
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded pieces.
  constexpr std::size_t kPiece = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kPiece) {
    const std::size_t n = std::min(kPiece, bytes.size() - off);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize_lut(const LookupTable& lut) {
  lut.validate();
  ByteWriter w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint16_t>(kVersion);
  w.put<std::uint64_t>(lut.size());
  w.put<double>(lut.grid.start_nm);
  w.put<double>(lut.grid.step_nm);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(lut.grid.count));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(lut.band_count()));
  for (const auto& name : lut.band_names) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
  }
  w.put<std::uint64_t>(lut.seed);
  w.put_bytes(lut.config_digest.data(), lut.config_digest.size());
  for (std::size_t i = 0; i < lut.size(); ++i) {
    w.put_bytes(lut.params[i].values.data(), kTraitCount * sizeof(double));
    w.put_bytes(lut.spectrum(i).data(), lut.grid.count * sizeof(float));
    w.put_bytes(lut.bands(i).data(), lut.band_count() * sizeof(float));
  }
  const std::uint32_t crc = crc32_of(w.bytes());
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

void save_lut(const LookupTable& lut, const std::filesystem::path& path) {
  const auto bytes = serialize_lut(lut);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

LookupTable deserialize_lut(std::span<const std::uint8_t> bytes, const SpectralGrid& expected_grid) {
  ByteReader r(bytes);
  char magic[sizeof(kMagic)];
  r.get_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw LutFormatError("not a LUT file (bad magic)");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) throw LutFormatError("unsupported LUT version " + std::to_string(version));

  LookupTable lut;
  const auto m = r.get<std::uint64_t>();
  lut.grid.start_nm = r.get<double>();
  lut.grid.step_nm = r.get<double>();
  lut.grid.count = r.get<std::uint32_t>();
  if (!(lut.grid == expected_grid)) {
    throw LutGridMismatchError("LUT grid (" + detail::format_number(lut.grid.start_nm) + ", " +
                               detail::format_number(lut.grid.step_nm) + ", " + std::to_string(lut.grid.count) +
                               ") does not match pipeline grid (" + detail::format_number(expected_grid.start_nm) +
                               ", " + detail::format_number(expected_grid.step_nm) + ", " +
                               std::to_string(expected_grid.count) + ")");
  }
  const auto nb = r.get<std::uint32_t>();
  for (std::uint32_t b = 0; b < nb; ++b) {
    const auto len = r.get<std::uint32_t>();
    if (len > r.remaining()) throw LutFormatError("LUT file is truncated");
    std::string name(len, '\0');
    r.get_bytes(name.data(), len);
    lut.band_names.push_back(std::move(name));
  }
  lut.seed = r.get<std::uint64_t>();
  r.get_bytes(lut.config_digest.data(), lut.config_digest.size());

  const std::size_t record = kTraitCount * sizeof(double) + (lut.grid.count + nb) * sizeof(float);
  if (m > (r.remaining() / record)) throw LutFormatError("LUT file is truncated");
  if (r.remaining() != m * record + sizeof(std::uint32_t)) {
    throw LutFormatError("LUT payload size does not match its header");
  }
  lut.params.resize(m);
  lut.spectra.resize(m * lut.grid.count);
  lut.band_values.resize(m * nb);
  for (std::size_t i = 0; i < m; ++i) {
    r.get_bytes(lut.params[i].values.data(), kTraitCount * sizeof(double));
    r.get_bytes(lut.spectra.data() + i * lut.grid.count, lut.grid.count * sizeof(float));
    r.get_bytes(lut.band_values.data() + i * nb, nb * sizeof(float));
  }
  const std::size_t payload_end = r.position();
  const auto stored_crc = r.get<std::uint32_t>();
  if (crc32_of(bytes.first(payload_end)) != stored_crc) throw LutFormatError("LUT checksum mismatch");
  return lut;
}

LookupTable load_lut(const std::filesystem::path& path, const SpectralGrid& expected_grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open LUT " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_lut(bytes, expected_grid);
  } catch (const LutGridMismatchError& e) {
    throw LutGridMismatchError(path.string() + ": " + e.what());
  } catch (const LutFormatError& e) {
    throw LutFormatError(path.string() + ": " + e.what());
  }
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

}  // namespace hsforge
