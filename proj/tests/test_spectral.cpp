#include <doctest.h>

#include <fstream>
#include <random>

#include "hsforge/spectral.hpp"
#include "support/tmpdir.hpp"

using namespace hsforge;

TEST_CASE("make_grid sample counts") {
  CHECK(make_grid(400, 2500, 10).count == 211);
  CHECK(make_grid(400, 400, 10).count == 1);
  CHECK(make_grid(400, 500, 10).count == 11);
  const auto g = make_grid(400, 2500, 10);
  CHECK(g.wavelength(g.count - 1) == 2500.0);
  CHECK(g == SpectralGrid::canonical());
}

TEST_CASE("make_grid rejects bad ranges") {
  CHECK_THROWS_AS(make_grid(400, 505, 10), GridError);
  CHECK_THROWS_AS(make_grid(400, 500, 0), GridError);
  CHECK_THROWS_AS(make_grid(500, 400, 10), GridError);
}

TEST_CASE("last wavelength is exact for divisible inputs") {
  for (double step : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
    const auto g = make_grid(400, 2500, step);
    CHECK(g.wavelength(g.count - 1) == 2500.0);
  }
}

TEST_CASE("spectrum validation") {
  const auto g = make_grid(400, 500, 10);
  CHECK_THROWS(Spectrum(g, std::vector<double>(10, 0.1)));
  std::vector<double> v(11, 0.1);
  v[3] = std::nan("");
  CHECK_THROWS(Spectrum(g, v));
}

TEST_CASE("band_average examples") {
  const auto g = SpectralGrid::canonical();
  Spectrum flat(g, std::vector<double>(g.count, 0.30));
  for (const auto& b : default_sensor_bands()) CHECK(band_average(flat, b) == doctest::Approx(0.30).epsilon(1e-15));

  std::vector<double> ramp(g.count);
  for (std::size_t i = 0; i < g.count; ++i) ramp[i] = static_cast<double>(i) / 1000.0;
  Spectrum r(g, ramp);
  CHECK(band_average(r, SensorBand{"x", 660, 5}) == ramp[26]);

  std::vector<double> two(g.count, 0.0);
  two[10] = 0.2;  // 500 nm
  two[11] = 0.4;  // 510 nm
  CHECK(band_average(Spectrum(g, two), SensorBand{"y", 505, 10}) == doctest::Approx(0.3));
  CHECK_THROWS_AS(band_average(flat, SensorBand{"z", 405, 4}), BandCoverageError);
}

TEST_CASE("band_average is linear and bounded") {
  const auto g = SpectralGrid::canonical();
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(g.count), b(g.count), c(g.count);
    const double alpha = u(gen), beta = u(gen);
    for (std::size_t i = 0; i < g.count; ++i) {
      a[i] = u(gen);
      b[i] = u(gen);
      c[i] = alpha * a[i] + beta * b[i];
    }
    for (const auto& band : default_sensor_bands()) {
      const double lhs = band_average(Spectrum(g, c), band);
      const double rhs = alpha * band_average(Spectrum(g, a), band) + beta * band_average(Spectrum(g, b), band);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
      const double m = band_average(Spectrum(g, a), band);
      CHECK(m >= 0.0);
      CHECK(m <= 1.0);
    }
  }
}

TEST_CASE("default sensor bands") {
  const auto bs = default_sensor_bands();
  const std::vector<std::string> expect{"B1", "B2", "B3", "B4", "B5", "B6", "B7", "B8", "B8A", "B9", "B11", "B12"};
  CHECK(bs.names() == expect);
  CHECK(bs.index_of("B8A") == 8);
  for (const auto& b : bs) {
    CHECK(b.lower_nm() >= 400.0);
    CHECK(b.upper_nm() <= 2500.0);
  }
}

TEST_CASE("band set file parsing") {
  TempDir dir("bands");
  {
    std::ofstream f(dir / "bands.txt");
    f << "# custom set\nR,660,20\n\nNIR, 860 , 40  # trailing\n";
  }
  const auto bs = load_band_set(dir / "bands.txt");
  REQUIRE(bs.size() == 2);
  CHECK(bs.names() == std::vector<std::string>{"R", "NIR"});
  CHECK(bs[1].center_nm == 860.0);
  CHECK(bs[1].width_nm == 40.0);
  {
    std::ofstream f(dir / "dup.txt");
    f << "R,660,20\nR,700,20\n";
  }
  CHECK_THROWS(load_band_set(dir / "dup.txt"));
}

TEST_CASE("resampler matches band_average") {
  const auto g = SpectralGrid::canonical();
  const auto bs = default_sensor_bands();
  BandResampler rs(g, bs);
  std::vector<double> v(g.count);
  for (std::size_t i = 0; i < g.count; ++i) v[i] = 0.5 + 0.4 * std::sin(0.05 * static_cast<double>(i));
  Spectrum s(g, v);
  const auto out = rs.apply(s);
  std::vector<float> outf(bs.size());
  rs.apply(v, outf);
  for (std::size_t b = 0; b < bs.size(); ++b) {
    CHECK(out[b] == doctest::Approx(band_average(s, bs[b])).epsilon(1e-14));
    CHECK(outf[b] == static_cast<float>(out[b]));
  }
}

TEST_CASE("parameter vector order and ranges") {
  CHECK(trait_names()[0] == "N");
  CHECK(trait_names()[12] == "soil_index");
  CHECK(trait_names()[15] == "phi_rel");
  const auto r = ParameterRanges::defaults(2);
  CHECK(r[Trait::cab].max == 160.0);
  CHECK(r[Trait::lidfb].degenerate());
  CHECK(r[Trait::type_lidf].min == 1.0);
  CHECK(r[Trait::soil_index].min == 2.0);
  CHECK_NOTHROW(r.validate());

  std::array<double, kTraitCount> raw{};
  for (std::size_t i = 0; i < kTraitCount; ++i) raw[i] = 0.5 + static_cast<double>(i);
  const auto p = ParameterVector::from_span(raw);
  for (std::size_t i = 0; i < kTraitCount; ++i) CHECK(p[i] == raw[i]);
}
