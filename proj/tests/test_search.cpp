#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hsforge/inversion.hpp"
#include "support/random_lut.hpp"

using namespace hsforge;

namespace {

// Sort every (cost, index) pair and keep the first n.
std::vector<Neighbor> full_sort_oracle(std::span<const float> obs, const LookupTable& lut, std::size_t n) {
  std::vector<Neighbor> all(lut.size());
  for (std::size_t i = 0; i < lut.size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const double d = static_cast<double>(obs[k]) - static_cast<double>(lut.bands(i)[k]);
      s += d * d;
    }
    all[i] = {i, std::sqrt(s / static_cast<double>(obs.size()))};
  }
  std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
    return a.cost != b.cost ? a.cost < b.cost : a.index < b.index;
  });
  all.resize(n);
  return all;
}

std::vector<float> random_obs(std::size_t pixels, std::size_t bands, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<float> u(-0.1f, 1.1f);
  std::vector<float> v(pixels * bands);
  for (auto& x : v) x = u(gen);
  return v;
}

}  // namespace

TEST_CASE("rmse examples") {
  const std::vector<float> a{0.1f, 0.3f}, b{0.2f, 0.1f};
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(a, b) == doctest::Approx(0.158114).epsilon(1e-5));
  const std::vector<double> c{0.1, 0.3}, d{0.2, 0.1};
  CHECK(rmse(c, d) == doctest::Approx(std::sqrt(0.025)).epsilon(1e-14));
  std::vector<double> x(37), y(37);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.01 * static_cast<double>(i);
    y[i] = x[i] + 0.1;
  }
  CHECK(rmse(x, y) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(rmse(x, y) == rmse(y, x));
  CHECK_THROWS(rmse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("exact match comes first") {
  const auto lut = random_lut(300, 12, 1);
  for (std::size_t k : {0, 17, 299}) {
    for (auto kernel : {SearchKernel::naive, SearchKernel::optimized}) {
      const auto r = n_best(lut.bands(k), lut, 5, kernel);
      CHECK(r[0].index == k);
      CHECK(r[0].cost == 0.0);
    }
  }
}

TEST_CASE("ties resolve by lower index") {
  auto lut = random_lut(3, 4, 2);
  for (std::size_t i = 1; i < 3; ++i) std::copy_n(lut.bands(0).begin(), 4, lut.band_values.begin() + i * 4);
  const std::vector<float> obs{0.5f, 0.5f, 0.5f, 0.5f};
  for (auto kernel : {SearchKernel::naive, SearchKernel::optimized}) {
    const auto r = n_best(obs, lut, 2, kernel);
    CHECK(r[0].index == 0);
    CHECK(r[1].index == 1);
  }
}

TEST_CASE("n larger than the table is rejected") {
  const auto lut = random_lut(5, 3, 3);
  const std::vector<float> obs{0.1f, 0.2f, 0.3f};
  CHECK_THROWS(n_best(obs, lut, 6));
  CHECK_THROWS(n_best(obs, lut, 0));
}

TEST_CASE("kernels equal the full-sort oracle") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t bands = 1 + seed % 13;
    const auto lut = random_lut(500 + 37 * seed, bands, seed, seed % 3 == 0 ? 0.125f : 0.0f);
    const auto obs = random_obs(8, bands, 1000 + seed);
    const std::size_t n = 1 + seed % 12;
    for (std::size_t p = 0; p < 8; ++p) {
      const std::span<const float> o(obs.data() + p * bands, bands);
      const auto expect = full_sort_oracle(o, lut, n);
      CHECK(n_best(o, lut, n, SearchKernel::naive) == expect);
      CHECK(n_best(o, lut, n, SearchKernel::optimized) == expect);
    }
  }
}

TEST_CASE("batch search skips non-finite pixels and ignores the worker count") {
  const auto lut = random_lut(3000, 12, 9);
  auto obs = random_obs(100, 12, 10);
  obs[5 * 12 + 3] = std::numeric_limits<float>::quiet_NaN();
  obs[40 * 12] = std::numeric_limits<float>::infinity();
  const std::size_t n = 10;
  std::vector<Neighbor> ref(100 * n);
  search_batch(obs, lut, n, SearchKernel::naive, 1, ref);
  for (std::size_t p : {5, 40}) {
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(ref[p * n + k].index == std::numeric_limits<std::size_t>::max());
      CHECK(std::isinf(ref[p * n + k].cost));
    }
  }
  for (auto kernel : {SearchKernel::naive, SearchKernel::optimized}) {
    for (int w : {1, 2, 3, 8}) {
      std::vector<Neighbor> out(100 * n);
      search_batch(obs, lut, n, kernel, w, out);
      CHECK(out == ref);
    }
  }
}
