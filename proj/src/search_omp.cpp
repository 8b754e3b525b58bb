#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <vector>

#include "hsforge/inversion.hpp"
#include "search_detail.hpp"

namespace hsforge {

namespace detail {

namespace {

constexpr std::size_t kLutBlock = 512;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Bounded ascending list of the best candidates seen so far for one pixel.
class TopN {
 public:
  explicit TopN(std::size_t capacity) : items_(capacity), sums_(capacity) {}

  // Any candidate whose squared sum reaches this value cannot enter.
  double threshold() const { return count_ < items_.size() ? kInf : sums_[count_ - 1]; }

  void offer(std::size_t index, double sum, double cost) {
    const Neighbor cand{index, cost};
    if (count_ == items_.size() && !neighbor_less(cand, items_[count_ - 1])) return;
    std::size_t pos = count_ < items_.size() ? count_++ : count_ - 1;
    while (pos > 0 && neighbor_less(cand, items_[pos - 1])) {
      items_[pos] = items_[pos - 1];
      sums_[pos] = sums_[pos - 1];
      --pos;
    }
    items_[pos] = cand;
    sums_[pos] = sum;
  }

  void copy_to(std::span<Neighbor> out) const { std::copy_n(items_.begin(), count_, out.begin()); }

 private:
  std::vector<Neighbor> items_;
  std::vector<double> sums_;
  std::size_t count_ = 0;
};

constexpr std::size_t kBoundBands = 4;

}  // namespace

SearchTable::SearchTable(const LookupTable& lut) : entries(lut.size()), bands(lut.band_count()) {
  values.resize(entries * bands);
  for (std::size_t i = 0; i < entries; ++i) {
    const auto src = lut.bands(i);
    for (std::size_t b = 0; b < bands; ++b) values[b * entries + i] = static_cast<double>(src[b]);
  }
  // Bound bands are picked by pivoted Cholesky on the band covariance:
  // each pick has the largest variance left unexplained by earlier picks.
  std::vector<double> mean(bands, 0.0);
  for (std::size_t b = 0; b < bands; ++b) {
    const double* col = values.data() + b * entries;
    for (std::size_t i = 0; i < entries; ++i) mean[b] += col[i];
    mean[b] /= static_cast<double>(std::max<std::size_t>(1, entries));
  }
  std::vector<double> cov(bands * bands, 0.0);
  for (std::size_t a = 0; a < bands; ++a) {
    for (std::size_t b = a; b < bands; ++b) {
      const double* ca = values.data() + a * entries;
      const double* cb = values.data() + b * entries;
      double s = 0.0;
      for (std::size_t i = 0; i < entries; ++i) s += (ca[i] - mean[a]) * (cb[i] - mean[b]);
      cov[a * bands + b] = cov[b * bands + a] = s;
    }
  }
  std::vector<char> used(bands, 0);
  for (std::size_t pick = 0; pick < std::min(bands, kBoundBands); ++pick) {
    std::size_t best = bands;
    for (std::size_t b = 0; b < bands; ++b) {
      if (!used[b] && (best == bands || cov[b * bands + b] > cov[best * bands + best])) best = b;
    }
    used[best] = 1;
    bound_bands.push_back(best);
    const double pivot = cov[best * bands + best];
    if (!(pivot > 0.0)) continue;
    std::vector<double> row(cov.begin() + static_cast<std::ptrdiff_t>(best * bands),
                            cov.begin() + static_cast<std::ptrdiff_t>((best + 1) * bands));
    for (std::size_t a = 0; a < bands; ++a) {
      for (std::size_t b = 0; b < bands; ++b) cov[a * bands + b] -= row[a] * row[b] / pivot;
    }
  }
  // Relative rounding error of a sum of at most `bands` non-negative terms
  // stays below bands * eps; the margin covers both the bound and the full sum.
  bound_margin = 1.0 - 4.0 * static_cast<double>(bands + 1) * std::numeric_limits<double>::epsilon();
}

// Each entry's cost is accumulated over bands 0..nb-1 in order, exactly as
// squared_distance does. A partial sum over the highest-variance bands
// (vectorized across a LUT block) discards entries whose full cost cannot
// beat the current n-th best, even after rounding.
void search_blocked(std::span<const float> observations, std::size_t pixels, const SearchTable& table, std::size_t n,
                    std::span<Neighbor> out) {
  const std::size_t nb = table.bands;
  const std::size_t m = table.entries;
  const double* soa = table.values.data();
  std::vector<double> obs(observations.begin(), observations.end());
  std::vector<TopN> tops(pixels, TopN(n));
  std::vector<double> bound(kLutBlock);

  for (std::size_t lut_begin = 0; lut_begin < m; lut_begin += kLutBlock) {
    const std::size_t len = std::min(m, lut_begin + kLutBlock) - lut_begin;
    for (std::size_t p = 0; p < pixels; ++p) {
      TopN& top = tops[p];
      const double* o = obs.data() + p * nb;
      double* acc = bound.data();
      std::fill_n(acc, len, 0.0);
      for (const std::size_t b : table.bound_bands) {
        const double ob = o[b];
        const double* col = soa + b * m + lut_begin;
        for (std::size_t i = 0; i < len; ++i) {
          const double d = ob - col[i];
          acc[i] += d * d;
        }
      }
      double limit = top.threshold();
      for (std::size_t i = 0; i < len; ++i) {
        if (acc[i] * table.bound_margin >= limit) continue;
        const std::size_t entry = lut_begin + i;
        double sum = 0.0;
        std::size_t b = 0;
        while (b < nb) {
          const std::size_t stop = std::min(nb, b + 4);
          for (; b < stop; ++b) {
            const double d = o[b] - soa[b * m + entry];
            sum += d * d;
          }
          if (sum >= limit) break;
        }
        if (sum >= limit) continue;
        top.offer(entry, sum, finish_cost(sum, nb));
        limit = top.threshold();
      }
    }
  }
  for (std::size_t p = 0; p < pixels; ++p) tops[p].copy_to(out.subspan(p * n, n));
}

}  // namespace detail

const char* kernel_name(SearchKernel k) { return k == SearchKernel::naive ? "naive" : "optimized"; }

void search_batch(std::span<const float> observations, const LookupTable& lut, std::size_t n, SearchKernel kernel,
                  int workers, std::span<Neighbor> out) {
  const std::size_t nb = lut.band_count();
  if (nb == 0 || observations.size() % nb != 0) throw ShapeError("observation buffer is not a multiple of the band count");
  if (n == 0 || n > lut.size()) {
    throw std::invalid_argument("n_best = " + std::to_string(n) + " must lie in [1, " + std::to_string(lut.size()) + "]");
  }
  if (workers < 1) throw std::invalid_argument("worker count must be >= 1");
  const std::size_t pixels = observations.size() / nb;
  if (out.size() != pixels * n) throw ShapeError("output buffer size mismatch");

  const auto finite = [&](std::size_t p) {
    const auto o = observations.subspan(p * nb, nb);
    return std::all_of(o.begin(), o.end(), [](float x) { return std::isfinite(x); });
  };
  const auto mark_invalid = [&](std::size_t p) {
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(p * n), n,
                Neighbor{SIZE_MAX, std::numeric_limits<double>::infinity()});
  };

  if (kernel == SearchKernel::naive) {
#pragma omp parallel for schedule(dynamic, 4) num_threads(workers)
    for (std::size_t p = 0; p < pixels; ++p) {
      if (!finite(p)) {
        mark_invalid(p);
        continue;
      }
      detail::search_naive(observations.subspan(p * nb, nb), lut, n, out.subspan(p * n, n));
    }
    return;
  }

  // Blocks of consecutive finite pixels are searched together.
  constexpr std::size_t kBlock = 16;
  const detail::SearchTable table(lut);
  const std::size_t blocks = (pixels + kBlock - 1) / kBlock;
#pragma omp parallel num_threads(workers)
  {
    std::vector<float> packed;
    std::vector<std::size_t> members;
    std::vector<Neighbor> found;
#pragma omp for schedule(dynamic, 1)
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      const std::size_t begin = blk * kBlock;
      const std::size_t end = std::min(pixels, begin + kBlock);
      packed.clear();
      members.clear();
      for (std::size_t p = begin; p < end; ++p) {
        if (!finite(p)) {
          mark_invalid(p);
          continue;
        }
        members.push_back(p);
        const auto o = observations.subspan(p * nb, nb);
        packed.insert(packed.end(), o.begin(), o.end());
      }
      if (members.empty()) continue;
      found.resize(members.size() * n);
      detail::search_blocked(packed, members.size(), table, n, found);
      for (std::size_t k = 0; k < members.size(); ++k) {
        std::copy_n(found.begin() + static_cast<std::ptrdiff_t>(k * n), n,
                    out.begin() + static_cast<std::ptrdiff_t>(members[k] * n));
      }
    }
  }
}

std::vector<Neighbor> n_best(std::span<const float> obs, const LookupTable& lut, std::size_t n, SearchKernel kernel) {
  if (obs.size() != lut.band_count()) {
    throw ShapeError("observation has " + std::to_string(obs.size()) + " bands, LUT has " +
                     std::to_string(lut.band_count()));
  }
  std::vector<Neighbor> out(n);
  search_batch(obs, lut, n, kernel, 1, out);
  return out;
}

}  // namespace hsforge
