// Serial reference search. Kept deliberately plain: the optimized kernel is
// checked against it bit for bit.

#include <algorithm>
#include <cmath>

#include "hsforge/inversion.hpp"
#include "search_detail.hpp"

namespace hsforge::detail {

void search_naive(std::span<const float> obs, const LookupTable& lut, std::size_t n, std::span<Neighbor> out) {
  const std::size_t nb = lut.band_count();
  std::vector<Neighbor> all(lut.size());
  for (std::size_t i = 0; i < lut.size(); ++i) {
    all[i] = {i, finish_cost(squared_distance(obs, lut.bands(i)), nb)};
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), neighbor_less);
  std::copy_n(all.begin(), n, out.begin());
}

}  // namespace hsforge::detail
