#include "pattformer/pc/sampling.hpp"

#include <limits>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::pc {

std::vector<std::size_t> fps(std::span<const Vec3> coords, std::size_t n, std::size_t start) {
  const std::size_t total = coords.size();
  if (n < 1 || n > total) {
    throw InputError("fps: cannot sample " + std::to_string(n) + " of " + std::to_string(total) +
                     " points");
  }
  if (start >= total) throw InputError("fps: start index " + std::to_string(start) + " out of range");

  std::vector<std::size_t> picked;
  picked.reserve(n);
  std::vector<double> min_d2(total, std::numeric_limits<double>::infinity());
  std::size_t current = start;
  for (std::size_t s = 0; s < n; ++s) {
    picked.push_back(current);
    min_d2[current] = -1.0;  // never re-selected
    std::size_t best = total;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < total; ++i) {
      if (min_d2[i] < 0) continue;
      const double d2 = squared_distance(coords[i], coords[current]);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = i;
      }
    }
    if (best == total) break;
    current = best;
  }
  return picked;
}

}  // namespace pattformer::pc
