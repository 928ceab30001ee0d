#include "pattformer/pc/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::pc {

namespace {

// Visits the cells at Chebyshev distance exactly `ring` from `base` in
// lexicographic order. Returns false if the visitor asked to stop.
template <typename Visitor>
bool visit_ring(const VoxelGrid& grid, const CellKey& base, std::int64_t ring, Visitor&& visit) {
  for (std::int64_t dx = -ring; dx <= ring; ++dx) {
    for (std::int64_t dy = -ring; dy <= ring; ++dy) {
      const bool edge_xy = std::abs(dx) == ring || std::abs(dy) == ring;
      // Interior columns only contribute their two z caps.
      const std::int64_t step = edge_xy || ring == 0 ? 1 : 2 * ring;
      for (std::int64_t dz = -ring; dz <= ring; dz += step) {
        if (const auto* cell = grid.find({base[0] + dx, base[1] + dy, base[2] + dz})) {
          if (!visit(*cell)) return false;
        }
      }
    }
  }
  return true;
}

void sweep(const VoxelGrid& grid, std::span<const Vec3> coords, const Vec3& center, double radius,
           std::size_t max_neighbors, std::size_t self, std::vector<std::size_t>& out) {
  const double r2 = radius * radius;
  const auto rings = static_cast<std::int64_t>(std::ceil(radius / grid.cell_size()));
  const CellKey base = grid.key_of(center);
  const std::size_t begin = out.size();
  if (self != std::numeric_limits<std::size_t>::max()) out.push_back(self);
  if (out.size() - begin == max_neighbors) return;
  for (std::int64_t ring = 0; ring <= rings; ++ring) {
    const bool more = visit_ring(grid, base, ring, [&](const std::vector<std::size_t>& cell) {
      for (std::size_t j : cell) {
        if (j == self) continue;
        if (squared_distance(coords[j], center) <= r2) {
          out.push_back(j);
          if (out.size() - begin == max_neighbors) return false;
        }
      }
      return true;
    });
    if (!more || out.size() - begin == max_neighbors) break;
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(begin), out.end());
}

void check_query_args(double radius, std::size_t max_neighbors) {
  if (!(radius > 0)) throw InputError("voxel query radius must be positive");
  if (max_neighbors < 1) throw InputError("voxel query window size must be >= 1");
}

}  // namespace

std::vector<std::size_t> NeighborWindows::owners() const {
  std::vector<std::size_t> out(indices.size());
  for (std::size_t q = 0; q + 1 < offsets.size(); ++q) {
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(offsets[q]),
              out.begin() + static_cast<std::ptrdiff_t>(offsets[q + 1]), q);
  }
  return out;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

NeighborWindows voxel_query(const VoxelGrid& grid, std::span<const Vec3> coords,
                            std::span<const std::size_t> queries, double radius,
                            std::size_t max_neighbors) {
  check_query_args(radius, max_neighbors);
  if (grid.point_count() != coords.size()) {
    throw InputError("voxel grid was built from a different cloud");
  }
  NeighborWindows w;
  w.max_size = max_neighbors;
  w.radius = radius;
  w.offsets.reserve(queries.size() + 1);
  w.indices.reserve(queries.size() * std::min<std::size_t>(max_neighbors, 32));
  for (std::size_t q : queries) {
    if (q >= coords.size()) {
      throw InputError("query index " + std::to_string(q) + " out of range for " +
                       std::to_string(coords.size()) + " points");
    }
    sweep(grid, coords, coords[q], radius, max_neighbors, q, w.indices);
    w.offsets.push_back(w.indices.size());
  }
  return w;
}

NeighborWindows voxel_query_at(const VoxelGrid& grid, std::span<const Vec3> coords,
                               std::span<const Vec3> centers, double radius,
                               std::size_t max_neighbors) {
  check_query_args(radius, max_neighbors);
  if (grid.point_count() != coords.size()) {
    throw InputError("voxel grid was built from a different cloud");
  }
  NeighborWindows w;
  w.max_size = max_neighbors;
  w.radius = radius;
  for (const Vec3& c : centers) {
    for (double v : c) {
      if (!std::isfinite(v)) throw InputError("voxel query center is not finite");
    }
    sweep(grid, coords, c, radius, max_neighbors, std::numeric_limits<std::size_t>::max(),
          w.indices);
    w.offsets.push_back(w.indices.size());
  }
  return w;
}

NeighborWindows knn_query(std::span<const Vec3> coords, std::span<const std::size_t> queries,
                          std::size_t k) {
  const std::size_t n = coords.size();
  if (k > n) {
    throw InputError("knn: k = " + std::to_string(k) + " exceeds point count " + std::to_string(n));
  }
  NeighborWindows w;
  w.max_size = k;
  if (n == 0 || k == 0) {
    w.offsets.assign(queries.size() + 1, 0);
    return w;
  }

  // Cell edge sized so that a cell holds roughly k points on average; flat
  // dimensions are ignored when estimating the occupied volume.
  Vec3 lo = coords[0], hi = coords[0];
  for (const Vec3& p : coords) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  double max_extent = 0.0;
  for (int a = 0; a < 3; ++a) max_extent = std::max(max_extent, hi[a] - lo[a]);
  double volume = 1.0;
  int dims = 0;
  for (int a = 0; a < 3; ++a) {
    const double e = hi[a] - lo[a];
    if (e > max_extent * 1e-3) {
      volume *= e;
      ++dims;
    }
  }
  double cell = 1.0;
  if (dims > 0) {
    cell = std::pow(volume * static_cast<double>(k) / static_cast<double>(n), 1.0 / dims);
  }
  if (!(cell > 0) || !std::isfinite(cell)) cell = 1.0;
  const VoxelGrid grid(coords, cell);

  std::vector<std::pair<double, std::size_t>> cand;
  std::vector<std::pair<double, std::size_t>> scratch;
  for (std::size_t q : queries) {
    if (q >= n) {
      throw InputError("query index " + std::to_string(q) + " out of range for " +
                       std::to_string(n) + " points");
    }
    const Vec3& c = coords[q];
    const CellKey base = grid.key_of(c);
    cand.clear();
    std::size_t visited = 0;
    for (std::int64_t ring = 0;; ++ring) {
      visit_ring(grid, base, ring, [&](const std::vector<std::size_t>& cellpts) {
        for (std::size_t j : cellpts) cand.emplace_back(squared_distance(coords[j], c), j);
        visited += cellpts.size();
        return true;
      });
      if (visited == n) break;
      if (cand.size() >= k) {
        // Unvisited points are at least ring * cell away.
        scratch = cand;
        std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         scratch.end());
        const double bound = static_cast<double>(ring) * cell;
        if (scratch[k - 1].first < bound * bound) break;
      }
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
    const std::size_t begin = w.indices.size();
    for (std::size_t i = 0; i < k; ++i) w.indices.push_back(cand[i].second);
    std::sort(w.indices.begin() + static_cast<std::ptrdiff_t>(begin), w.indices.end());
    w.offsets.push_back(w.indices.size());
  }
  return w;
}

}  // namespace pattformer::pc
