#pragma once

#include <span>
#include <vector>

#include "pattformer/pc/voxel_grid.hpp"

namespace pattformer::pc {

/// Per-query neighbor lists in CSR layout. Each window is sorted by point
/// index so that downstream reductions see a canonical order.
struct NeighborWindows {
  std::vector<std::size_t> offsets{0};  // query_count + 1 entries
  std::vector<std::size_t> indices;
  std::size_t max_size = 0;
  double radius = 0.0;  // 0 for kNN windows

  std::size_t query_count() const { return offsets.size() - 1; }
  std::span<const std::size_t> window(std::size_t q) const {
    return {indices.data() + offsets[q], offsets[q + 1] - offsets[q]};
  }
  /// Owner query of every flattened neighbor entry.
  std::vector<std::size_t> owners() const;
};

/// Ball query as a breadth-first sweep over voxel cells. Cells are visited in
/// increasing Chebyshev ring order around the query's cell (lexicographic
/// within a ring, ascending point index within a cell) and in-radius points
/// are collected until max_neighbors is reached. The query point itself is
/// collected first. With cell_size == radius only rings 0 and 1 are visited.
NeighborWindows voxel_query(const VoxelGrid& grid, std::span<const Vec3> coords,
                            std::span<const std::size_t> queries, double radius,
                            std::size_t max_neighbors);

/// Same sweep around arbitrary positions (deformable sampling points). A
/// position with no point in range gets an empty window.
NeighborWindows voxel_query_at(const VoxelGrid& grid, std::span<const Vec3> coords,
                               std::span<const Vec3> centers, double radius,
                               std::size_t max_neighbors);

/// Exactly k nearest points per query (ties to the lower index). Exact; uses
/// a voxel grid sweep with a ring-distance stopping bound.
NeighborWindows knn_query(std::span<const Vec3> coords, std::span<const std::size_t> queries,
                          std::size_t k);

/// Convenience: every point of the cloud as a query.
std::vector<std::size_t> all_indices(std::size_t n);

}  // namespace pattformer::pc
