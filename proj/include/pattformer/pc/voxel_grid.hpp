#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::pc {

using CellKey = std::array<std::int64_t, 3>;

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = 1469598103934665603ull;
    for (std::int64_t v : k) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

/// Hash map from floor(p / cell_size) to the ascending indices of the points
/// inside that cell. Immutable after construction.
class VoxelGrid {
 public:
  VoxelGrid(std::span<const Vec3> coords, double cell_size);

  double cell_size() const { return cell_size_; }
  std::size_t point_count() const { return point_count_; }
  std::size_t cell_count() const { return cells_.size(); }

  CellKey key_of(const Vec3& p) const;
  /// Points in a cell, or nullptr for an empty cell.
  const std::vector<std::size_t>* find(const CellKey& key) const;
  /// Keys in lexicographic order.
  std::vector<CellKey> sorted_keys() const;

 private:
  double cell_size_;
  std::size_t point_count_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> cells_;
};

/// Throws InputError for cell_size <= 0 or any non-finite coordinate.
VoxelGrid voxelize(const PointCloud& cloud, double cell_size);

}  // namespace pattformer::pc
