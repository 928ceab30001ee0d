#include "pattformer/pc/voxel_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::pc {

VoxelGrid::VoxelGrid(std::span<const Vec3> coords, double cell_size)
    : cell_size_(cell_size), point_count_(coords.size()) {
  if (!(cell_size > 0) || !std::isfinite(cell_size)) {
    throw InputError("voxel cell size must be positive, got " + std::to_string(cell_size));
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (double v : coords[i]) {
      if (!std::isfinite(v)) {
        throw InputError("point " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
    cells_[key_of(coords[i])].push_back(i);  // ascending by construction
  }
}

CellKey VoxelGrid::key_of(const Vec3& p) const {
  return {static_cast<std::int64_t>(std::floor(p[0] / cell_size_)),
          static_cast<std::int64_t>(std::floor(p[1] / cell_size_)),
          static_cast<std::int64_t>(std::floor(p[2] / cell_size_))};
}

const std::vector<std::size_t>* VoxelGrid::find(const CellKey& key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<CellKey> VoxelGrid::sorted_keys() const {
  std::vector<CellKey> keys;
  keys.reserve(cells_.size());
  for (const auto& [k, v] : cells_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

VoxelGrid voxelize(const PointCloud& cloud, double cell_size) {
  return VoxelGrid(cloud.coords, cell_size);
}

}  // namespace pattformer::pc
