#include "pattformer/pc/pooling.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "pattformer/ad/ops.hpp"
#include "pattformer/common/errors.hpp"
#include "pattformer/pc/voxel_grid.hpp"

namespace pattformer::pc {

std::pair<std::vector<Vec3>, PoolMap> pool_coords(std::span<const Vec3> coords, double cell_size) {
  const VoxelGrid grid(coords, cell_size);
  const std::vector<CellKey> keys = grid.sorted_keys();
  PoolMap map;
  map.coarse_count = keys.size();
  map.assignment.assign(coords.size(), 0);
  std::vector<Vec3> coarse(keys.size(), Vec3{0, 0, 0});
  for (std::size_t c = 0; c < keys.size(); ++c) {
    const auto& members = *grid.find(keys[c]);
    for (std::size_t i : members) {
      map.assignment[i] = c;
      for (int a = 0; a < 3; ++a) coarse[c][a] += coords[i][a];
    }
    const double inv = 1.0 / static_cast<double>(members.size());
    for (int a = 0; a < 3; ++a) coarse[c][a] *= inv;
  }
  return {std::move(coarse), std::move(map)};
}

std::pair<PointCloud, PoolMap> grid_pool(const PointCloud& cloud, double cell_size) {
  cloud.validate();
  auto [coarse, map] = pool_coords(cloud.coords, cell_size);
  PointCloud out;
  out.coords = std::move(coarse);
  if (cloud.channels() > 0 && !cloud.empty()) {
    ad::NoGradGuard guard;
    out.feats = pool_features(ad::constant(cloud.feats), map).value();
  } else {
    out.feats = ad::Tensor::matrix(map.coarse_count, cloud.channels());
  }
  return {std::move(out), std::move(map)};
}

ad::Var pool_features(const ad::Var& feats, const PoolMap& map) {
  return ad::scatter_max(feats, map.assignment, map.coarse_count);
}

ad::Var grid_unpool(const ad::Var& coarse_feats, const PoolMap& map) {
  for (std::size_t i = 0; i < map.assignment.size(); ++i) {
    if (map.assignment[i] >= map.coarse_count || map.assignment[i] >= coarse_feats.rows()) {
      throw InputError("grid_unpool: fine point " + std::to_string(i) + " maps to coarse index " +
                       std::to_string(map.assignment[i]) + " but only " +
                       std::to_string(coarse_feats.rows()) + " coarse rows exist");
    }
  }
  return ad::gather_rows(coarse_feats, map.assignment);
}

}  // namespace pattformer::pc
