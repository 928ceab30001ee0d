#pragma once

#include <span>
#include <utility>
#include <vector>

#include "pattformer/ad/var.hpp"
#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::pc {

/// Fine point -> coarse point assignment produced by grid pooling.
struct PoolMap {
  std::vector<std::size_t> assignment;
  std::size_t coarse_count = 0;
};

/// One coarse point per non-empty cell, ordered by lexicographic cell key.
/// Coarse coordinates are the mean of the member coordinates.
std::pair<std::vector<Vec3>, PoolMap> pool_coords(std::span<const Vec3> coords, double cell_size);

/// Grid pooling of a whole cloud: mean coordinates, columnwise max features.
/// Labels are dropped.
std::pair<PointCloud, PoolMap> grid_pool(const PointCloud& cloud, double cell_size);

/// Differentiable max-pooling of feature rows under a pool map.
ad::Var pool_features(const ad::Var& feats, const PoolMap& map);

/// Broadcasts each coarse row back to its fine points.
ad::Var grid_unpool(const ad::Var& coarse_feats, const PoolMap& map);

}  // namespace pattformer::pc
