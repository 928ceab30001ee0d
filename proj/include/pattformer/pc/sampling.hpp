#pragma once

#include <span>
#include <vector>

#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::pc {

/// Greedy farthest point sampling: starts at `start`, then repeatedly takes
/// the point maximizing the distance to the selected set (lowest index on
/// ties). Output for n is a prefix of the output for n + 1.
std::vector<std::size_t> fps(std::span<const Vec3> coords, std::size_t n, std::size_t start = 0);

}  // namespace pattformer::pc
