#pragma once

#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pattformer/model/config.hpp"
#include "pattformer/pc/neighbors.hpp"

namespace pattformer::eval {

struct WindowConfig {
  model::Search search = model::Search::kVoxelQuery;
  std::size_t window = 32;
  double radius = 0.5;  // voxel query only
};

/// Full-resolution neighbor windows of every point.
pc::NeighborWindows build_windows(std::span<const pc::Vec3> coords, const WindowConfig& cfg);

struct ConnectivityReport {
  std::vector<std::size_t> samples;
  std::vector<std::optional<std::size_t>> hops;  // empty if some point is unreachable
  std::size_t unreachable = 0;
  std::size_t min_hops = 0, max_hops = 0;  // over reachable samples
  double mean_hops = 0.0;
};

/// Hops for one point's feature to reach every point when point j reads from
/// the points in window(j). Empty if the graph does not connect the source
/// to everything.
std::optional<std::size_t> coverage_hops(const pc::NeighborWindows& windows, std::size_t source);

/// Coverage hops from `samples` distinct random points (all if fewer).
ConnectivityReport connectivity(const pc::NeighborWindows& windows, std::size_t samples,
                                std::mt19937_64& rng);
ConnectivityReport connectivity(std::span<const pc::Vec3> coords, const WindowConfig& cfg,
                                std::size_t samples, std::mt19937_64& rng);

/// `point,hops` rows (empty hops when unreachable) then a summary line.
std::string connectivity_csv(const ConnectivityReport& r);

}  // namespace pattformer::eval
