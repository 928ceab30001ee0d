#include "pattformer/eval/connectivity.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <numeric>

#include "pattformer/common/errors.hpp"
#include "pattformer/pc/voxel_grid.hpp"

namespace pattformer::eval {

pc::NeighborWindows build_windows(std::span<const pc::Vec3> coords, const WindowConfig& cfg) {
  if (cfg.window == 0) throw InputError("window size must be positive");
  const auto all = pc::all_indices(coords.size());
  if (cfg.search == model::Search::kKnn) {
    return pc::knn_query(coords, all, std::min(cfg.window, coords.size()));
  }
  if (!(cfg.radius > 0)) throw InputError("voxel query radius must be positive");
  const pc::VoxelGrid grid(coords, cfg.radius);
  return pc::voxel_query(grid, coords, all, cfg.radius, cfg.window);
}

std::optional<std::size_t> coverage_hops(const pc::NeighborWindows& windows, std::size_t source) {
  const std::size_t n = windows.query_count();
  if (source >= n) throw InputError("connectivity: source out of range");
  // Forward edges i -> j for every i in window(j).
  std::vector<std::vector<std::size_t>> readers(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i : windows.window(j)) readers[i].push_back(j);
  }
  std::vector<std::size_t> dist(n, SIZE_MAX);
  std::deque<std::size_t> queue{source};
  dist[source] = 0;
  std::size_t reached = 1, depth = 0;
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    for (std::size_t v : readers[u]) {
      if (dist[v] != SIZE_MAX) continue;
      dist[v] = dist[u] + 1;
      depth = std::max(depth, dist[v]);
      ++reached;
      queue.push_back(v);
    }
  }
  if (reached != n) return std::nullopt;
  return depth;
}

ConnectivityReport connectivity(const pc::NeighborWindows& windows, std::size_t samples,
                                std::mt19937_64& rng) {
  const std::size_t n = windows.query_count();
  if (n < 2) throw InputError("connectivity needs at least two points");
  ConnectivityReport r;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::sample(all.begin(), all.end(), std::back_inserter(r.samples), std::min(samples, n), rng);
  std::size_t sum = 0, reachable = 0;
  r.min_hops = SIZE_MAX;
  for (std::size_t s : r.samples) {
    const auto h = coverage_hops(windows, s);
    r.hops.push_back(h);
    if (!h) {
      ++r.unreachable;
      continue;
    }
    ++reachable;
    sum += *h;
    r.min_hops = std::min(r.min_hops, *h);
    r.max_hops = std::max(r.max_hops, *h);
  }
  if (reachable == 0) r.min_hops = 0;
  r.mean_hops = reachable ? static_cast<double>(sum) / static_cast<double>(reachable) : 0.0;
  return r;
}

ConnectivityReport connectivity(std::span<const pc::Vec3> coords, const WindowConfig& cfg,
                                std::size_t samples, std::mt19937_64& rng) {
  return connectivity(build_windows(coords, cfg), samples, rng);
}

std::string connectivity_csv(const ConnectivityReport& r) {
  std::string out = "point,hops\n";
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    out += std::to_string(r.samples[i]) + "," + (r.hops[i] ? std::to_string(*r.hops[i]) : "") + "\n";
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "# samples=%zu min=%zu mean=%.6g max=%zu unreachable=%zu\n",
                r.samples.size(), r.min_hops, r.mean_hops, r.max_hops, r.unreachable);
  return out + buf;
}

}  // namespace pattformer::eval
