#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "pattformer/model/config.hpp"
#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::eval {

struct BenchRow {
  model::Search method = model::Search::kVoxelQuery;
  std::size_t n = 0;
  std::size_t m = 0;
  double median_us = 0.0;
  bool correct = false;
};

struct BenchConfig {
  std::vector<std::size_t> sizes{10000, 100000};
  std::vector<model::Search> methods{model::Search::kVoxelQuery, model::Search::kKnn};
  std::size_t window = 32;
  double radius = 0.5;
  std::size_t reps = 3;
  std::size_t checked_queries = 200;  // sampled for the brute-force check
  double density = 20.0;              // points per m^3 of the sampled cube
};

/// Uniform points in a cube whose volume gives `density`.
std::vector<pc::Vec3> bench_cloud(std::size_t n, double density, std::mt19937_64& rng);

/// Times a full-cloud neighbor search (grid construction included) per
/// method and size, reporting the median over `reps` runs. `correct` checks
/// sampled windows against brute force: voxel-query windows must hold only
/// in-radius points and equal the in-radius set whenever it fits in M; kNN
/// windows must equal the exact k nearest, and must contain the in-radius
/// set whenever it fits in M.
std::vector<BenchRow> bench_search(const BenchConfig& cfg, std::mt19937_64& rng);

/// Header `method,N,M,median_us,correct`.
std::string bench_csv(std::span<const BenchRow> rows);

}  // namespace pattformer::eval
