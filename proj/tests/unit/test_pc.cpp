#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "pattformer/ad/ops.hpp"
#include "pattformer/common/errors.hpp"
#include "pattformer/pc/box3d.hpp"
#include "pattformer/pc/neighbors.hpp"
#include "pattformer/pc/pooling.hpp"
#include "pattformer/pc/sampling.hpp"
#include "pattformer/pc/voxel_grid.hpp"
#include "test_util.hpp"

using namespace pattformer;
using namespace pattformer::pc;
using pattformer::testing::random_points;

namespace {

// Exhaustive O(N) radius scan.
std::set<std::size_t> radius_oracle(std::span<const Vec3> pts, const Vec3& c, double r) {
  std::set<std::size_t> out;
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (squared_distance(pts[j], c) <= r * r) out.insert(j);
  }
  return out;
}

// Full distance sort with index tie-break.
std::set<std::size_t> knn_oracle(std::span<const Vec3> pts, std::size_t q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t j = 0; j < pts.size(); ++j) d.emplace_back(squared_distance(pts[j], pts[q]), j);
  std::sort(d.begin(), d.end());
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.insert(d[i].second);
  return out;
}

// Brute-force greedy max-min selection.
std::vector<std::size_t> fps_oracle(std::span<const Vec3> pts, std::size_t n, std::size_t start) {
  std::vector<std::size_t> sel{start};
  while (sel.size() < n) {
    double best = -1;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(sel.begin(), sel.end(), i) != sel.end()) continue;
      double mind = std::numeric_limits<double>::infinity();
      for (std::size_t s : sel) mind = std::min(mind, std::sqrt(squared_distance(pts[i], pts[s])));
      if (mind > best) {
        best = mind;
        arg = i;
      }
    }
    sel.push_back(arg);
  }
  return sel;
}

std::set<std::size_t> as_set(std::span<const std::size_t> s) { return {s.begin(), s.end()}; }

std::vector<Vec3> line_points(int n) {
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.push_back({static_cast<double>(i), 0, 0});
  return pts;
}

}  // namespace

TEST_CASE("voxelize floors coordinates") {
  SUBCASE("single point") {
    const VoxelGrid g = voxelize(make_cloud({{0.3, 0.3, 0.3}}), 1.0);
    REQUIRE(g.cell_count() == 1);
    REQUIRE(g.find({0, 0, 0}) != nullptr);
    CHECK(*g.find({0, 0, 0}) == std::vector<std::size_t>{0});
  }
  SUBCASE("two cells") {
    const VoxelGrid g = voxelize(make_cloud({{0.2, 0, 0}, {0.8, 0, 0}}), 0.5);
    CHECK(g.cell_count() == 2);
    CHECK(g.find({0, 0, 0}) != nullptr);
    CHECK(g.find({1, 0, 0}) != nullptr);
  }
  SUBCASE("negative coordinate") {
    const VoxelGrid g = voxelize(make_cloud({{-0.1, 0, 0}}), 1.0);
    CHECK(g.find({-1, 0, 0}) != nullptr);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(voxelize(make_cloud({{NAN, 0, 0}}), 1.0), InputError);
    CHECK_THROWS_AS(voxelize(make_cloud({{0, 0, 0}}), 0.0), InputError);
  }
}

TEST_CASE("voxel grid invariants on random clouds") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto pts = random_points(200, rng, 5.0);
    const VoxelGrid g(pts, 0.7);
    std::vector<int> seen(pts.size(), 0);
    for (const auto& key : g.sorted_keys()) {
      const auto* cell = g.find(key);
      REQUIRE(cell);
      CHECK(!cell->empty());
      CHECK(std::is_sorted(cell->begin(), cell->end()));
      for (std::size_t i : *cell) {
        ++seen[i];
        CHECK(g.key_of(pts[i]) == key);
      }
    }
    for (int s : seen) CHECK(s == 1);
  }
}

TEST_CASE("voxel query") {
  SUBCASE("isolated point returns itself") {
    const std::vector<Vec3> pts{{0, 0, 0}, {10, 10, 10}};
    const VoxelGrid g(pts, 0.5);
    const auto w = voxel_query(g, pts, all_indices(2), 0.5, 8);
    CHECK(as_set(w.window(0)) == std::set<std::size_t>{0});
    CHECK(as_set(w.window(1)) == std::set<std::size_t>{1});
  }
  SUBCASE("radius covering all equals exhaustive search") {
    std::mt19937_64 rng(5);
    const auto pts = random_points(10, rng, 1.0);
    const double r = 4.0;
    const VoxelGrid g(pts, r);
    const auto w = voxel_query(g, pts, all_indices(10), r, 10);
    for (std::size_t q = 0; q < 10; ++q) CHECK(as_set(w.window(q)) == radius_oracle(pts, pts[q], r));
  }
  SUBCASE("cap of M=4 on a 9-point cluster") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 9; ++i) pts.push_back({0.01 * i, 0.02 * (i % 3), 0.0});
    const double r = 0.5;
    const VoxelGrid g(pts, r);
    const auto w = voxel_query(g, pts, all_indices(9), r, 4);
    for (std::size_t q = 0; q < 9; ++q) {
      const auto win = as_set(w.window(q));
      CHECK(win.size() == 4);
      CHECK(win.count(q) == 1);
      const auto all = radius_oracle(pts, pts[q], r);
      CHECK(std::includes(all.begin(), all.end(), win.begin(), win.end()));
    }
  }
  SUBCASE("errors and empty cloud") {
    const std::vector<Vec3> none;
    const VoxelGrid g(none, 1.0);
    const auto w = voxel_query(g, none, {}, 1.0, 4);
    CHECK(w.query_count() == 0);
    const std::vector<Vec3> pts{{0, 0, 0}};
    const VoxelGrid g1(pts, 1.0);
    const std::vector<std::size_t> bad{3};
    CHECK_THROWS_AS(voxel_query(g1, pts, bad, 1.0, 4), InputError);
  }
}

TEST_CASE("voxel query property: subset of radius search, equal when not truncated") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> nd(1, 60);
  std::uniform_real_distribution<double> rd(0.2, 2.0);
  std::uniform_int_distribution<int> md(1, 24);
  for (int t = 0; t < 300; ++t) {
    const auto pts = random_points(static_cast<std::size_t>(nd(rng)), rng, 2.0);
    const double r = rd(rng);
    const std::size_t m = static_cast<std::size_t>(md(rng));
    const VoxelGrid g(pts, r);
    const auto w = voxel_query(g, pts, all_indices(pts.size()), r, m);
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const auto win = as_set(w.window(q));
      const auto all = radius_oracle(pts, pts[q], r);
      CHECK(win.size() <= m);
      CHECK(win.count(q) == 1);
      CHECK(std::includes(all.begin(), all.end(), win.begin(), win.end()));
      if (all.size() <= m) CHECK(win == all);
    }
  }
}

TEST_CASE("voxel query is a prefix in M and deterministic") {
  std::mt19937_64 rng(3);
  const auto pts = random_points(400, rng, 3.0);
  const VoxelGrid g(pts, 1.0);
  const auto w8 = voxel_query(g, pts, all_indices(pts.size()), 1.0, 8);
  const auto w16 = voxel_query(g, pts, all_indices(pts.size()), 1.0, 16);
  const auto w16b = voxel_query(g, pts, all_indices(pts.size()), 1.0, 16);
  CHECK(w16.indices == w16b.indices);
  for (std::size_t q = 0; q < pts.size(); ++q) {
    const auto a = as_set(w8.window(q)), b = as_set(w16.window(q));
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
}

TEST_CASE("voxel query at arbitrary centers") {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {5, 5, 5}};
  const VoxelGrid g(pts, 0.6);
  const std::vector<Vec3> centers{{0.5, 0, 0}, {20, 20, 20}};
  const auto w = voxel_query_at(g, pts, centers, 0.6, 4);
  CHECK(as_set(w.window(0)) == std::set<std::size_t>{0, 1});
  CHECK(w.window(1).empty());
}

TEST_CASE("knn query") {
  SUBCASE("k = N returns all points") {
    std::mt19937_64 rng(8);
    const auto pts = random_points(12, rng, 1.0);
    const auto w = knn_query(pts, all_indices(12), 12);
    for (std::size_t q = 0; q < 12; ++q) CHECK(w.window(q).size() == 12);
  }
  SUBCASE("collinear") {
    const auto pts = line_points(4);
    const std::vector<std::size_t> q{0};
    CHECK(as_set(knn_query(pts, q, 2).window(0)) == std::set<std::size_t>{0, 1});
  }
  SUBCASE("ties go to the lower index") {
    const auto pts = line_points(3);
    const std::vector<std::size_t> q{1};
    CHECK(as_set(knn_query(pts, q, 2).window(0)) == std::set<std::size_t>{0, 1});
  }
  SUBCASE("matches full sort on random clouds") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 20; ++t) {
      const auto pts = random_points(50, rng, 2.0);
      const auto w = knn_query(pts, all_indices(50), 5);
      for (std::size_t q = 0; q < 50; ++q) CHECK(as_set(w.window(q)) == knn_oracle(pts, q, 5));
    }
  }
  SUBCASE("flat and lattice clouds with many ties") {
    std::vector<Vec3> pts;
    for (int x = 0; x < 10; ++x)
      for (int y = 0; y < 10; ++y) pts.push_back({double(x), double(y), 0.0});
    const auto w = knn_query(pts, all_indices(pts.size()), 7);
    for (std::size_t q = 0; q < pts.size(); ++q) CHECK(as_set(w.window(q)) == knn_oracle(pts, q, 7));
  }
  SUBCASE("k > N") {
    const auto pts = line_points(3);
    CHECK_THROWS_AS(knn_query(pts, all_indices(3), 4), InputError);
  }
}

TEST_CASE("farthest point sampling") {
  const auto pts = line_points(11);
  SUBCASE("n = N is a permutation") {
    auto s = fps(pts, 11);
    std::sort(s.begin(), s.end());
    CHECK(s == all_indices(11));
  }
  SUBCASE("farthest endpoint forced") { CHECK(fps(pts, 2, 0) == std::vector<std::size_t>{0, 10}); }
  SUBCASE("three points") {
    CHECK(fps(pts, 3, 0) == std::vector<std::size_t>{0, 10, 5});
    CHECK(fps(pts, 3, 0) == fps_oracle(pts, 3, 0));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fps(pts, 12), InputError);
    CHECK_THROWS_AS(fps(pts, 0), InputError);
  }
  SUBCASE("prefix property and oracle agreement") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
      const auto p = random_points(40, rng, 3.0);
      const auto a = fps(p, 10, t % 40);
      const auto b = fps(p, 11, t % 40);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
      CHECK(b == fps_oracle(p, 11, t % 40));
    }
  }
}

TEST_CASE("grid pooling") {
  SUBCASE("single point") {
    PointCloud c = make_cloud({{0.2, 0.3, 0.4}}, 2);
    c.feats(0, 0) = 7;
    const auto [out, map] = grid_pool(c, 1.0);
    CHECK(out.coords == c.coords);
    CHECK(out.feats == c.feats);
    CHECK(map.assignment == std::vector<std::size_t>{0});
  }
  SUBCASE("two points in one cell") {
    PointCloud c = make_cloud({{0, 0, 0}, {1, 0, 0}}, 2);
    c.feats = ad::Tensor({2, 2}, {1, 3, 5, 2});
    const auto [out, map] = grid_pool(c, 2.0);
    REQUIRE(out.size() == 1);
    CHECK(out.feats == ad::Tensor({1, 2}, {5, 3}));
    CHECK(out.coords[0] == Vec3{0.5, 0, 0});
  }
  SUBCASE("lexicographic ordering of coarse points") {
    PointCloud c = make_cloud({{1.5, 0, 0}, {0.5, 0, 0}, {0.5, 1.5, 0}}, 1);
    const auto [out, map] = grid_pool(c, 1.0);
    CHECK(map.assignment == std::vector<std::size_t>{2, 0, 1});
  }
  SUBCASE("permutation invariance and count property") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
      auto pts = random_points(80, rng, 3.0);
      PointCloud c = make_cloud(pts, 3);
      c.feats = pattformer::testing::random_tensor(80, 3, rng);
      std::vector<std::size_t> perm = all_indices(80);
      std::shuffle(perm.begin(), perm.end(), rng);
      PointCloud p = make_cloud({}, 3);
      p.feats = ad::Tensor::matrix(80, 3);
      for (std::size_t i = 0; i < 80; ++i) {
        p.coords.push_back(pts[perm[i]]);
        for (int j = 0; j < 3; ++j) p.feats(i, j) = c.feats(perm[i], j);
      }
      const auto [a, ma] = grid_pool(c, 1.0);
      const auto [b, mb] = grid_pool(p, 1.0);
      CHECK(ma.coarse_count == voxelize(c, 1.0).cell_count());
      REQUIRE(a.size() == b.size());
      CHECK(a.feats == b.feats);
      for (std::size_t i = 0; i < a.size(); ++i)
        for (int k = 0; k < 3; ++k) CHECK(a.coords[i][k] == doctest::Approx(b.coords[i][k]).epsilon(1e-12));
    }
  }
  SUBCASE("deterministic") {
    std::mt19937_64 rng(7);
    PointCloud c = make_cloud(random_points(100, rng, 2.0), 2);
    c.feats = pattformer::testing::random_tensor(100, 2, rng);
    const auto [a, ma] = grid_pool(c, 0.5);
    const auto [b, mb] = grid_pool(c, 0.5);
    CHECK(a.coords == b.coords);
    CHECK(a.feats == b.feats);
    CHECK(ma.assignment == mb.assignment);
  }
}

TEST_CASE("grid unpooling") {
  const ad::Tensor coarse({2, 2}, {1, 2, 3, 4});
  SUBCASE("identity map") {
    const PoolMap id{{0, 1}, 2};
    CHECK(grid_unpool(ad::constant(coarse), id).value() == coarse);
  }
  SUBCASE("broadcast") {
    const PoolMap m{{0, 0, 1}, 2};
    CHECK(grid_unpool(ad::constant(coarse), m).value() == ad::Tensor({3, 2}, {1, 2, 1, 2, 3, 4}));
  }
  SUBCASE("out of range") {
    const PoolMap m{{0, 2}, 3};
    CHECK_THROWS_AS(grid_unpool(ad::constant(coarse), m), InputError);
  }
  SUBCASE("pool then unpool of per-cell constants is identity") {
    std::mt19937_64 rng(9);
    const auto pts = random_points(60, rng, 2.0);
    auto [coarse_pts, map] = pool_coords(pts, 1.0);
    ad::Tensor f = ad::Tensor::matrix(60, 2);
    for (std::size_t i = 0; i < 60; ++i) {
      f(i, 0) = static_cast<double>(map.assignment[i]);
      f(i, 1) = -2.0 * static_cast<double>(map.assignment[i]);
    }
    const auto up = grid_unpool(pool_features(ad::constant(f), map), map);
    CHECK(up.value() == f);
  }
}

TEST_CASE("box membership and yaw normalization") {
  Box3D b;
  b.center = {1, 2, 0.5};
  b.size = {4, 2, 1};
  b.yaw = std::numbers::pi / 2;
  CHECK(box_contains(b, {1, 2, 0.5}));
  CHECK(box_contains(b, {1, 3.9, 0.5}));
  CHECK_FALSE(box_contains(b, {2.9, 2, 0.5}));
  CHECK(normalize_yaw(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_yaw(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_yaw(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
}

TEST_CASE("crop keeps points inside the range") {
  PointCloud c = make_cloud({{0, 0, 0}, {60, 0, 0}, {-10, -10, -6}}, 1);
  c.labels = std::vector<std::uint32_t>{1, 2, 3};
  std::vector<std::size_t> kept;
  const auto out = crop(c, {-50, -50, -5}, {50, 50, 3}, &kept);
  CHECK(out.size() == 1);
  CHECK(kept == std::vector<std::size_t>{0});
  CHECK((*out.labels)[0] == 1);
}
