#include "pattformer/eval/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pattformer/common/errors.hpp"
#include "pattformer/eval/connectivity.hpp"

namespace pattformer::eval {

std::vector<pc::Vec3> bench_cloud(std::size_t n, double density, std::mt19937_64& rng) {
  if (!(density > 0)) throw InputError("bench density must be positive");
  const double side = std::cbrt(static_cast<double>(n) / density);
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<pc::Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

namespace {

// Indices sorted by (distance, index) from point q.
std::vector<std::size_t> by_distance(std::span<const pc::Vec3> coords, std::size_t q) {
  std::vector<std::size_t> order(coords.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> d(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) d[i] = pc::squared_distance(coords[q], coords[i]);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return d[a] != d[b] ? d[a] < d[b] : a < b;
  });
  return order;
}

bool check_window(std::span<const pc::Vec3> coords, const pc::NeighborWindows& w, std::size_t q,
                  const WindowConfig& cfg) {
  const auto order = by_distance(coords, q);
  const double r2 = cfg.radius * cfg.radius;
  std::vector<std::size_t> in_radius;
  for (std::size_t i : order) {
    if (pc::squared_distance(coords[q], coords[i]) > r2) break;
    in_radius.push_back(i);
  }
  std::sort(in_radius.begin(), in_radius.end());
  std::vector<std::size_t> got(w.window(q).begin(), w.window(q).end());
  std::sort(got.begin(), got.end());
  const bool fits = in_radius.size() <= cfg.window;
  if (cfg.search == model::Search::kVoxelQuery) {
    if (!std::includes(in_radius.begin(), in_radius.end(), got.begin(), got.end())) return false;
    if (fits) return got == in_radius;
    return got.size() == cfg.window;
  }
  const std::size_t k = std::min(cfg.window, coords.size());
  std::vector<std::size_t> nearest(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(nearest.begin(), nearest.end());
  if (got != nearest) return false;
  return !fits || std::includes(got.begin(), got.end(), in_radius.begin(), in_radius.end());
}

}  // namespace

std::vector<BenchRow> bench_search(const BenchConfig& cfg, std::mt19937_64& rng) {
  if (cfg.reps == 0) throw InputError("bench needs at least one repetition");
  std::vector<BenchRow> rows;
  for (std::size_t n : cfg.sizes) {
    if (n == 0) throw InputError("bench sizes must be positive");
    const auto coords = bench_cloud(n, cfg.density, rng);
    std::vector<std::size_t> probe(n);
    std::iota(probe.begin(), probe.end(), std::size_t{0});
    std::vector<std::size_t> sampled;
    std::sample(probe.begin(), probe.end(), std::back_inserter(sampled), std::min(cfg.checked_queries, n), rng);
    for (model::Search method : cfg.methods) {
      const WindowConfig wc{method, cfg.window, cfg.radius};
      std::vector<double> times;
      pc::NeighborWindows windows;
      for (std::size_t r = 0; r < cfg.reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        windows = build_windows(coords, wc);
        const auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
      }
      std::sort(times.begin(), times.end());
      const std::size_t mid = times.size() / 2;
      const double median = times.size() % 2 ? times[mid] : 0.5 * (times[mid - 1] + times[mid]);
      bool ok = windows.query_count() == n;
      for (std::size_t q : sampled) ok = ok && check_window(coords, windows, q, wc);
      rows.push_back({method, n, cfg.window, median, ok});
    }
  }
  return rows;
}

std::string bench_csv(std::span<const BenchRow> rows) {
  std::string out = "method,N,M,median_us,correct\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.3f,%s\n", model::to_string(r.method).c_str(), r.n, r.m,
                  r.median_us, r.correct ? "true" : "false");
    out += buf;
  }
  return out;
}

}  // namespace pattformer::eval
