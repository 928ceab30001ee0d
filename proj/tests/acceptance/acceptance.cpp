// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Tolerances and sizes are fixed here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "pattformer/ad/checkpoint.hpp"
#include "pattformer/check/gradient_suite.hpp"
#include "pattformer/common/errors.hpp"
#include "pattformer/eval/bench.hpp"
#include "pattformer/eval/connectivity.hpp"
#include "pattformer/eval/evaluate.hpp"
#include "pattformer/eval/iou.hpp"
#include "pattformer/eval/metrics.hpp"
#include "pattformer/io/config.hpp"
#include "pattformer/io/formats.hpp"
#include "pattformer/io/synth.hpp"
#include "pattformer/pc/neighbors.hpp"
#include "pattformer/train/matching.hpp"
#include "pattformer/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace pattformer;

namespace {

constexpr std::uint64_t kSeed = 42;

// Criterion 1
constexpr double kGradTol = 1e-4;
constexpr double kGradBudgetSeconds = 120.0;
// Criterion 2
constexpr std::size_t kVoxelInstances = 500;
constexpr std::size_t kHungarianMatrices = 200;
constexpr std::size_t kHungarianMaxSize = 7;
constexpr std::size_t kIouPairs = 200;
constexpr std::size_t kMonteCarloSamples = 1000000;
constexpr double kIouTol = 0.005;
constexpr std::size_t kNmsSets = 200;
constexpr std::size_t kNmsBoxes = 20;
// Criterion 3
constexpr std::size_t kOverfitScenes = 8;
constexpr std::size_t kOverfitSteps = 500;
constexpr double kMinSegAccuracy = 0.95;
constexpr double kMinRecall = 0.9;
constexpr double kMatchDistance = 2.0;
constexpr double kOverfitBudgetSeconds = 600.0;
// Criterion 6
constexpr std::size_t kScanPoints = 5000;
constexpr std::size_t kHopSamples = 20;
constexpr double kScanRadius = 2.0;
// Criterion 7
constexpr double kApTol = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<pc::SceneSample> synth_scenes(const io::SynthConfig& cfg, std::uint64_t seed, std::size_t count) {
  std::vector<pc::SceneSample> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    out.push_back(io::synth_scene(cfg, rng));
  }
  return out;
}

// ---- 1: gradient suite ----

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t failed = 0, checked = 0;
  double worst = 0.0;
  std::string names;
  for (const auto& c : check::gradient_suite()) {
    const auto r = c.run(kGradTol, kSeed);
    checked += r.checked;
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed()) {
      ++failed;
      names += " " + c.name;
    }
  }
  const double secs = seconds_since(t0);
  return {failed == 0 && secs < kGradBudgetSeconds,
          fmt("%zu cases, %zu entries, max rel err %.2e, %.1f s (budget %.0f s)%s%s",
              check::gradient_suite().size(), checked, worst, secs, kGradBudgetSeconds,
              failed ? ", failed:" : "", names.c_str())};
}

// ---- 2: oracle equivalence ----

std::size_t voxel_query_mismatches(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> count(5, 250);
  std::uniform_real_distribution<double> extent(0.5, 4.0), rad(0.1, 1.0);
  const std::vector<std::size_t> windows{4, 8, 16, 32, 64};
  std::size_t bad = 0, compared = 0;
  for (std::size_t t = 0; t < kVoxelInstances; ++t) {
    const double e = extent(rng), r = rad(rng);
    const std::size_t m = windows[t % windows.size()];
    std::uniform_real_distribution<double> u(-e, e);
    std::vector<pc::Vec3> pts(count(rng));
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    const pc::VoxelGrid grid(pts, r);
    const auto win = pc::voxel_query(grid, pts, pc::all_indices(pts.size()), r, m);
    for (std::size_t q = 0; q < pts.size(); ++q) {
      std::vector<std::size_t> exhaustive;
      for (std::size_t j = 0; j < pts.size(); ++j) {
        const double dx = pts[j][0] - pts[q][0], dy = pts[j][1] - pts[q][1], dz = pts[j][2] - pts[q][2];
        if (dx * dx + dy * dy + dz * dz <= r * r) exhaustive.push_back(j);
      }
      if (exhaustive.size() > m) continue;
      ++compared;
      std::vector<std::size_t> got(win.window(q).begin(), win.window(q).end());
      std::sort(got.begin(), got.end());
      if (got != exhaustive) ++bad;
    }
  }
  return compared == 0 ? 1 : bad;
}

double brute_force_min_cost(const ad::Tensor& cost) {
  const std::size_t rows = cost.rows(), cols = cost.cols();
  const bool transpose = rows > cols;
  const std::size_t small = transpose ? cols : rows, large = transpose ? rows : cols;
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < small; ++i) s += transpose ? cost(perm[i], i) : cost(i, perm[i]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

std::size_t hungarian_mismatches(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(1, kHungarianMaxSize);
  std::uniform_int_distribution<int> integer(0, 20);
  std::uniform_real_distribution<double> real(0.0, 10.0);
  std::size_t bad = 0;
  for (std::size_t t = 0; t < kHungarianMatrices; ++t) {
    // Even instances use small integers (many ties, exact sums); odd ones
    // use reals, compared to the last bit after summing in row order.
    const bool integral = t % 2 == 0;
    ad::Tensor c = ad::Tensor::matrix(dim(rng), dim(rng));
    for (std::size_t i = 0; i < c.rows(); ++i)
      for (std::size_t j = 0; j < c.cols(); ++j) c(i, j) = integral ? integer(rng) : real(rng);
    const auto a = train::hungarian_match(c);
    std::set<std::size_t> rows, cols;
    for (const auto& [r, k] : a) {
      rows.insert(r);
      cols.insert(k);
    }
    const bool one_to_one = a.size() == std::min(c.rows(), c.cols()) && rows.size() == a.size() &&
                            cols.size() == a.size();
    double got = 0.0;
    for (const auto& [r, k] : a) got += c(r, k);
    const double want = brute_force_min_cost(c);
    const bool equal = integral ? got == want : std::abs(got - want) <= 1e-12 * std::max(1.0, want);
    if (!one_to_one || !equal) ++bad;
  }
  return bad;
}

bool inside_bev(const pc::Box3D& b, double x, double y) {
  const double dx = x - b.center[0], dy = y - b.center[1];
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
  return std::abs(lx) <= 0.5 * b.size[0] && std::abs(ly) <= 0.5 * b.size[1];
}

// IoU with the intersection estimated by uniform samples inside box a.
double monte_carlo_iou(const pc::Box3D& a, const pc::Box3D& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-0.5 * a.size[0], 0.5 * a.size[0]), uy(-0.5 * a.size[1], 0.5 * a.size[1]);
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < kMonteCarloSamples; ++i) {
    const double lx = ux(rng), ly = uy(rng);
    hits += inside_bev(b, a.center[0] + c * lx - s * ly, a.center[1] + s * lx + c * ly);
  }
  const double area_a = a.size[0] * a.size[1], area_b = b.size[0] * b.size[1];
  const double inter = area_a * static_cast<double>(hits) / static_cast<double>(kMonteCarloSamples);
  return inter / (area_a + area_b - inter);
}

pc::Box3D random_box(std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> pos(-spread, spread), dim(0.5, 4.0), yaw(-M_PI, M_PI), score(0.0, 1.0);
  pc::Box3D b;
  b.center = {pos(rng), pos(rng), 0.0};
  b.size = {dim(rng), dim(rng), 1.5};
  b.yaw = yaw(rng);
  b.score = score(rng);
  return b;
}

double iou_worst_error(std::mt19937_64& rng) {
  double worst = 0.0;
  for (std::size_t t = 0; t < kIouPairs; ++t) {
    const pc::Box3D a = random_box(rng, 1.5), b = random_box(rng, 1.5);
    worst = std::max(worst, std::abs(eval::bev_rotated_iou(a, b) - monte_carlo_iou(a, b, rng)));
  }
  return worst;
}

std::vector<std::size_t> naive_nms(const std::vector<pc::Box3D>& boxes, double iou_thr, double score_thr) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    if (boxes[i].score >= score_thr) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return boxes[i].score > boxes[j].score; });
  std::vector<bool> removed(boxes.size(), false);
  std::vector<std::size_t> keep;
  for (std::size_t a = 0; a < order.size(); ++a) {
    if (removed[order[a]]) continue;
    keep.push_back(order[a]);
    for (std::size_t b = a + 1; b < order.size(); ++b)
      if (eval::bev_rotated_iou(boxes[order[a]], boxes[order[b]]) > iou_thr) removed[order[b]] = true;
  }
  return keep;
}

std::size_t nms_mismatches(std::mt19937_64& rng) {
  std::size_t bad = 0;
  for (std::size_t t = 0; t < kNmsSets; ++t) {
    std::vector<pc::Box3D> boxes(kNmsBoxes);
    for (auto& b : boxes) b = random_box(rng, 6.0);
    if (eval::nms_indices(boxes, 0.4, 0.2) != naive_nms(boxes, 0.4, 0.2)) ++bad;
  }
  return bad;
}

Outcome oracles() {
  std::mt19937_64 rng(kSeed);
  const std::size_t vq = voxel_query_mismatches(rng);
  const std::size_t hung = hungarian_mismatches(rng);
  const double iou = iou_worst_error(rng);
  const std::size_t nms = nms_mismatches(rng);
  return {vq == 0 && hung == 0 && iou <= kIouTol && nms == 0,
          fmt("voxel query %zu/%zu instances mismatched; hungarian %zu/%zu; IoU worst |err| %.4f (tol %.3f) "
              "over %zu pairs; NMS %zu/%zu",
              vq, kVoxelInstances, hung, kHungarianMatrices, iou, kIouTol, kIouPairs, nms, kNmsSets)};
}

// ---- 3 and 4: overfit and multi-task mechanics ----

const char* const kOverfitConfig = R"(
stages = 3
width = 16
heads = 2
queries = 12
lr = 0.005
epochs = 500
max_steps = 500
augment = false
seed = 42
synth_extent = 8
synth_min_objects = 5
synth_max_objects = 6
synth_object_density = 10
synth_min_walls = 2
synth_max_walls = 2
)";

struct OverfitRun {
  train::TrainResult result;
  double seconds = 0.0;
  double accuracy = 0.0;
  double recall = 0.0;
  std::size_t matched = 0, gt = 0;
  std::vector<double> final_params;
};

OverfitRun overfit_run(const io::Config& cfg, const std::vector<pc::SceneSample>& scenes) {
  OverfitRun run;
  model::PAttFormer m(cfg.model, cfg.train.seed);
  const auto t0 = std::chrono::steady_clock::now();
  run.result = train::train_loop(m, scenes, cfg.train);
  run.seconds = seconds_since(t0);
  for (const auto& [name, v] : m.params().entries())
    for (double x : v.value().data()) run.final_params.push_back(x);

  std::uint64_t correct = 0, total = 0;
  std::vector<std::vector<pc::Box3D>> preds, gts;
  for (const auto& s : scenes) {
    const auto p = eval::predict(m, s.cloud, cfg.train.task);
    for (std::size_t i = 0; i < p.labels.size(); ++i) correct += p.labels[i] == (*s.cloud.labels)[i];
    total += p.labels.size();
    preds.push_back(p.boxes);
    gts.push_back(s.boxes);
    run.gt += s.boxes.size();
  }
  const eval::Matcher matcher{eval::MatchMode::kCenterDistance, kMatchDistance};
  for (std::uint32_t c = 0; c < cfg.model.num_det_classes; ++c)
    for (auto tp : eval::match_detections(preds, gts, c, matcher)) run.matched += tp;
  run.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  run.recall = run.gt ? static_cast<double>(run.matched) / static_cast<double>(run.gt) : 0.0;
  return run;
}

bool same_log(const std::vector<train::LossReport>& a, const std::vector<train::LossReport>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (train::loss_csv_row(a[i]) != train::loss_csv_row(b[i])) return false;
  }
  return true;
}

Outcome overfit(const OverfitRun& first, const OverfitRun& second) {
  const bool deterministic = same_log(first.result.log, second.result.log) && first.final_params == second.final_params;
  const bool pass = first.result.log.size() == kOverfitSteps && first.accuracy >= kMinSegAccuracy &&
                    first.recall >= kMinRecall && first.seconds < kOverfitBudgetSeconds && deterministic;
  return {pass, fmt("%zu steps on %zu scenes: seg accuracy %.4f (min %.2f), recall@%.0fm %zu/%zu = %.4f (min %.2f), "
                    "%.0f s (budget %.0f s), rerun bit-identical: %s",
                    first.result.log.size(), kOverfitScenes, first.accuracy, kMinSegAccuracy, kMatchDistance,
                    first.matched, first.gt, first.recall, kMinRecall, first.seconds, kOverfitBudgetSeconds,
                    deterministic ? "yes" : "no")};
}

double seg_loss(const train::LossReport& r) { return r.cls_s.value_or(NAN) + r.lov_s.value_or(NAN); }
double det_loss(const train::LossReport& r) {
  return r.obj_d.value_or(NAN) + r.cls_d.value_or(NAN) + r.center_d.value_or(NAN) + r.size_d.value_or(NAN) +
         r.yaw_d.value_or(NAN);
}

double mean_over(const std::vector<train::LossReport>& log, std::size_t begin, std::size_t end,
                 double (*f)(const train::LossReport&)) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += f(log[i]);
  return s / static_cast<double>(end - begin);
}

// Parameter groups that receive a non-zero gradient from one training step.
std::set<std::string> trained_groups(const io::Config& cfg, const pc::SceneSample& scene, model::Task task) {
  model::PAttFormer m(cfg.model, cfg.train.seed);
  train::TrainConfig tc = cfg.train;
  tc.task = task;
  const auto out = m.forward(scene.cloud, task, true);
  const auto terms = train::compute_losses(m, out, scene, tc);
  m.params().zero_grad();
  ad::backward(terms.total);
  std::set<std::string> groups;
  for (const auto& [name, v] : m.params().entries()) {
    if (!v.has_grad()) continue;
    for (double g : v.grad().data()) {
      if (g != 0.0) {
        groups.insert(model::PAttFormer::group_of(name));
        break;
      }
    }
  }
  return groups;
}

std::string join(const std::set<std::string>& s) {
  std::string out;
  for (const auto& x : s) out += (out.empty() ? "" : ",") + x;
  return out;
}

Outcome multitask(const io::Config& cfg, const std::vector<pc::SceneSample>& scenes, const OverfitRun& run) {
  const auto& log = run.result.log;
  if (log.size() != kOverfitSteps) return {false, "overfit run incomplete"};
  bool rho_finite = true;
  for (const auto& r : log)
    rho_finite = rho_finite && r.rho_seg && r.rho_det && std::isfinite(*r.rho_seg) && std::isfinite(*r.rho_det);
  const std::size_t n = kOverfitScenes, last = log.size() - 1;
  const double seg0 = seg_loss(log[0]), segN = seg_loss(log[last]);
  const double det0 = det_loss(log[0]), detN = det_loss(log[last]);
  const double seg_first = mean_over(log, 0, n, seg_loss), seg_last = mean_over(log, log.size() - n, log.size(), seg_loss);
  const double det_first = mean_over(log, 0, n, det_loss), det_last = mean_over(log, log.size() - n, log.size(), det_loss);
  const bool decreased = segN < seg0 && detN < det0 && seg_last < seg_first && det_last < det_first;

  const auto multi = trained_groups(cfg, scenes[0], model::Task::kMulti);
  const auto seg = trained_groups(cfg, scenes[0], model::Task::kSeg);
  const auto det = trained_groups(cfg, scenes[0], model::Task::kDet);
  const bool seg_clean = !seg.count("det") && !seg.count("fg_cls") && !seg.count("uncertainty");
  const bool det_clean = !det.count("seg_block") && !det.count("seg_cls") && !det.count("uncertainty");
  const bool fewer = seg.size() < multi.size() && det.size() < multi.size();
  return {rho_finite && decreased && seg_clean && det_clean && fewer,
          fmt("rho finite: %s (final %.3f, %.3f); seg loss %.3f -> %.3f (epoch means %.3f -> %.3f); "
              "det loss %.3f -> %.3f (epoch means %.3f -> %.3f); groups multi {%s} seg {%s} det {%s}",
              rho_finite ? "yes" : "no", log[last].rho_seg.value_or(NAN), log[last].rho_det.value_or(NAN), seg0, segN,
              seg_first, seg_last, det0, detN, det_first, det_last, join(multi).c_str(), join(seg).c_str(),
              join(det).c_str())};
}

// ---- 5: ablation knobs ----

// Clusters of exactly m points, each far tighter than the radius and far
// apart from each other: every in-radius set is one whole cluster.
pc::SceneSample cluster_scene(std::size_t m, std::mt19937_64& rng) {
  const std::vector<std::uint32_t> classes{0, 1, 2, 3, 4};
  std::uniform_real_distribution<double> jitter(-0.08, 0.08);
  std::vector<pc::Vec3> pts;
  std::vector<std::uint32_t> labels;
  pc::SceneSample s;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const pc::Vec3 center{5.0 * static_cast<double>(c), 0.0, 0.0};
    for (std::size_t i = 0; i < m; ++i) {
      pts.push_back({center[0] + jitter(rng), center[1] + jitter(rng), center[2] + jitter(rng)});
      labels.push_back(classes[c]);
    }
    if (classes[c] >= 2) {
      pc::Box3D b;
      b.center = center;
      b.size = {0.3, 0.3, 0.3};
      b.class_id = classes[c] - 2;
      s.boxes.push_back(b);
    }
  }
  s.cloud = pc::make_cloud(pts, 1);
  for (std::size_t i = 0; i < labels.size(); ++i) s.cloud.feats(i, 0) = io::class_intensity(labels[i]);
  s.cloud.labels = labels;
  return s;
}

Outcome ablation_knobs() {
  bool parsed = true;
  for (std::size_t w : {16, 32, 64}) {
    for (const char* search : {"vq", "knn"}) {
      const auto c = io::parse_config_text("window_size = " + std::to_string(w) + "\nsearch = " + search + "\n");
      parsed = parsed && c.model.window == w && model::to_string(c.model.search) == search;
    }
  }
  std::mt19937_64 rng(kSeed);
  bool windows_equal = true, losses_equal = true;
  std::string losses;
  for (std::size_t m : {16, 32, 64}) {
    const auto scene = cluster_scene(m, rng);
    const std::vector<pc::SceneSample> data{scene};
    std::vector<pc::NeighborWindows> wins;
    std::vector<train::LossReport> first;
    for (auto search : {model::Search::kVoxelQuery, model::Search::kKnn}) {
      io::Config cfg;
      cfg.model.stages = 1;
      cfg.model.width = 8;
      cfg.model.heads = 2;
      cfg.model.window = m;
      cfg.model.radius = 0.5;
      cfg.model.grid_size = 0.5;
      cfg.model.queries = 4;
      cfg.model.dec_window = 4;
      cfg.model.search = search;
      cfg.train.max_steps = 1;
      cfg.train.epochs = 1;
      cfg.train.augment = false;
      cfg.train.seed = kSeed;
      wins.push_back(model::stage_windows(scene.cloud.coords, cfg.model, 0));
      model::PAttFormer net(cfg.model, cfg.train.seed);
      first.push_back(train::train_loop(net, data, cfg.train).log.at(0));
    }
    windows_equal = windows_equal && wins[0].offsets == wins[1].offsets && wins[0].indices == wins[1].indices;
    losses_equal = losses_equal && train::loss_csv_row(first[0]) == train::loss_csv_row(first[1]);
    losses += fmt(" M=%zu: %.6f/%.6f", m, first[0].total, first[1].total);
  }
  return {parsed && windows_equal && losses_equal,
          fmt("config accepts window {16,32,64} x search {vq,knn}: %s; identical windows: %s; "
              "identical first-step losses (vq/knn):%s",
              parsed ? "yes" : "no", windows_equal ? "yes" : "no", losses.c_str())};
}

// ---- 6: connectivity ----

// Plain BFS over the reversed window relation: a feature at i reaches j in
// one hop when i is in window(j).
std::optional<std::size_t> bfs_eccentricity(const pc::NeighborWindows& w, std::size_t source) {
  const std::size_t n = w.query_count();
  std::vector<std::vector<std::size_t>> readers(n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i : w.window(j)) readers[i].push_back(j);
  std::vector<std::size_t> dist(n, SIZE_MAX);
  std::queue<std::size_t> q;
  dist[source] = 0;
  q.push(source);
  std::size_t far = 0, seen = 1;
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (std::size_t v : readers[u]) {
      if (dist[v] != SIZE_MAX) continue;
      dist[v] = dist[u] + 1;
      far = std::max(far, dist[v]);
      ++seen;
      q.push(v);
    }
  }
  if (seen != n) return std::nullopt;
  return far;
}

std::size_t hops_or_inf(const std::optional<std::size_t>& h) { return h ? *h : SIZE_MAX; }

Outcome connectivity() {
  io::SynthConfig sc;
  std::mt19937_64 rng(kSeed);
  auto scene = io::synth_scene(sc, rng);
  while (scene.cloud.size() < kScanPoints) {
    sc.extent *= 1.2;
    scene = io::synth_scene(sc, rng);
  }
  std::vector<pc::Vec3> coords;
  std::sample(scene.cloud.coords.begin(), scene.cloud.coords.end(), std::back_inserter(coords), kScanPoints, rng);

  bool monotone = true, oracle_equal = true, knn_covers = false;
  std::string summary;
  for (auto search : {model::Search::kVoxelQuery, model::Search::kKnn}) {
    std::vector<eval::ConnectivityReport> reports;
    for (std::size_t m : {8, 16, 32}) {
      const auto w = eval::build_windows(coords, {search, m, kScanRadius});
      std::mt19937_64 sample_rng(kSeed);
      reports.push_back(eval::connectivity(w, kHopSamples, sample_rng));
      for (std::size_t k = 0; k < reports.back().samples.size(); ++k)
        oracle_equal = oracle_equal && reports.back().hops[k] == bfs_eccentricity(w, reports.back().samples[k]);
    }
    monotone = monotone && reports[0].samples.size() == kHopSamples;
    for (std::size_t r = 1; r < reports.size(); ++r) {
      monotone = monotone && reports[r].samples == reports[0].samples;
      for (std::size_t k = 0; k < reports[r].samples.size() && monotone; ++k)
        monotone = hops_or_inf(reports[r].hops[k]) <= hops_or_inf(reports[r - 1].hops[k]);
    }
    // Guard against a vacuous pass: kNN windows at the largest M must
    // connect every sample to the whole scan.
    if (search == model::Search::kKnn) knn_covers = reports.back().unreachable == 0;
    summary += " " + model::to_string(search) + ":";
    for (std::size_t r = 0; r < reports.size(); ++r) {
      summary += reports[r].unreachable == reports[r].samples.size()
                     ? fmt(" M=%d all unreachable;", 8 << r)
                     : fmt(" M=%d hops %zu/%.2f/%zu unreachable %zu;", 8 << r, reports[r].min_hops,
                           reports[r].mean_hops, reports[r].max_hops, reports[r].unreachable);
    }
  }
  return {monotone && oracle_equal && knn_covers,
          fmt("%zu points, %zu samples, radius %.1f m, hops min/mean/max;%s monotone: %s; BFS oracle equal: %s; "
              "knn M=32 covers the scan: %s",
              coords.size(), kHopSamples, kScanRadius, summary.c_str(), monotone ? "yes" : "no",
              oracle_equal ? "yes" : "no", knn_covers ? "yes" : "no")};
}

// ---- 7: metric hand values ----

pc::Box3D det_box(double x, double score) {
  pc::Box3D b;
  b.center = {x, 0.0, 0.0};
  b.size = {2.0, 2.0, 1.5};
  b.score = score;
  return b;
}

Outcome metric_values() {
  // gt 0 0 0 1 1 2 2 2 / pred 0 0 1 1 1 2 2 0; class 3 absent.
  eval::ConfusionMatrix cm(4);
  const std::vector<std::uint32_t> gt{0, 0, 0, 1, 1, 2, 2, 2}, pred{0, 0, 1, 1, 1, 2, 2, 0};
  cm.add(gt, pred);
  const auto r = eval::miou(cm);
  const double iou0 = 2.0 / 4.0, iou1 = 2.0 / 3.0, iou2 = 2.0 / 3.0;
  const double hand_mean = (iou0 + iou1 + iou2) / 3.0;
  const bool miou_ok = r.per_class.size() == 4 && r.per_class[0] == iou0 && r.per_class[1] == iou1 &&
                       r.per_class[2] == iou2 && !r.per_class[3] && r.mean == hand_mean;

  // Descending scores: TP, FP, TP, FP (duplicate), TP against 3 ground truths.
  const std::vector<std::vector<pc::Box3D>> gts{{det_box(0, 1), det_box(10, 1), det_box(20, 1)}};
  const std::vector<std::vector<pc::Box3D>> preds{
      {det_box(0.3, 0.6), det_box(0.5, 0.9), det_box(19, 0.5), det_box(50, 0.8), det_box(10.2, 0.7)}};
  const double hand_ap = (13 * 1.0 + 13 * (2.0 / 3.0) + 14 * 0.6) / 40.0;
  const double ap = eval::average_precision(preds, gts, 1).map;
  // One true positive on top of 2 ground truths: recall 1/2, precision 1.
  const std::vector<std::vector<pc::Box3D>> gts2{{det_box(0, 1)}, {det_box(30, 1)}};
  const std::vector<std::vector<pc::Box3D>> preds2{{det_box(0.2, 0.8)}, {}};
  const double ap_half = eval::average_precision(preds2, gts2, 1).map;
  const bool ap_ok = std::abs(ap - hand_ap) <= kApTol && std::abs(ap_half - 0.5) <= kApTol;
  return {miou_ok && ap_ok, fmt("mIoU %.17g vs hand %.17g (exact), absent class excluded: %s; AP %.12f vs %.12f, "
                                "%.12f vs 0.5 (tol %.0e)",
                                r.mean, hand_mean, r.per_class.size() == 4 && !r.per_class[3] ? "yes" : "no", ap,
                                hand_ap, ap_half, kApTol)};
}

// ---- 8: formats ----

template <class E>
bool throws_as(const std::function<void()>& f) {
  try {
    f();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome format_checks() {
  const fs::path dir = fs::temp_directory_path() / ("pattformer_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  std::mt19937_64 rng(kSeed);
  std::uniform_real_distribution<double> u(-50, 50);
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };

  // Points: float32 on disk, so values are compared after rounding to float.
  std::vector<pc::Vec3> pts(257);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  auto cloud = pc::make_cloud(pts, 1);
  for (std::size_t i = 0; i < pts.size(); ++i) cloud.feats(i, 0) = u(rng) / 50.0;
  io::save_points(dir / "p.bin", cloud);
  const auto back = io::load_points(dir / "p.bin");
  bool points_ok = back.size() == cloud.size();
  for (std::size_t i = 0; points_ok && i < cloud.size(); ++i) {
    for (int k = 0; k < 3; ++k)
      points_ok = points_ok && back.coords[i][k] == static_cast<double>(static_cast<float>(cloud.coords[i][k]));
    points_ok = points_ok && back.feats(i, 0) == static_cast<double>(static_cast<float>(cloud.feats(i, 0)));
  }
  expect(points_ok, "points round-trip");

  std::vector<std::uint32_t> labels(257);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng());
  io::save_labels(dir / "l.label", labels);
  expect(io::load_labels(dir / "l.label") == labels, "labels round-trip");

  std::vector<pc::Box3D> boxes(13);
  std::uniform_real_distribution<double> dim(0.1, 10), yaw(-M_PI + 1e-9, M_PI);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    boxes[i].center = {u(rng), u(rng), u(rng)};
    boxes[i].size = {dim(rng), dim(rng), dim(rng)};
    boxes[i].yaw = yaw(rng);
    boxes[i].class_id = static_cast<std::uint32_t>(i % 3);
  }
  io::save_boxes(dir / "b.txt", boxes);
  const auto boxes_back = io::load_boxes(dir / "b.txt");
  bool boxes_ok = boxes_back.size() == boxes.size();
  for (std::size_t i = 0; boxes_ok && i < boxes.size(); ++i)
    boxes_ok = boxes_back[i].center == boxes[i].center && boxes_back[i].size == boxes[i].size &&
               boxes_back[i].yaw == boxes[i].yaw && boxes_back[i].class_id == boxes[i].class_id;
  expect(boxes_ok, "boxes round-trip");

  model::ModelConfig mc;
  mc.stages = 2;
  mc.width = 8;
  mc.heads = 2;
  model::PAttFormer a(mc, 1), b(mc, 2);
  ad::save_checkpoint(dir / "m.ckpt", a.params(), &a.buffers());
  ad::load_checkpoint(dir / "m.ckpt", b.params(), &b.buffers());
  bool ckpt_ok = a.params().size() == b.params().size();
  for (std::size_t i = 0; ckpt_ok && i < a.params().size(); ++i) {
    const auto& x = a.params().entries()[i].second.value().data();
    const auto& y = b.params().entries()[i].second.value().data();
    ckpt_ok = std::equal(x.begin(), x.end(), y.begin(), y.end());
  }
  expect(ckpt_ok, "checkpoint round-trip");

  const std::string points_bytes = read_bytes(dir / "p.bin");
  write_bytes(dir / "p_trunc.bin", points_bytes.substr(0, points_bytes.size() - 3));
  expect(throws_as<FormatError>([&] { io::load_points(dir / "p_trunc.bin"); }), "truncated points -> FormatError");
  expect(throws_as<IoError>([&] { io::load_points(dir / "missing.bin"); }), "missing points -> IoError");
  write_bytes(dir / "l_trunc.label", read_bytes(dir / "l.label").substr(0, 10));
  expect(throws_as<FormatError>([&] { io::load_labels(dir / "l_trunc.label"); }), "truncated labels -> FormatError");
  write_bytes(dir / "b_bad.txt", "1 2 3 1 1 1 0 0\n1 2 x 1 1 1 0 0\n");
  bool names_line = false;
  try {
    io::load_boxes(dir / "b_bad.txt");
  } catch (const FormatError& e) {
    names_line = std::string(e.what()).find(":2:") != std::string::npos;
  } catch (...) {
  }
  expect(names_line, "malformed boxes -> FormatError naming line 2");
  write_bytes(dir / "b_neg.txt", "1 2 3 -1 1 1 0 0\n");
  expect(throws_as<FormatError>([&] { io::load_boxes(dir / "b_neg.txt"); }), "negative box size -> FormatError");
  const std::string ckpt_bytes = read_bytes(dir / "m.ckpt");
  write_bytes(dir / "m_trunc.ckpt", ckpt_bytes.substr(0, ckpt_bytes.size() - 5));
  expect(throws_as<FormatError>([&] { ad::read_checkpoint(dir / "m_trunc.ckpt"); }), "truncated checkpoint -> FormatError");
  write_bytes(dir / "m_magic.ckpt", "not-a-checkpoint 1\n" + ckpt_bytes.substr(ckpt_bytes.find('\n') + 1));
  expect(throws_as<FormatError>([&] { ad::read_checkpoint(dir / "m_magic.ckpt"); }), "bad checkpoint magic -> FormatError");
  expect(throws_as<ConfigError>([&] { io::parse_config_text("no_such_key = 1\n"); }), "unknown config key -> ConfigError");

  std::error_code ec;
  fs::remove_all(dir, ec);
  std::string detail = "points (float32), labels, boxes, checkpoint round-trip; corrupted inputs raise the declared errors";
  if (!failures.empty()) {
    detail = "failed:";
    for (const auto& f : failures) detail += " [" + f + "]";
  }
  return {failures.empty(), detail};
}

// ---- 9: benchmark ----

Outcome bench() {
  eval::BenchConfig cfg;
  std::mt19937_64 rng(kSeed);
  const auto rows = eval::bench_search(cfg, rng);
  const std::string csv = eval::bench_csv(rows);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  bool all_correct = rows.size() == cfg.sizes.size() * cfg.methods.size();
  std::string summary;
  for (const auto& r : rows) {
    all_correct = all_correct && r.correct;
    summary += fmt(" %s N=%zu %.0f us%s;", model::to_string(r.method).c_str(), r.n, r.median_us,
                   r.correct ? "" : " INCORRECT");
  }
  const bool header_ok = header == "method,N,M,median_us,correct";
  return {all_correct && header_ok, fmt("header ok: %s;%s", header_ok ? "yes" : "no", summary.c_str())};
}

Outcome guarded(const std::function<Outcome()>& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("exception: ") + e.what()};
  }
}

}  // namespace

// Runs every criterion, or only the ids given as arguments.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  auto wanted = [&](int id) { return only.empty() || only.count(id) || (id == 3 && only.count(4)); };
  int failed = 0, ran = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    if (!wanted(id)) return;
    ++ran;
    const Outcome o = guarded(run);
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  };

  report(1, "gradient suite", gradient_suite);
  report(2, "oracle equivalence", oracles);

  std::optional<OverfitRun> first;
  io::Config overfit_cfg;
  std::vector<pc::SceneSample> overfit_scenes;
  report(3, "overfit", [&] {
           overfit_cfg = io::parse_config_text(kOverfitConfig);
           overfit_scenes = synth_scenes(overfit_cfg.synth, overfit_cfg.train.seed, kOverfitScenes);
           first = overfit_run(overfit_cfg, overfit_scenes);
           const OverfitRun second = overfit_run(overfit_cfg, overfit_scenes);
           return overfit(*first, second);
         });
  report(4, "multi-task mechanics", [&] {
           if (!first) return Outcome{false, "overfit run unavailable"};
           return multitask(overfit_cfg, overfit_scenes, *first);
         });
  report(5, "ablation knobs", ablation_knobs);
  report(6, "connectivity", connectivity);
  report(7, "metric hand values", metric_values);
  report(8, "format round-trips", format_checks);
  report(9, "search benchmark", bench);
  std::printf("%d of %d criteria failed\n", failed, ran);
  return failed == 0 ? 0 : 1;
}
