#include "pattformer/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pattformer/common/errors.hpp"
#include "pattformer/eval/iou.hpp"

namespace pattformer::eval {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : k_(num_classes), counts_(num_classes * num_classes, 0) {
  if (num_classes == 0) throw InputError("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::uint32_t gt, std::uint32_t pred, std::uint64_t count) {
  if (gt >= k_ || pred >= k_) {
    throw InputError("confusion matrix: label " + std::to_string(std::max(gt, pred)) +
                     " out of range for " + std::to_string(k_) + " classes");
  }
  counts_[gt * k_ + pred] += count;
}

void ConfusionMatrix::add(std::span<const std::uint32_t> gt, std::span<const std::uint32_t> pred) {
  if (gt.size() != pred.size()) {
    throw ShapeError("confusion matrix: " + std::to_string(gt.size()) + " labels vs " +
                     std::to_string(pred.size()) + " predictions");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) add(gt[i], pred[i]);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw ShapeError("confusion matrix: class counts differ");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

MiouResult miou(const ConfusionMatrix& cm) {
  const std::size_t k = cm.num_classes();
  MiouResult r;
  r.per_class.resize(k);
  double sum = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += cm.at(o, c);
      fn += cm.at(c, o);
    }
    const std::uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    r.per_class[c] = static_cast<double>(tp) / static_cast<double>(denom);
    sum += *r.per_class[c];
    ++present;
  }
  if (present == 0) throw InputError("miou: every class is absent");
  r.mean = sum / static_cast<double>(present);
  return r;
}

std::optional<double> Matcher::quality(const pc::Box3D& pred, const pc::Box3D& gt) const {
  if (mode == MatchMode::kCenterDistance) {
    const double d = std::hypot(pred.center[0] - gt.center[0], pred.center[1] - gt.center[1]);
    if (d > threshold) return std::nullopt;
    return -d;
  }
  const double iou = bev_rotated_iou(pred, gt);
  if (iou < threshold || iou == 0.0) return std::nullopt;
  return iou;
}

MatchMode parse_match_mode(const std::string& s) {
  if (s == "dist") return MatchMode::kCenterDistance;
  if (s == "iou") return MatchMode::kIou;
  throw ConfigError("unknown matcher '" + s + "' (expected dist or iou)");
}

double ap40(std::span<const std::uint8_t> tp, std::size_t num_gt) {
  if (num_gt == 0) throw InputError("ap40: no ground truth");
  const std::size_t n = tp.size();
  std::vector<double> precision(n), recall(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    hits += tp[i];
    precision[i] = static_cast<double>(hits) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(hits) / static_cast<double>(num_gt);
  }
  // Running max from the tail gives the interpolated precision.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0;
  std::size_t j = 0;
  for (int k = 1; k <= 40; ++k) {
    const double r = k / 40.0;
    while (j < n && recall[j] < r - 1e-12) ++j;
    if (j < n) sum += precision[j];
  }
  return sum / 40.0;
}

std::vector<std::uint8_t> match_detections(std::span<const std::vector<pc::Box3D>> preds,
                                           std::span<const std::vector<pc::Box3D>> gts,
                                           std::uint32_t class_id, const Matcher& matcher) {
  if (preds.size() != gts.size()) {
    throw ShapeError("match_detections: " + std::to_string(preds.size()) + " prediction sets vs " +
                     std::to_string(gts.size()) + " ground-truth sets");
  }
  struct Det {
    std::size_t scene, index;
    double score;
  };
  std::vector<Det> dets;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    for (std::size_t i = 0; i < preds[s].size(); ++i) {
      if (preds[s][i].class_id == class_id) dets.push_back({s, i, preds[s][i].score});
    }
  }
  std::stable_sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) { return a.score > b.score; });
  std::vector<std::vector<char>> used(gts.size());
  for (std::size_t s = 0; s < gts.size(); ++s) used[s].assign(gts[s].size(), 0);
  std::vector<std::uint8_t> tp;
  tp.reserve(dets.size());
  for (const Det& d : dets) {
    const pc::Box3D& p = preds[d.scene][d.index];
    std::optional<std::size_t> best;
    double best_q = 0;
    for (std::size_t g = 0; g < gts[d.scene].size(); ++g) {
      const pc::Box3D& gt = gts[d.scene][g];
      if (gt.class_id != class_id || used[d.scene][g]) continue;
      const auto q = matcher.quality(p, gt);
      if (q && (!best || *q > best_q)) {
        best = g;
        best_q = *q;
      }
    }
    if (best) used[d.scene][*best] = 1;
    tp.push_back(best ? 1 : 0);
  }
  return tp;
}

ApResult average_precision(std::span<const std::vector<pc::Box3D>> preds,
                           std::span<const std::vector<pc::Box3D>> gts, std::size_t num_classes,
                           const Matcher& matcher) {
  ApResult r;
  r.per_class.resize(num_classes);
  r.num_gt.assign(num_classes, 0);
  for (const auto& scene : gts) {
    for (const auto& b : scene) {
      if (b.class_id >= num_classes) throw InputError("average_precision: box class out of range");
      ++r.num_gt[b.class_id];
    }
  }
  double sum = 0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (r.num_gt[c] == 0) continue;
    const auto tp = match_detections(preds, gts, static_cast<std::uint32_t>(c), matcher);
    r.per_class[c] = ap40(tp, r.num_gt[c]);
    sum += *r.per_class[c];
    ++counted;
  }
  if (counted == 0) throw InputError("average_precision: no ground-truth boxes");
  r.map = sum / static_cast<double>(counted);
  return r;
}

}  // namespace pattformer::eval
