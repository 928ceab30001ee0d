#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pattformer/pc/box3d.hpp"

namespace pattformer::eval {

/// K x K point counts; rows are ground truth, columns predictions.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes);

  void add(std::uint32_t gt, std::uint32_t pred, std::uint64_t count = 1);
  void add(std::span<const std::uint32_t> gt, std::span<const std::uint32_t> pred);
  void merge(const ConfusionMatrix& other);

  std::uint64_t at(std::size_t gt, std::size_t pred) const { return counts_[gt * k_ + pred]; }
  std::size_t num_classes() const { return k_; }
  std::uint64_t total() const;

 private:
  std::size_t k_;
  std::vector<std::uint64_t> counts_;
};

struct MiouResult {
  std::vector<std::optional<double>> per_class;  // empty for absent classes
  double mean = 0.0;
};

/// IoU_c = TP / (TP + FP + FN); classes absent from both ground truth and
/// prediction are left out of the mean. Throws InputError if all are absent.
MiouResult miou(const ConfusionMatrix& cm);

enum class MatchMode { kCenterDistance, kIou };

struct Matcher {
  MatchMode mode = MatchMode::kCenterDistance;
  double threshold = 2.0;  // meters in the ground plane, or minimum BEV IoU

  /// Quality of a pairing (higher is better), or nullopt if not a match.
  std::optional<double> quality(const pc::Box3D& pred, const pc::Box3D& gt) const;
};

MatchMode parse_match_mode(const std::string& s);

/// Interpolated precision averaged over the recall levels 1/40, ..., 1.
/// `tp` flags are in descending score order.
double ap40(std::span<const std::uint8_t> tp, std::size_t num_gt);

/// Per-detection true-positive flags for one class, in descending score
/// order over all scenes (ties to the earlier scene, then lower index).
/// Each prediction takes the best unused ground truth the matcher accepts.
std::vector<std::uint8_t> match_detections(std::span<const std::vector<pc::Box3D>> preds,
                                           std::span<const std::vector<pc::Box3D>> gts,
                                           std::uint32_t class_id, const Matcher& matcher);

struct ApResult {
  std::vector<std::optional<double>> per_class;  // empty for classes without GT
  std::vector<std::size_t> num_gt;
  double map = 0.0;
};

/// Class-aware AP at 40 recall points over a set of scenes; mAP is the mean
/// over classes with at least one ground-truth box. Throws InputError when
/// there is no ground truth at all.
ApResult average_precision(std::span<const std::vector<pc::Box3D>> preds,
                           std::span<const std::vector<pc::Box3D>> gts, std::size_t num_classes,
                           const Matcher& matcher = {});

}  // namespace pattformer::eval
