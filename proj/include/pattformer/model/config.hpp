#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pattformer::model {

enum class Task { kSeg, kDet, kMulti };
enum class Search { kVoxelQuery, kKnn };

Task parse_task(const std::string& s);
std::string to_string(Task t);
Search parse_search(const std::string& s);
std::string to_string(Search s);

/// Architecture hyperparameters. Stage s >= 1 pools with cell
/// grid_size * 2^(s-1); stage s attends within radius * 2^s.
struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t stages = 4;
  std::size_t width = 32;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t seg_layers = 1;
  std::size_t window = 32;
  double grid_size = 0.25;
  double radius = 0.5;
  Search search = Search::kVoxelQuery;

  std::size_t num_classes = 5;
  std::size_t num_det_classes = 3;
  std::vector<std::uint32_t> thing_classes{2, 3, 4};

  std::size_t queries = 200;
  double fg_threshold = 0.2;
  std::size_t dec_layers = 2;
  std::size_t dec_heads = 4;
  std::size_t dec_window = 16;
  double score_threshold = 0.2;
  double nms_iou = 0.4;

  double stage_grid(std::size_t s) const;
  double stage_radius(std::size_t s) const;
  std::size_t stage_width(std::size_t) const { return width; }
  /// Decoder levels feeding the detection head, coarsest first.
  std::vector<std::size_t> detection_levels() const;
  /// Detection class of a semantic id, or -1 for stuff classes.
  int det_class_of(std::uint32_t semantic) const;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

}  // namespace pattformer::model
