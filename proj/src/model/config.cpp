#include "pattformer/model/config.hpp"

#include <algorithm>
#include <cmath>

#include "pattformer/common/errors.hpp"

namespace pattformer::model {

Task parse_task(const std::string& s) {
  if (s == "seg") return Task::kSeg;
  if (s == "det") return Task::kDet;
  if (s == "multi") return Task::kMulti;
  throw ConfigError("unknown task '" + s + "' (expected seg, det or multi)");
}

std::string to_string(Task t) {
  switch (t) {
    case Task::kSeg:
      return "seg";
    case Task::kDet:
      return "det";
    case Task::kMulti:
      return "multi";
  }
  return "?";
}

Search parse_search(const std::string& s) {
  if (s == "vq" || s == "voxel_query") return Search::kVoxelQuery;
  if (s == "knn") return Search::kKnn;
  throw ConfigError("unknown search '" + s + "' (expected vq or knn)");
}

std::string to_string(Search s) { return s == Search::kKnn ? "knn" : "vq"; }

double ModelConfig::stage_grid(std::size_t s) const {
  return s == 0 ? 0.0 : grid_size * std::ldexp(1.0, static_cast<int>(s) - 1);
}

double ModelConfig::stage_radius(std::size_t s) const {
  return radius * std::ldexp(1.0, static_cast<int>(s));
}

std::vector<std::size_t> ModelConfig::detection_levels() const {
  if (stages == 1) return {0, 0};
  return {stages - 1, stages - 2};
}

int ModelConfig::det_class_of(std::uint32_t semantic) const {
  const auto it = std::find(thing_classes.begin(), thing_classes.end(), semantic);
  return it == thing_classes.end() ? -1 : static_cast<int>(it - thing_classes.begin());
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (in_channels == 0) fail("in_channels must be >= 1");
  if (stages == 0) fail("stages must be >= 1");
  if (width == 0 || heads == 0 || width % heads != 0) fail("width must be a positive multiple of heads");
  if (layers == 0 || seg_layers == 0) fail("layer counts must be >= 1");
  if (window == 0) fail("window_size must be >= 1");
  if (!(grid_size > 0) || !(radius > 0)) fail("grid_size and radius must be positive");
  if (num_classes < 2) fail("num_classes must be >= 2");
  if (thing_classes.size() != num_det_classes) fail("thing_classes must list num_det_classes ids");
  for (auto c : thing_classes) {
    if (c >= num_classes) fail("thing class id out of range");
  }
  if (queries == 0) fail("queries must be >= 1");
  if (!(fg_threshold > 0 && fg_threshold < 1)) fail("fg_threshold must lie in (0, 1)");
  if (dec_layers == 0) fail("dec_layers must be >= 1");
  if (dec_heads == 0 || width % dec_heads != 0) fail("width must be a multiple of dec_heads");
  if (dec_window == 0) fail("dec_window must be >= 1");
}

}  // namespace pattformer::model
