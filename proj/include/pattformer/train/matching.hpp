#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pattformer/ad/tensor.hpp"
#include "pattformer/model/pattformer.hpp"
#include "pattformer/pc/box3d.hpp"

namespace pattformer::train {

using Assignment = std::vector<std::pair<std::size_t, std::size_t>>;  // (row, col)

/// Minimum-cost one-to-one assignment of min(rows, cols) pairs, sorted by row.
Assignment hungarian_match(const ad::Tensor& cost);

/// Sum of the assigned entries.
double assignment_cost(const ad::Tensor& cost, const Assignment& a);

/// (1 - p_class) + L1(center) + L1(size), rows = queries, cols = boxes.
ad::Tensor match_cost(const model::BoxPrediction& pred, std::span<const pc::Box3D> gt,
                      std::size_t first = 0, std::size_t count = SIZE_MAX);

struct DetectionTargets {
  std::vector<std::uint32_t> cls;         // background = num_det_classes
  std::vector<std::uint32_t> objectness;  // 1 for matched queries
  std::vector<std::size_t> matched;       // query indices with a box
  ad::Tensor center;                      // per matched query: gt center - ref
  ad::Tensor log_size;                    // per matched query
  ad::Tensor yaw;                         // per matched query: (sin, cos)
};

/// Targets for every query given (query, box) pairs.
DetectionTargets detection_targets(const model::BoxPrediction& pred,
                                   std::span<const pc::Box3D> gt, const Assignment& match,
                                   std::size_t num_det_classes);

}  // namespace pattformer::train
