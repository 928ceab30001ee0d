#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pattformer/eval/metrics.hpp"
#include "pattformer/model/pattformer.hpp"
#include "pattformer/pc/scene.hpp"

namespace pattformer::eval {

struct ScenePrediction {
  std::vector<std::uint32_t> labels;  // argmax semantic class per point (seg, multi)
  std::vector<pc::Box3D> boxes;       // after score threshold and NMS (det, multi)
};

/// Inference-mode forward pass followed by argmax labels and box decoding
/// with the model's score and NMS thresholds.
ScenePrediction predict(const model::PAttFormer& model, const pc::PointCloud& cloud,
                        model::Task task);

struct EvalReport {
  std::optional<MiouResult> seg;
  std::optional<ApResult> det;
  std::size_t scenes = 0;
  std::uint64_t points = 0;
};

EvalReport evaluate(const model::PAttFormer& model, std::span<const pc::SceneSample> scenes,
                    model::Task task, const Matcher& matcher = {});

/// `metric,class,value` rows: iou per class, miou, ap per class, map.
/// Undefined entries (absent classes) leave the value empty.
std::string metrics_csv(const EvalReport& r);
/// One line: scenes, points, mIoU and mAP where computed.
std::string metrics_summary(const EvalReport& r);

}  // namespace pattformer::eval
