#include "pattformer/eval/evaluate.hpp"

#include <cstdio>

#include "pattformer/ad/var.hpp"
#include "pattformer/common/errors.hpp"
#include "pattformer/eval/iou.hpp"

namespace pattformer::eval {

using model::Task;

ScenePrediction predict(const model::PAttFormer& model, const pc::PointCloud& cloud, Task task) {
  ad::NoGradGuard no_grad;
  const auto out = model.forward(cloud, task, false);
  ScenePrediction p;
  if (out.seg_logits.defined()) {
    const auto& z = out.seg_logits.value();
    p.labels.resize(z.rows());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < z.cols(); ++c) {
        if (z(i, c) > z(i, best)) best = c;
      }
      p.labels[i] = static_cast<std::uint32_t>(best);
    }
  }
  if (out.boxes) {
    const auto& cfg = model.config();
    const auto boxes = model::decode_boxes(*out.boxes, cfg.score_threshold, out.queries->selected);
    p.boxes = nms(boxes, cfg.nms_iou, cfg.score_threshold);
  }
  return p;
}

EvalReport evaluate(const model::PAttFormer& model, std::span<const pc::SceneSample> scenes, Task task,
                    const Matcher& matcher) {
  const auto& cfg = model.config();
  EvalReport r;
  ConfusionMatrix cm(cfg.num_classes);
  std::vector<std::vector<pc::Box3D>> preds, gts;
  for (const auto& s : scenes) {
    const ScenePrediction p = predict(model, s.cloud, task);
    if (task != Task::kDet) {
      if (!s.cloud.labels) throw InputError("segmentation evaluation needs point labels");
      cm.add(*s.cloud.labels, p.labels);
    }
    preds.push_back(p.boxes);
    gts.push_back(s.boxes);
    ++r.scenes;
    r.points += s.cloud.size();
  }
  if (task != Task::kDet) r.seg = miou(cm);
  if (task != Task::kSeg) r.det = average_precision(preds, gts, cfg.num_det_classes, matcher);
  return r;
}

namespace {

std::string value(const std::optional<double>& v) {
  if (!v) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  return buf;
}

}  // namespace

std::string metrics_csv(const EvalReport& r) {
  std::string out = "metric,class,value\n";
  if (r.seg) {
    for (std::size_t c = 0; c < r.seg->per_class.size(); ++c) {
      out += "iou," + std::to_string(c) + "," + value(r.seg->per_class[c]) + "\n";
    }
    out += "miou,all," + value(r.seg->mean) + "\n";
  }
  if (r.det) {
    for (std::size_t c = 0; c < r.det->per_class.size(); ++c) {
      out += "ap," + std::to_string(c) + "," + value(r.det->per_class[c]) + "\n";
    }
    out += "map,all," + value(r.det->map) + "\n";
  }
  return out;
}

std::string metrics_summary(const EvalReport& r) {
  std::string out = "scenes=" + std::to_string(r.scenes) + " points=" + std::to_string(r.points);
  if (r.seg) out += " mIoU=" + value(r.seg->mean);
  if (r.det) out += " mAP=" + value(r.det->map);
  return out;
}

}  // namespace pattformer::eval
