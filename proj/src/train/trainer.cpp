#include "pattformer/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "pattformer/ad/checkpoint.hpp"
#include "pattformer/common/errors.hpp"
#include "pattformer/train/augment.hpp"
#include "pattformer/train/losses.hpp"
#include "pattformer/train/optim.hpp"

namespace pattformer::train {

using ad::Tensor;
using model::Task;

Assignment assign_queries(const model::BoxPrediction& pred, std::span<const pc::Box3D> gt,
                          std::size_t selected) {
  Assignment out = hungarian_match(match_cost(pred, gt, 0, selected));
  const std::size_t noisy = pred.size() - selected;
  if (noisy != 0 && noisy != gt.size()) {
    throw InputError("noisy query count " + std::to_string(noisy) + " does not match " +
                     std::to_string(gt.size()) + " boxes");
  }
  for (std::size_t i = 0; i < noisy; ++i) out.emplace_back(selected + i, i);
  return out;
}

LossTerms compute_losses(const model::PAttFormer& model, const model::ForwardOutput& out,
                         const pc::SceneSample& scene, const TrainConfig& cfg) {
  const auto& mc = model.config();
  LossTerms t;
  const auto& coords = out.stages.at(0).coords;
  if (cfg.task != Task::kDet) {
    if (!scene.cloud.labels) throw InputError("segmentation training needs point labels");
    const auto& labels = *scene.cloud.labels;
    t.cls_s = cross_entropy(out.seg_logits, labels);
    t.lov_s = lovasz_softmax(ad::softmax(out.seg_logits), labels);
    t.seg = ad::add(t.cls_s, t.lov_s);
  } else {
    const auto fg = model::pseudo_foreground_labels(coords, scene.boxes);
    t.cls_s = focal_loss(out.fg_logits, fg, cfg.focal_alpha, cfg.focal_gamma);
  }
  if (cfg.task != Task::kSeg) {
    if (!out.boxes || !out.queries) throw InputError("detection loss needs box predictions");
    const auto& pred = *out.boxes;
    const Assignment match = assign_queries(pred, scene.boxes, out.queries->selected);
    const DetectionTargets tg = detection_targets(pred, scene.boxes, match, mc.num_det_classes);
    t.obj_d = focal_loss(pred.objectness, tg.objectness, cfg.focal_alpha, cfg.focal_gamma);
    t.cls_d = cross_entropy(pred.class_logits, tg.cls);
    if (tg.matched.empty()) {
      t.center_d = t.size_d = t.yaw_d = ad::constant(Tensor::scalar(0.0));
    } else {
      t.center_d = smooth_l1(ad::gather_rows(pred.center_offset, tg.matched), tg.center);
      t.size_d = smooth_l1(ad::gather_rows(pred.log_size, tg.matched), tg.log_size);
      t.yaw_d = smooth_l1(ad::gather_rows(pred.yaw, tg.matched), tg.yaw);
    }
    t.det = ad::add(ad::add(ad::add(t.obj_d, t.cls_d), ad::add(t.center_d, t.size_d)), t.yaw_d);
  }
  switch (cfg.task) {
    case Task::kSeg:
      t.total = t.seg;
      break;
    case Task::kDet:
      t.total = ad::add(t.cls_s, t.det);
      break;
    case Task::kMulti:
      t.total = ad::add(uncertainty_weighted(t.seg, model.rho_seg()),
                        uncertainty_weighted(t.det, model.rho_det()));
      break;
  }
  return t;
}

LossReport make_report(const LossTerms& t, const model::PAttFormer& model, Task task,
                       std::size_t step, double lr) {
  LossReport r;
  r.step = step;
  r.lr = lr;
  auto val = [](const Var& v) -> std::optional<double> {
    return v.defined() ? std::optional<double>(v.item()) : std::nullopt;
  };
  r.cls_s = val(t.cls_s);
  r.lov_s = val(t.lov_s);
  r.obj_d = val(t.obj_d);
  r.cls_d = val(t.cls_d);
  r.center_d = val(t.center_d);
  r.size_d = val(t.size_d);
  r.yaw_d = val(t.yaw_d);
  if (task == Task::kMulti) {
    r.rho_seg = model.rho_seg().item();
    r.rho_det = model.rho_det().item();
  }
  r.total = t.total.item();
  return r;
}

const char* const kLossCsvHeader =
    "step,lr,L_cls_s,L_lov_s,L_obj_d,L_cls_d,L_center_d,L_size_d,L_yaw_d,rho_seg,rho_det,total";

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

bool finite(const std::optional<double>& v) { return !v || std::isfinite(*v); }

std::string describe(const LossReport& r) {
  std::ostringstream os;
  os << "L_cls_s=" << fmt(r.cls_s) << " L_lov_s=" << fmt(r.lov_s) << " L_obj_d=" << fmt(r.obj_d)
     << " L_cls_d=" << fmt(r.cls_d) << " L_center_d=" << fmt(r.center_d)
     << " L_size_d=" << fmt(r.size_d) << " L_yaw_d=" << fmt(r.yaw_d) << " total=" << fmt(r.total);
  return os.str();
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu.ckpt", epoch);
  return dir / buf;
}

}  // namespace

std::string loss_csv_row(const LossReport& r) {
  return std::to_string(r.step) + "," + fmt(r.lr) + "," + fmt(r.cls_s) + "," + fmt(r.lov_s) + "," +
         fmt(r.obj_d) + "," + fmt(r.cls_d) + "," + fmt(r.center_d) + "," + fmt(r.size_d) + "," +
         fmt(r.yaw_d) + "," + fmt(r.rho_seg) + "," + fmt(r.rho_det) + "," + fmt(r.total);
}

pc::SceneSample crop_scene(const pc::SceneSample& scene, const TrainConfig& cfg) {
  pc::SceneSample out;
  out.cloud = pc::crop(scene.cloud, cfg.range_min, cfg.range_max);
  for (const auto& b : scene.boxes) {
    bool inside = true;
    for (int a = 0; a < 3; ++a) {
      inside = inside && b.center[a] >= cfg.range_min[a] && b.center[a] <= cfg.range_max[a];
    }
    if (inside) out.boxes.push_back(b);
  }
  return out;
}

TrainResult train_loop(model::PAttFormer& model, std::span<const pc::SceneSample> data,
                       const TrainConfig& cfg, const TrainOutput& output) {
  cfg.validate();
  if (data.empty()) throw InputError("training needs at least one scene");
  TrainResult result;
  const bool write = !output.dir.empty();
  std::ofstream csv;
  if (write) {
    std::filesystem::create_directories(output.dir);
    csv.open(output.dir / "loss.csv");
    if (!csv) throw IoError("cannot write " + (output.dir / "loss.csv").string());
    csv << kLossCsvHeader << '\n';
  }
  auto checkpoint = [&](std::size_t epoch) {
    if (!write) return;
    const auto path = checkpoint_path(output.dir, epoch);
    ad::save_checkpoint(path, model.params(), &model.buffers());
    std::ofstream echo(std::filesystem::path(path).replace_extension(".cfg"));
    echo << output.config_echo;
    if (!echo) throw IoError("cannot write config echo next to " + path.string());
    result.checkpoints.push_back(path);
  };

  std::size_t total_steps = cfg.epochs * data.size();
  if (cfg.max_steps != 0) total_steps = std::min(total_steps, cfg.max_steps);
  if (total_steps == 0) {
    checkpoint(0);
    return result;
  }

  AdamW opt(model.params(), {0.9, 0.999, 1e-8, cfg.weight_decay});
  std::mt19937_64 order_rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs && step < total_steps; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), order_rng);
    for (std::size_t idx : order) {
      if (step >= total_steps) break;
      std::seed_seq seq{cfg.seed, static_cast<std::uint64_t>(step), std::uint64_t{0x5eed}};
      std::mt19937_64 rng(seq);
      pc::SceneSample scene = cfg.augment ? augment(data[idx], rng, cfg) : data[idx];
      scene = crop_scene(scene, cfg);
      std::vector<pc::Vec3> extra;
      if (cfg.task != Task::kSeg && cfg.noisy_queries) {
        extra = noisy_gt_queries(scene.boxes, cfg.noise_scale, rng);
      }
      const auto out = model.forward(scene.cloud, cfg.task, true, extra);
      const LossTerms terms = compute_losses(model, out, scene, cfg);
      const double lr = cosine_lr(step, total_steps, cfg.lr, cfg.lr_min);
      LossReport report = make_report(terms, model, cfg.task, step, lr);
      if (!std::isfinite(report.total) || !finite(report.cls_s) || !finite(report.lov_s) ||
          !finite(report.obj_d) || !finite(report.cls_d) || !finite(report.center_d) ||
          !finite(report.size_d) || !finite(report.yaw_d)) {
        throw NumericalError("non-finite loss at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch) + ", scene " + std::to_string(idx) +
                             "): " + describe(report));
      }
      model.params().zero_grad();
      ad::backward(terms.total);
      opt.step(lr);
      if (write) csv << loss_csv_row(report) << '\n' << std::flush;
      result.log.push_back(report);
      ++step;
    }
    checkpoint(epoch + 1);
  }
  return result;
}

}  // namespace pattformer::train
