#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pattformer/model/pattformer.hpp"
#include "pattformer/pc/scene.hpp"
#include "pattformer/train/config.hpp"
#include "pattformer/train/matching.hpp"

namespace pattformer::train {

using ad::Var;

/// Differentiable loss terms of one step; absent terms are undefined.
struct LossTerms {
  Var cls_s, lov_s;  // in det mode cls_s holds the foreground focal loss
  Var obj_d, cls_d, center_d, size_d, yaw_d;
  Var seg, det;
  Var total;
};

struct LossReport {
  std::size_t step = 0;
  double lr = 0.0;
  std::optional<double> cls_s, lov_s, obj_d, cls_d, center_d, size_d, yaw_d, rho_seg, rho_det;
  double total = 0.0;
};

/// Builds every loss term for a forward pass over `scene`. Queries past
/// `out.queries->selected` are noisy GT queries tied to boxes in order.
LossTerms compute_losses(const model::PAttFormer& model, const model::ForwardOutput& out,
                         const pc::SceneSample& scene, const TrainConfig& cfg);

/// Assignment used for the detection loss: Hungarian over selected queries
/// plus the fixed noisy-query pairs.
Assignment assign_queries(const model::BoxPrediction& pred, std::span<const pc::Box3D> gt,
                          std::size_t selected);

LossReport make_report(const LossTerms& t, const model::PAttFormer& model, model::Task task,
                       std::size_t step, double lr);

extern const char* const kLossCsvHeader;
std::string loss_csv_row(const LossReport& r);

/// Crops the scene to the configured range; boxes whose centers fall
/// outside are dropped.
pc::SceneSample crop_scene(const pc::SceneSample& scene, const TrainConfig& cfg);

struct TrainOutput {
  std::filesystem::path dir;  // empty: no files written
  std::string config_echo;    // written next to every checkpoint
};

struct TrainResult {
  std::vector<LossReport> log;
  std::vector<std::filesystem::path> checkpoints;
};

/// One scene per step, `epochs` passes over the data (capped by max_steps),
/// AdamW with a cosine schedule. Throws NumericalError on a non-finite loss.
TrainResult train_loop(model::PAttFormer& model, std::span<const pc::SceneSample> data,
                       const TrainConfig& cfg, const TrainOutput& output = {});

}  // namespace pattformer::train
