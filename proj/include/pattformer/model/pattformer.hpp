#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "pattformer/attention/deformable.hpp"
#include "pattformer/attention/patt.hpp"
#include "pattformer/model/config.hpp"
#include "pattformer/pc/box3d.hpp"
#include "pattformer/pc/pooling.hpp"

namespace pattformer::model {

using ad::Var;
using attention::PAttLayerParams;

struct StageOutput {
  std::vector<pc::Vec3> coords;
  Var feats;
  pc::PoolMap map;  // from the previous stage; empty for stage 0
  pc::NeighborWindows windows;
};

struct BackboneParams {
  ad::Linear embed;
  std::vector<std::vector<PAttLayerParams>> enc;  // per stage
  std::vector<ad::Linear> down;                   // per stage, index 0 unused
  std::vector<ad::Linear> fuse;                   // per stage, last unused
  std::vector<std::vector<PAttLayerParams>> dec;  // per stage, last unused
};

struct SegHeadParams {
  std::vector<PAttLayerParams> block;
  ad::Linear cls;
};

struct DecoderLayerParams {
  attention::DeformAttnParams attn;
  ad::Mlp2 ffn;
};

struct DetHeadParams {
  std::size_t num_det_classes = 3;
  std::vector<DecoderLayerParams> layers;
  ad::Mlp2 box_ffn;  // d_q -> (K + 1) + 1 + 3 + 3 + 2
};

struct QuerySet {
  Var feats;                        // Q x d_q
  std::vector<pc::Vec3> ref_points;
  std::vector<std::size_t> source;  // full-resolution point per query
  std::size_t selected = 0;         // leading queries from selection; the rest are noisy GT
  std::size_t size() const { return ref_points.size(); }
};

struct BoxPrediction {
  Var class_logits;   // Q x (K + 1), background last
  Var objectness;     // Q x 1
  Var center_offset;  // Q x 3
  Var log_size;       // Q x 3
  Var yaw;            // Q x 2 (sin, cos)
  std::vector<pc::Vec3> ref_points;
  std::size_t size() const { return ref_points.size(); }
};

/// Neighbor windows for every point of a stage.
pc::NeighborWindows stage_windows(std::span<const pc::Vec3> coords, const ModelConfig& cfg,
                                  std::size_t stage);

/// Stage 0 at full resolution, then pool + project + PAtt block per stage.
std::vector<StageOutput> encode(const pc::PointCloud& cloud, const ModelConfig& cfg,
                                const BackboneParams& p, bool training);

/// Top-down U-Net pass. Returns decoded features per level (index = stage).
std::vector<Var> decode_unet(const std::vector<StageOutput>& stages, const BackboneParams& p,
                             bool training);

Var segment_head(const Var& feats, std::span<const pc::Vec3> coords,
                 const pc::NeighborWindows& windows, const SegHeadParams& p, bool training);

/// Foreground = any thing-class softmax probability above the threshold.
std::vector<double> thing_scores(const ad::Tensor& semantic_logits,
                                 std::span<const std::uint32_t> thing_ids);

/// FPS over foreground points (score > threshold) starting at the first one;
/// if fewer than Q, all foreground points followed by the best-scoring rest.
std::vector<std::size_t> select_queries(std::span<const double> scores,
                                        std::span<const pc::Vec3> coords, double threshold,
                                        std::size_t count);
std::vector<std::size_t> select_queries(const ad::Tensor& semantic_logits,
                                        std::span<const pc::Vec3> coords,
                                        std::span<const std::uint32_t> thing_ids,
                                        double threshold, std::size_t count);

/// Layer-normalized queries refined by L_dec rounds of deformable attention and
/// FFN (each followed by layer normalization), then the box FFN.
BoxPrediction detect_head(const QuerySet& queries, std::span<const attention::ScaleCloud> scales,
                          const DetHeadParams& p);

/// score = sigmoid(objectness) * max non-background class probability.
std::vector<pc::Box3D> decode_boxes(const BoxPrediction& pred, double score_threshold,
                                    std::size_t count = SIZE_MAX);

/// 1 for points inside any box (inclusive), else 0.
std::vector<std::uint32_t> pseudo_foreground_labels(std::span<const pc::Vec3> coords,
                                                    std::span<const pc::Box3D> boxes);

struct ForwardOutput {
  std::vector<StageOutput> stages;
  std::vector<Var> decoded;
  Var seg_logits;  // seg / multi
  Var fg_logits;   // det
  std::optional<QuerySet> queries;
  std::optional<BoxPrediction> boxes;
};

/// Multi-task model. Parameter names start with their group:
/// backbone, seg_block, seg_cls, fg_cls, det, uncertainty.
class PAttFormer {
 public:
  PAttFormer(ModelConfig cfg, std::uint64_t seed);

  /// `extra_refs` adds one query per position (noisy GT during training);
  /// its features come from the nearest full-resolution point.
  ForwardOutput forward(const pc::PointCloud& cloud, Task task, bool training,
                        std::span<const pc::Vec3> extra_refs = {}) const;

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }
  ad::BufferStore& buffers() { return buffers_; }
  const ad::BufferStore& buffers() const { return buffers_; }
  Var rho_seg() const { return rho_seg_; }
  Var rho_det() const { return rho_det_; }

  const BackboneParams& backbone() const { return backbone_; }
  const SegHeadParams& seg_head() const { return seg_; }
  const DetHeadParams& det_head() const { return det_; }

  static std::string group_of(const std::string& param_name);

 private:
  ModelConfig cfg_;
  ad::ParamStore params_;
  ad::BufferStore buffers_;
  BackboneParams backbone_;
  SegHeadParams seg_;
  ad::Linear fg_cls_;
  ad::Linear query_proj_;
  DetHeadParams det_;
  Var rho_seg_, rho_det_;
};

}  // namespace pattformer::model
