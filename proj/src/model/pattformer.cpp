#include "pattformer/model/pattformer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <string>

#include "pattformer/common/errors.hpp"
#include "pattformer/pc/sampling.hpp"
#include "pattformer/pc/voxel_grid.hpp"

namespace pattformer::model {

using ad::Tensor;

pc::NeighborWindows stage_windows(std::span<const pc::Vec3> coords, const ModelConfig& cfg,
                                  std::size_t stage) {
  const double r = cfg.stage_radius(stage);
  if (cfg.search == Search::kKnn) {
    return pc::knn_query(coords, pc::all_indices(coords.size()),
                         std::min(cfg.window, coords.size()));
  }
  const pc::VoxelGrid grid(coords, r);
  return pc::voxel_query(grid, coords, pc::all_indices(coords.size()), r, cfg.window);
}

std::vector<StageOutput> encode(const pc::PointCloud& cloud, const ModelConfig& cfg,
                                const BackboneParams& p, bool training) {
  if (cloud.empty()) throw InputError("cannot encode an empty point cloud");
  if (cloud.channels() != cfg.in_channels) {
    throw ShapeError("cloud has " + std::to_string(cloud.channels()) + " channels, model expects " +
                     std::to_string(cfg.in_channels));
  }
  std::vector<StageOutput> out;
  out.reserve(cfg.stages);
  {
    StageOutput s0;
    s0.coords = cloud.coords;
    s0.windows = stage_windows(s0.coords, cfg, 0);
    s0.feats = attention::patt_block(p.embed(ad::constant(cloud.feats)), s0.coords, s0.windows,
                                     p.enc[0], training);
    s0.map.assignment = pc::all_indices(s0.coords.size());
    s0.map.coarse_count = s0.coords.size();
    out.push_back(std::move(s0));
  }
  for (std::size_t s = 1; s < cfg.stages; ++s) {
    const StageOutput& prev = out.back();
    StageOutput st;
    auto [coords, map] = pc::pool_coords(prev.coords, cfg.stage_grid(s));
    if (coords.empty()) throw InputError("stage " + std::to_string(s) + " pooled to 0 points");
    st.coords = std::move(coords);
    st.map = std::move(map);
    st.windows = stage_windows(st.coords, cfg, s);
    const Var pooled = p.down[s](pc::pool_features(prev.feats, st.map));
    st.feats = attention::patt_block(pooled, st.coords, st.windows, p.enc[s], training);
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<Var> decode_unet(const std::vector<StageOutput>& stages, const BackboneParams& p,
                             bool training) {
  const std::size_t n = stages.size();
  std::vector<Var> decoded(n);
  decoded[n - 1] = stages[n - 1].feats;
  for (std::size_t s = n - 1; s-- > 0;) {
    const Var up = pc::grid_unpool(decoded[s + 1], stages[s + 1].map);
    const Var fused = p.fuse[s](ad::concat_cols({up, stages[s].feats}));
    decoded[s] = attention::patt_block(fused, stages[s].coords, stages[s].windows, p.dec[s], training);
  }
  return decoded;
}

Var segment_head(const Var& feats, std::span<const pc::Vec3> coords,
                 const pc::NeighborWindows& windows, const SegHeadParams& p, bool training) {
  return p.cls(attention::patt_block(feats, coords, windows, p.block, training));
}

std::vector<double> thing_scores(const Tensor& semantic_logits,
                                 std::span<const std::uint32_t> thing_ids) {
  const std::size_t n = semantic_logits.rows(), k = semantic_logits.cols();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, semantic_logits(i, c));
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(semantic_logits(i, c) - mx);
    for (std::uint32_t t : thing_ids) {
      if (t >= k) throw InputError("thing class id out of range");
      out[i] = std::max(out[i], std::exp(semantic_logits(i, t) - mx) / z);
    }
  }
  return out;
}

std::vector<std::size_t> select_queries(std::span<const double> scores,
                                        std::span<const pc::Vec3> coords, double threshold,
                                        std::size_t count) {
  const std::size_t n = coords.size();
  if (scores.size() != n) throw ShapeError("score count does not match point count");
  if (n < count) {
    throw InputError("cannot select " + std::to_string(count) + " queries from " +
                     std::to_string(n) + " points");
  }
  std::vector<std::size_t> fg, rest;
  for (std::size_t i = 0; i < n; ++i) (scores[i] > threshold ? fg : rest).push_back(i);
  if (fg.size() >= count) {
    std::vector<pc::Vec3> sub(fg.size());
    for (std::size_t i = 0; i < fg.size(); ++i) sub[i] = coords[fg[i]];
    std::vector<std::size_t> out;
    for (std::size_t local : pc::fps(sub, count, 0)) out.push_back(fg[local]);
    return out;
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> out = fg;
  out.insert(out.end(), rest.begin(),
             rest.begin() + static_cast<std::ptrdiff_t>(count - fg.size()));
  return out;
}

std::vector<std::size_t> select_queries(const Tensor& semantic_logits,
                                        std::span<const pc::Vec3> coords,
                                        std::span<const std::uint32_t> thing_ids,
                                        double threshold, std::size_t count) {
  const auto scores = thing_scores(semantic_logits, thing_ids);
  return select_queries(scores, coords, threshold, count);
}

BoxPrediction detect_head(const QuerySet& queries, std::span<const attention::ScaleCloud> scales,
                          const DetHeadParams& p) {
  if (p.layers.empty()) throw ConfigError("detection head needs at least one decoder layer");
  Var q = ad::layer_norm(queries.feats);
  for (const auto& layer : p.layers) {
    q = ad::layer_norm(attention::deformable_attention(q, queries.ref_points, scales, layer.attn));
    q = ad::layer_norm(ad::add(q, layer.ffn(q)));
  }
  const Var raw = p.box_ffn(q);
  const std::size_t k = p.num_det_classes + 1;
  BoxPrediction out;
  out.class_logits = ad::slice_cols(raw, 0, k);
  out.objectness = ad::slice_cols(raw, k, 1);
  out.center_offset = ad::slice_cols(raw, k + 1, 3);
  out.log_size = ad::slice_cols(raw, k + 4, 3);
  out.yaw = ad::slice_cols(raw, k + 7, 2);
  out.ref_points = queries.ref_points;
  return out;
}

std::vector<pc::Box3D> decode_boxes(const BoxPrediction& pred, double score_threshold,
                                    std::size_t count) {
  const std::size_t n = std::min(count, pred.size());
  const Tensor& cls = pred.class_logits.value();
  const std::size_t k = cls.cols() - 1;
  std::vector<pc::Box3D> out;
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c <= k; ++c) mx = std::max(mx, cls(i, c));
    double z = 0.0;
    for (std::size_t c = 0; c <= k; ++c) z += std::exp(cls(i, c) - mx);
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (cls(i, c) > cls(i, best)) best = c;
    }
    const double p_cls = std::exp(cls(i, best) - mx) / z;
    const double obj = 1.0 / (1.0 + std::exp(-pred.objectness.value()(i, 0)));
    const double score = obj * p_cls;
    if (!(score > score_threshold)) continue;
    pc::Box3D b;
    for (int a = 0; a < 3; ++a) {
      b.center[a] = pred.ref_points[i][a] + pred.center_offset.value()(i, a);
      b.size[a] = std::exp(pred.log_size.value()(i, a));
    }
    b.yaw = pc::normalize_yaw(std::atan2(pred.yaw.value()(i, 0), pred.yaw.value()(i, 1)));
    b.class_id = static_cast<std::uint32_t>(best);
    b.score = score;
    out.push_back(b);
  }
  return out;
}

std::vector<std::uint32_t> pseudo_foreground_labels(std::span<const pc::Vec3> coords,
                                                    std::span<const pc::Box3D> boxes) {
  std::vector<std::uint32_t> out(coords.size(), 0);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (const auto& b : boxes) {
      if (pc::box_contains(b, coords[i])) {
        out[i] = 1;
        break;
      }
    }
  }
  return out;
}

namespace {

std::vector<PAttLayerParams> make_block(ad::ParamStore& store, ad::BufferStore& buffers,
                                        const std::string& name, std::size_t layers,
                                        std::size_t width, std::size_t heads,
                                        std::mt19937_64& rng) {
  std::vector<PAttLayerParams> out;
  for (std::size_t l = 0; l < layers; ++l) {
    out.push_back(attention::make_patt_layer(store, buffers, name + ".l" + std::to_string(l),
                                             {width, width, heads, 0, 0}, rng));
  }
  return out;
}

std::size_t nearest_point(std::span<const pc::Vec3> coords, const pc::Vec3& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double d = pc::squared_distance(coords[i], p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

PAttFormer::PAttFormer(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t S = cfg_.stages;

  backbone_.embed = ad::make_linear(params_, "backbone.embed", cfg_.in_channels, cfg_.stage_width(0), rng);
  backbone_.enc.resize(S);
  backbone_.down.resize(S);
  backbone_.fuse.resize(S);
  backbone_.dec.resize(S);
  for (std::size_t s = 0; s < S; ++s) {
    const std::string tag = std::to_string(s);
    if (s > 0) {
      backbone_.down[s] = ad::make_linear(params_, "backbone.down" + tag, cfg_.stage_width(s - 1),
                                          cfg_.stage_width(s), rng);
    }
    backbone_.enc[s] = make_block(params_, buffers_, "backbone.enc" + tag, cfg_.layers,
                                  cfg_.stage_width(s), cfg_.heads, rng);
  }
  for (std::size_t s = S - 1; s-- > 0;) {
    const std::string tag = std::to_string(s);
    backbone_.fuse[s] = ad::make_linear(params_, "backbone.fuse" + tag,
                                        cfg_.stage_width(s + 1) + cfg_.stage_width(s),
                                        cfg_.stage_width(s), rng);
    backbone_.dec[s] = make_block(params_, buffers_, "backbone.dec" + tag, cfg_.layers,
                                  cfg_.stage_width(s), cfg_.heads, rng);
  }

  const std::size_t d0 = cfg_.stage_width(0);
  seg_.block = make_block(params_, buffers_, "seg_block", cfg_.seg_layers, d0, cfg_.heads, rng);
  seg_.cls = ad::make_linear(params_, "seg_cls", d0, cfg_.num_classes, rng);
  fg_cls_ = ad::make_linear(params_, "fg_cls", d0, 1, rng);

  const std::size_t dq = cfg_.width;
  query_proj_ = ad::make_linear(params_, "det.query_proj", d0, dq, rng);
  std::vector<std::size_t> scale_dims;
  for (std::size_t lvl : cfg_.detection_levels()) scale_dims.push_back(cfg_.stage_width(lvl));
  det_.num_det_classes = cfg_.num_det_classes;
  for (std::size_t l = 0; l < cfg_.dec_layers; ++l) {
    const std::string tag = "det.layer" + std::to_string(l);
    DecoderLayerParams layer;
    layer.attn = attention::make_deformable_attention(params_, tag + ".attn", dq, cfg_.dec_heads,
                                                      scale_dims, rng);
    layer.ffn = ad::make_mlp2(params_, tag + ".ffn", dq, 4 * dq, dq, rng);
    det_.layers.push_back(std::move(layer));
  }
  det_.box_ffn = ad::make_mlp2(params_, "det.box_ffn", dq, dq, cfg_.num_det_classes + 1 + 1 + 3 + 3 + 2, rng);

  rho_seg_ = params_.add("uncertainty.rho_seg", Tensor::matrix(1, 1, 0.0));
  rho_det_ = params_.add("uncertainty.rho_det", Tensor::matrix(1, 1, 0.0));
}

std::string PAttFormer::group_of(const std::string& param_name) {
  return param_name.substr(0, param_name.find('.'));
}

ForwardOutput PAttFormer::forward(const pc::PointCloud& cloud, Task task, bool training,
                                  std::span<const pc::Vec3> extra_refs) const {
  ForwardOutput out;
  out.stages = encode(cloud, cfg_, backbone_, training);
  out.decoded = decode_unet(out.stages, backbone_, training);
  const Var& full = out.decoded[0];
  const auto& coords = out.stages[0].coords;

  std::vector<double> scores;
  if (task == Task::kDet) {
    out.fg_logits = fg_cls_(full);
    scores.resize(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      scores[i] = 1.0 / (1.0 + std::exp(-out.fg_logits.value()(i, 0)));
    }
  } else {
    out.seg_logits = segment_head(full, coords, out.stages[0].windows, seg_, training);
    if (task == Task::kSeg) return out;
    scores = thing_scores(out.seg_logits.value(), cfg_.thing_classes);
  }

  QuerySet qs;
  qs.source = select_queries(scores, coords, cfg_.fg_threshold, cfg_.queries);
  qs.selected = qs.source.size();
  for (const auto& p : extra_refs) qs.source.push_back(nearest_point(coords, p));
  for (std::size_t i = 0; i < qs.source.size(); ++i) {
    qs.ref_points.push_back(i < qs.selected ? coords[qs.source[i]] : extra_refs[i - qs.selected]);
  }
  qs.feats = query_proj_(ad::gather_rows(full, qs.source));

  const auto levels = cfg_.detection_levels();
  std::vector<std::unique_ptr<pc::VoxelGrid>> grids;
  std::vector<attention::ScaleCloud> scales;
  for (std::size_t lvl : levels) {
    const double r = cfg_.stage_radius(lvl);
    grids.push_back(std::make_unique<pc::VoxelGrid>(out.stages[lvl].coords, r));
    scales.push_back({out.stages[lvl].coords, out.decoded[lvl], grids.back().get(), r,
                      cfg_.dec_window});
  }
  out.boxes = detect_head(qs, scales, det_);
  out.queries = std::move(qs);
  return out;
}

}  // namespace pattformer::model
