#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "pattformer/ad/modules.hpp"
#include "pattformer/pc/neighbors.hpp"

namespace pattformer::attention {

using ad::Var;

/// Key/value source for one scale level.
struct ScaleCloud {
  std::span<const pc::Vec3> coords;
  Var feats;                 // N_s x d_s
  const pc::VoxelGrid* grid; // built over coords with cell = radius
  double radius = 1.0;
  std::size_t window = 16;
};

struct DeformScaleParams {
  ad::Mlp2 offset;      // d_q -> 3 * heads
  Var w_q, w_k, w_v;    // d_q x d_q, d_s x d_q, d_s x d_q
  Var w_r;              // d_q x (heads * d_z)
  ad::Mlp2 phi;         // 3 -> d_z
};

struct DeformAttnParams {
  std::size_t d_q = 32;
  std::size_t heads = 4;
  std::size_t d_z = 8;
  std::vector<DeformScaleParams> scales;
  ad::Linear out;  // d_q -> d_q
};

DeformAttnParams make_deformable_attention(ad::ParamStore& store, const std::string& name,
                                           std::size_t d_q, std::size_t heads,
                                           std::span<const std::size_t> scale_dims,
                                           std::mt19937_64& rng);

/// Sampling positions ref_k + offset_{k,h} for one scale: Q x (3 * heads).
Var sampling_offsets(const Var& queries, const DeformScaleParams& p);

/// Per-scale head outputs concatenated, then averaged over scales (Q x d_q),
/// before the output projection.
Var deformable_attention_core(const Var& queries, std::span<const pc::Vec3> ref_points,
                              std::span<const ScaleCloud> scales, const DeformAttnParams& p);

/// queries + out(core). Reference points are not moved.
Var deformable_attention(const Var& queries, std::span<const pc::Vec3> ref_points,
                         std::span<const ScaleCloud> scales, const DeformAttnParams& p);

}  // namespace pattformer::attention
