#pragma once

#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pattformer/ad/modules.hpp"
#include "pattformer/pc/neighbors.hpp"

namespace pattformer::attention {

using ad::Var;

struct PAttDims {
  std::size_t d = 32;   // input / output width
  std::size_t d_q = 32; // query/key/value width, split across heads
  std::size_t heads = 4;
  std::size_t d_z = 0;       // 0 means d_q / heads
  std::size_t z_hidden = 0;  // 0 means d_z

  std::size_t pos_dim() const { return d_z ? d_z : d_q / heads; }
  std::size_t pos_hidden() const { return z_hidden ? z_hidden : pos_dim(); }
  void validate() const;
};

/// One PAtt transformer layer. phi_z is shared by all heads; w_r maps a point
/// feature to one d_z vector per head.
struct PAttLayerParams {
  PAttDims dims;
  Var w_q, w_k, w_v;  // d x d_q
  Var w_r;            // d x (heads * d_z)
  ad::Mlp2 phi_z;     // 3 -> d_z
  ad::BatchNorm norm1, norm2;
  ad::Mlp2 ffn;       // d -> 4d -> d
};

PAttLayerParams make_patt_layer(ad::ParamStore& store, ad::BufferStore& buffers,
                                const std::string& name, const PAttDims& dims,
                                std::mt19937_64& rng);

/// Rows p_owner - p_j for every flattened window entry (E x 3, constant).
ad::Tensor relative_offsets(std::span<const pc::Vec3> query_coords,
                            std::span<const pc::Vec3> key_coords,
                            const pc::NeighborWindows& windows);

/// r = phi_z(p_i - p_j), row-wise over an E x 3 input.
Var rel_pos_encode(const Var& offsets, const ad::Mlp2& phi_z);

/// b_{i,j,h} = (x_i W_r)_h . r_{i,j}. `owner` maps each of the E rows of
/// `rel` to its query row of `x`; the result is E x heads.
Var attention_bias(const Var& x, const Var& w_r, const Var& rel,
                   std::span<const std::size_t> owner, std::size_t heads);

/// Scaled dot-product attention of each query row over its window of key
/// rows, with an additive per-entry bias (E x heads). Empty windows produce
/// zero rows when `allow_empty`, otherwise InputError.
Var windowed_attention(const Var& q, const Var& k, const Var& v, const Var& bias,
                       const pc::NeighborWindows& windows, std::size_t heads,
                       bool allow_empty = false);

/// Multi-head neighborhood self-attention (N x d_q).
Var neighborhood_attention(const Var& x, std::span<const pc::Vec3> coords,
                           const pc::NeighborWindows& windows, const PAttLayerParams& p);

/// x + Attn(BN1(x)), then + FFN(BN2(.)).
Var patt_layer(const Var& x, std::span<const pc::Vec3> coords,
               const pc::NeighborWindows& windows, const PAttLayerParams& p, bool training);

/// L layers sharing one set of windows.
Var patt_block(const Var& x, std::span<const pc::Vec3> coords,
               const pc::NeighborWindows& windows, std::span<const PAttLayerParams> layers,
               bool training);

/// Runs `search` once and feeds its windows to every layer.
Var patt_block(const Var& x, std::span<const pc::Vec3> coords,
               const std::function<pc::NeighborWindows()>& search,
               std::span<const PAttLayerParams> layers, bool training);

}  // namespace pattformer::attention
