#include "pattformer/attention/patt.hpp"

#include <cmath>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::attention {

using ad::Tensor;

void PAttDims::validate() const {
  if (heads == 0 || d_q % heads != 0) {
    throw ConfigError("attention width " + std::to_string(d_q) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (d == 0 || pos_dim() == 0 || pos_hidden() == 0) {
    throw ConfigError("attention widths must be positive");
  }
}

PAttLayerParams make_patt_layer(ad::ParamStore& store, ad::BufferStore& buffers,
                                const std::string& name, const PAttDims& dims,
                                std::mt19937_64& rng) {
  dims.validate();
  if (dims.d != dims.d_q) {
    throw ConfigError("PAtt layer '" + name + "' needs d == d_q for the residual path");
  }
  using ad::Init;
  PAttLayerParams p;
  p.dims = dims;
  p.w_q = ad::add_param(store, {name + ".w_q", {dims.d, dims.d_q}, Init::kGlorotUniform}, rng);
  p.w_k = ad::add_param(store, {name + ".w_k", {dims.d, dims.d_q}, Init::kGlorotUniform}, rng);
  p.w_v = ad::add_param(store, {name + ".w_v", {dims.d, dims.d_q}, Init::kGlorotUniform}, rng);
  p.w_r = ad::add_param(
      store, {name + ".w_r", {dims.d, dims.heads * dims.pos_dim()}, Init::kGlorotUniform}, rng);
  p.phi_z = ad::make_mlp2(store, name + ".phi_z", 3, dims.pos_hidden(), dims.pos_dim(), rng);
  p.norm1 = ad::make_batch_norm(store, buffers, name + ".norm1", dims.d);
  p.norm2 = ad::make_batch_norm(store, buffers, name + ".norm2", dims.d);
  p.ffn = ad::make_mlp2(store, name + ".ffn", dims.d, 4 * dims.d, dims.d, rng);
  return p;
}

Tensor relative_offsets(std::span<const pc::Vec3> query_coords,
                        std::span<const pc::Vec3> key_coords,
                        const pc::NeighborWindows& windows) {
  if (windows.query_count() != query_coords.size()) {
    throw InputError("window count " + std::to_string(windows.query_count()) +
                     " does not match " + std::to_string(query_coords.size()) + " queries");
  }
  Tensor out = Tensor::matrix(windows.indices.size(), 3);
  for (std::size_t q = 0; q < windows.query_count(); ++q) {
    for (std::size_t e = windows.offsets[q]; e < windows.offsets[q + 1]; ++e) {
      const std::size_t j = windows.indices[e];
      if (j >= key_coords.size()) throw InputError("window index out of range");
      for (int a = 0; a < 3; ++a) out(e, a) = query_coords[q][a] - key_coords[j][a];
    }
  }
  return out;
}

Var rel_pos_encode(const Var& offsets, const ad::Mlp2& phi_z) { return phi_z(offsets); }

Var attention_bias(const Var& x, const Var& w_r, const Var& rel,
                   std::span<const std::size_t> owner, std::size_t heads) {
  const Var xr = ad::gather_rows(ad::matmul(x, w_r), owner);
  return ad::head_dot(xr, ad::repeat_cols(rel, heads), heads);
}

Var windowed_attention(const Var& q, const Var& k, const Var& v, const Var& bias,
                       const pc::NeighborWindows& windows, std::size_t heads,
                       bool allow_empty) {
  if (windows.query_count() != q.rows()) {
    throw ShapeError("attention has " + std::to_string(q.rows()) + " queries but " +
                     std::to_string(windows.query_count()) + " windows");
  }
  if (!allow_empty) {
    for (std::size_t i = 0; i < windows.query_count(); ++i) {
      if (windows.offsets[i] == windows.offsets[i + 1]) {
        throw InputError("empty attention window for query " + std::to_string(i));
      }
    }
  }
  if (windows.indices.empty()) return ad::constant(Tensor::matrix(q.rows(), v.cols()));

  const std::vector<std::size_t> owner = windows.owners();
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(q.cols() / heads));
  Var logits = ad::scale(
      ad::head_dot(ad::gather_rows(q, owner), ad::gather_rows(k, windows.indices), heads),
      inv_scale);
  if (bias.defined()) logits = ad::add(logits, bias);
  const Var weights = ad::segment_softmax(logits, windows.offsets);
  const Var values = ad::gather_rows(v, windows.indices);
  return ad::segment_sum(ad::mul_heads(weights, values, heads), windows.offsets);
}

Var neighborhood_attention(const Var& x, std::span<const pc::Vec3> coords,
                           const pc::NeighborWindows& windows, const PAttLayerParams& p) {
  if (x.rows() != coords.size()) {
    throw ShapeError("features " + x.value().shape_str() + " vs " +
                     std::to_string(coords.size()) + " coordinates");
  }
  const Var rel = rel_pos_encode(ad::constant(relative_offsets(coords, coords, windows)), p.phi_z);
  const std::vector<std::size_t> owner = windows.owners();
  const Var bias = windows.indices.empty()
                       ? Var()
                       : attention_bias(x, p.w_r, rel, owner, p.dims.heads);
  return windowed_attention(ad::matmul(x, p.w_q), ad::matmul(x, p.w_k), ad::matmul(x, p.w_v),
                            bias, windows, p.dims.heads);
}

Var patt_layer(const Var& x, std::span<const pc::Vec3> coords,
               const pc::NeighborWindows& windows, const PAttLayerParams& p, bool training) {
  if (x.cols() != p.dims.d) {
    throw ShapeError("PAtt layer expects width " + std::to_string(p.dims.d) + ", got " +
                     x.value().shape_str());
  }
  const Var h = ad::add(x, neighborhood_attention(p.norm1(x, training), coords, windows, p));
  return ad::add(h, p.ffn(p.norm2(h, training)));
}

Var patt_block(const Var& x, std::span<const pc::Vec3> coords,
               const pc::NeighborWindows& windows, std::span<const PAttLayerParams> layers,
               bool training) {
  if (layers.empty()) throw ConfigError("PAtt block needs at least one layer");
  Var h = x;
  for (const auto& layer : layers) h = patt_layer(h, coords, windows, layer, training);
  return h;
}

Var patt_block(const Var& x, std::span<const pc::Vec3> coords,
               const std::function<pc::NeighborWindows()>& search,
               std::span<const PAttLayerParams> layers, bool training) {
  if (layers.empty()) throw ConfigError("PAtt block needs at least one layer");
  const pc::NeighborWindows windows = search();
  return patt_block(x, coords, windows, layers, training);
}

}  // namespace pattformer::attention
