#include "pattformer/attention/deformable.hpp"

#include <string>

#include "pattformer/attention/patt.hpp"
#include "pattformer/common/errors.hpp"

namespace pattformer::attention {

using ad::Tensor;

DeformAttnParams make_deformable_attention(ad::ParamStore& store, const std::string& name,
                                           std::size_t d_q, std::size_t heads,
                                           std::span<const std::size_t> scale_dims,
                                           std::mt19937_64& rng) {
  if (heads == 0 || d_q % heads != 0) {
    throw ConfigError("deformable attention width " + std::to_string(d_q) +
                      " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (scale_dims.empty()) throw ConfigError("deformable attention needs at least one scale");
  using ad::Init;
  DeformAttnParams p;
  p.d_q = d_q;
  p.heads = heads;
  p.d_z = d_q / heads;
  for (std::size_t s = 0; s < scale_dims.size(); ++s) {
    const std::string base = name + ".scale" + std::to_string(s);
    DeformScaleParams sp;
    sp.offset = ad::make_mlp2(store, base + ".offset", d_q, d_q, 3 * heads, rng);
    // Sampling starts at the reference point.
    sp.offset.fc2.weight.mutable_value().fill(0.0);
    sp.w_q = ad::add_param(store, {base + ".w_q", {d_q, d_q}, Init::kGlorotUniform}, rng);
    sp.w_k = ad::add_param(store, {base + ".w_k", {scale_dims[s], d_q}, Init::kGlorotUniform}, rng);
    sp.w_v = ad::add_param(store, {base + ".w_v", {scale_dims[s], d_q}, Init::kGlorotUniform}, rng);
    sp.w_r = ad::add_param(store, {base + ".w_r", {d_q, heads * p.d_z}, Init::kGlorotUniform}, rng);
    sp.phi = ad::make_mlp2(store, base + ".phi", 3, p.d_z, p.d_z, rng);
    p.scales.push_back(std::move(sp));
  }
  p.out = ad::make_linear(store, name + ".out", d_q, d_q, rng);
  return p;
}

Var sampling_offsets(const Var& queries, const DeformScaleParams& p) { return p.offset(queries); }

namespace {

Var scale_output(const Var& queries, std::span<const pc::Vec3> ref_points, const ScaleCloud& sc,
                 const DeformScaleParams& sp, const DeformAttnParams& p) {
  if (sc.coords.empty()) throw InputError("deformable attention scale cloud is empty");
  if (sc.grid == nullptr || sc.grid->point_count() != sc.coords.size()) {
    throw InputError("deformable attention scale grid does not match its cloud");
  }
  if (sc.feats.rows() != sc.coords.size()) {
    throw ShapeError("scale features " + sc.feats.value().shape_str() + " vs " +
                     std::to_string(sc.coords.size()) + " coordinates");
  }
  const std::size_t nq = queries.rows();
  const std::size_t c = p.d_q / p.heads;

  const Var offsets = sampling_offsets(queries, sp);
  const Var q = ad::matmul(queries, sp.w_q);
  const Var k = ad::matmul(sc.feats, sp.w_k);
  const Var v = ad::matmul(sc.feats, sp.w_v);
  const Var qr = ad::matmul(queries, sp.w_r);

  Tensor ref = Tensor::matrix(nq, 3);
  for (std::size_t i = 0; i < nq; ++i) {
    for (int a = 0; a < 3; ++a) ref(i, a) = ref_points[i][a];
  }
  const Var ref_var = ad::constant(ref);

  std::vector<Var> heads;
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Var samp = ad::add(ref_var, ad::slice_cols(offsets, 3 * h, 3));
    std::vector<pc::Vec3> centers(nq);
    for (std::size_t i = 0; i < nq; ++i) {
      for (int a = 0; a < 3; ++a) {
        centers[i][a] = samp.value()(i, a);
      }
    }
    const pc::NeighborWindows win =
        pc::voxel_query_at(*sc.grid, sc.coords, centers, sc.radius, sc.window);
    Var bias;
    if (!win.indices.empty()) {
      const std::vector<std::size_t> owner = win.owners();
      Tensor key_pos = Tensor::matrix(win.indices.size(), 3);
      for (std::size_t e = 0; e < win.indices.size(); ++e) {
        for (int a = 0; a < 3; ++a) key_pos(e, a) = sc.coords[win.indices[e]][a];
      }
      const Var rel = sp.phi(ad::sub(ad::gather_rows(samp, owner), ad::constant(key_pos)));
      bias = ad::head_dot(ad::gather_rows(ad::slice_cols(qr, h * p.d_z, p.d_z), owner), rel, 1);
    }
    heads.push_back(windowed_attention(ad::slice_cols(q, h * c, c), ad::slice_cols(k, h * c, c),
                                       ad::slice_cols(v, h * c, c), bias, win, 1, true));
  }
  return ad::concat_cols(heads);
}

}  // namespace

Var deformable_attention_core(const Var& queries, std::span<const pc::Vec3> ref_points,
                              std::span<const ScaleCloud> scales, const DeformAttnParams& p) {
  if (queries.cols() != p.d_q) {
    throw ShapeError("queries " + queries.value().shape_str() + " vs width " +
                     std::to_string(p.d_q));
  }
  if (ref_points.size() != queries.rows()) {
    throw ShapeError("reference points do not match query count");
  }
  if (scales.size() != p.scales.size()) {
    throw InputError("expected " + std::to_string(p.scales.size()) + " scale clouds, got " +
                     std::to_string(scales.size()));
  }
  Var acc;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    const Var o = scale_output(queries, ref_points, scales[s], p.scales[s], p);
    acc = acc.defined() ? ad::add(acc, o) : o;
  }
  return ad::scale(acc, 1.0 / static_cast<double>(scales.size()));
}

Var deformable_attention(const Var& queries, std::span<const pc::Vec3> ref_points,
                         std::span<const ScaleCloud> scales, const DeformAttnParams& p) {
  return ad::add(queries, p.out(deformable_attention_core(queries, ref_points, scales, p)));
}

}  // namespace pattformer::attention
