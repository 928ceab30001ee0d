#include "pattformer/check/gradient_suite.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "pattformer/attention/deformable.hpp"
#include "pattformer/attention/patt.hpp"
#include "pattformer/common/errors.hpp"
#include "pattformer/pc/voxel_grid.hpp"
#include "pattformer/train/augment.hpp"
#include "pattformer/train/losses.hpp"
#include "pattformer/train/trainer.hpp"

namespace pattformer::check {

namespace {

using ad::Tensor;
using ad::Var;

constexpr double kEps = 1e-4;

Tensor uniform(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Values kept at least `gap` away from zero (kinks of relu and friends).
Tensor away_from_zero(std::size_t r, std::size_t c, std::mt19937_64& rng, double gap) {
  Tensor t = uniform(r, c, rng, gap, 1.0);
  std::bernoulli_distribution neg(0.5);
  for (double& v : t.data()) v = neg(rng) ? -v : v;
  return t;
}

std::vector<pc::Vec3> points(std::size_t n, std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<pc::Vec3> out(n);
  for (auto& p : out) p = {u(rng), u(rng), u(rng)};
  return out;
}

// Scalar objective <f, proj> for a random projection fixed per instance.
GradCase projected(const std::string& name, std::function<Var()> (*make)(ad::ParamStore&, std::mt19937_64&)) {
  return {name, [make](double tol, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            ad::ParamStore store;
            auto f = make(store, rng);
            Var probe = f();
            const Tensor proj = uniform(probe.rows(), probe.cols(), rng);
            auto objective = [&] { return ad::reduce_sum(ad::mul(f(), ad::constant(proj))); };
            return ad::gradcheck(objective, store, kEps, tol);
          }};
}

GradCase scalar(const std::string& name, std::function<Var()> (*make)(ad::ParamStore&, std::mt19937_64&)) {
  return {name, [make](double tol, std::uint64_t seed) {
            std::mt19937_64 rng(seed);
            ad::ParamStore store;
            auto f = make(store, rng);
            return ad::gradcheck(f, store, kEps, tol);
          }};
}

std::vector<std::uint32_t> labels(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::uint32_t> out(n);
  for (auto& l : out) l = static_cast<std::uint32_t>(rng() % k);
  return out;
}

// Shared state for cases that need more than parameters (index lists, grids).
template <class T>
std::shared_ptr<T> keep(T value) {
  return std::make_shared<T>(std::move(value));
}

std::vector<GradCase> build_suite() {
  std::vector<GradCase> s;
  // ---- primitives ----
  s.push_back(projected("matmul", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 4, rng)), b = st.add("b", uniform(4, 2, rng));
    return [=] { return ad::matmul(a, b); };
  }));
  s.push_back(projected("add", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 4, rng)), b = st.add("b", uniform(3, 4, rng));
    return [=] { return ad::add(a, ad::sub(b, ad::scale(a, 0.5))); };
  }));
  s.push_back(projected("mul", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 4, rng)), b = st.add("b", uniform(3, 4, rng));
    return [=] { return ad::mul(a, b); };
  }));
  s.push_back(projected("broadcast", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 4, rng)), b = st.add("b", uniform(1, 4, rng)), c = st.add("c", uniform(3, 1, rng));
    return [=] { return ad::mul_col(ad::add_row(a, b), c); };
  }));
  s.push_back(projected("scale", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(2, 3, rng));
    return [=] { return ad::add_scalar(ad::scale(a, -1.7), 0.3); };
  }));
  s.push_back(projected("concat", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 2, rng)), b = st.add("b", uniform(3, 3, rng)), c = st.add("c", uniform(2, 5, rng));
    return [=] { return ad::concat_rows({ad::concat_cols({a, b}), c}); };
  }));
  s.push_back(projected("layout", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(4, 6, rng));
    return [=] { return ad::repeat_cols(ad::reshape(ad::slice_cols(a, 1, 3), 2, 6), 2); };
  }));
  s.push_back(projected("gather_rows", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(5, 3, rng));
    auto idx = keep(std::vector<std::size_t>{4, 0, 0, 2, 4, 1});
    return [=] { return ad::gather_rows(a, *idx); };
  }));
  s.push_back(projected("pick", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(4, 3, rng));
    auto col = keep(std::vector<std::size_t>{2, 0, 1, 2});
    return [=] { return ad::pick(a, *col); };
  }));
  s.push_back(projected("scatter_max", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    // Distinct values so each maximum is unique.
    Tensor t = Tensor::matrix(6, 2);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.1 * static_cast<double>((i * 7) % 12) + 0.01 * uniform(1, 1, rng)[0];
    Var a = st.add("a", t);
    auto seg = keep(std::vector<std::size_t>{0, 1, 0, 2, 1, 0});
    return [=] { return ad::scatter_max(a, *seg, 3); };
  }));
  s.push_back(projected("segment_sum", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(6, 2, rng));
    auto off = keep(std::vector<std::size_t>{0, 2, 2, 6});
    return [=] { return ad::segment_sum(a, *off); };
  }));
  s.push_back(projected("segment_softmax", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(7, 2, rng, -2, 2));
    auto off = keep(std::vector<std::size_t>{0, 3, 4, 7});
    return [=] { return ad::segment_softmax(a, *off); };
  }));
  s.push_back(projected("head_ops", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 6, rng)), b = st.add("b", uniform(3, 6, rng)), v = st.add("v", uniform(3, 4, rng));
    return [=] { return ad::mul_heads(ad::head_dot(a, b, 2), v, 2); };
  }));
  s.push_back(projected("reductions", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Tensor t = Tensor::matrix(3, 4);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.13 * static_cast<double>((i * 5) % 12) + 0.01 * uniform(1, 1, rng)[0];
    Var a = st.add("a", t);
    return [=] {
      const Var rows = ad::concat_cols({ad::reduce_sum(a, 1), ad::reduce_mean(a, 1), ad::reduce_max(a, 1)});
      const Var cols = ad::concat_rows({ad::reduce_sum(a, 0), ad::reduce_mean(a, 0), ad::reduce_max(a, 0)});
      return ad::concat_cols({ad::reshape(rows, 1, 9), ad::reshape(cols, 1, 12),
                              ad::reduce_sum(a), ad::reduce_mean(a)});
    };
  }));
  s.push_back(projected("softmax", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 4, rng, -2, 2));
    return [=] { return ad::concat_cols({ad::softmax(a, 1), ad::log_softmax(a), ad::reshape(ad::softmax(a, 0), 3, 4)}); };
  }));
  s.push_back(projected("activations", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", away_from_zero(3, 4, rng, 0.05));
    return [=] {
      return ad::concat_cols({ad::relu(a), ad::gelu(a), ad::sigmoid(a), ad::log_sigmoid(a), ad::exp(a)});
    };
  }));
  s.push_back(projected("log", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var a = st.add("a", uniform(3, 3, rng, 0.2, 2.0));
    return [=] { return ad::log(a); };
  }));
  s.push_back(projected("smooth_l1_elementwise", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Tensor t = uniform(3, 4, rng, -2.5, 2.5);
    for (double& v : t.data()) {
      if (std::abs(std::abs(v) - 1.0) < 0.05) v *= 1.2;
    }
    Var a = st.add("a", t);
    return [=] { return ad::smooth_l1_elementwise(a, 1.0); };
  }));
  s.push_back(projected("batch_norm", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var x = st.add("x", uniform(6, 3, rng)), g = st.add("gamma", uniform(1, 3, rng, 0.5, 1.5)),
        b = st.add("beta", uniform(1, 3, rng));
    auto mean = keep(uniform(1, 3, rng)), var = keep(uniform(1, 3, rng, 0.5, 2));
    return [=] {
      // Separate running state per mode so the eval path is unaffected by training calls.
      Tensor m = *mean, v = *var;
      const Var train = ad::batch_norm(x, g, b, {&m, &v}, true);
      const Var eval = ad::batch_norm(x, g, b, {mean.get(), var.get()}, false);
      return ad::concat_cols({train, eval});
    };
  }));
  s.push_back(projected("layer_norm", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var x = st.add("x", uniform(4, 5, rng, -2, 2));
    return [=] { return ad::layer_norm(x); };
  }));
  s.push_back(projected("linear_mlp2", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var x = st.add("x", uniform(4, 3, rng)), w1 = st.add("w1", uniform(3, 5, rng)), b1 = st.add("b1", uniform(1, 5, rng)),
        w2 = st.add("w2", uniform(5, 2, rng)), b2 = st.add("b2", uniform(1, 2, rng));
    return [=] { return ad::concat_cols({ad::linear(x, w1, b1), ad::mlp2(x, w1, b1, w2, b2)}); };
  }));

  // ---- attention ----
  s.push_back(projected("rel_pos_encode", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    ad::Mlp2 phi = ad::make_mlp2(st, "phi", 3, 6, 4, rng);
    Var off = st.add("offsets", uniform(7, 3, rng));
    return [=] { return attention::rel_pos_encode(off, phi); };
  }));
  s.push_back(projected("attention_bias", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    auto pts = keep(points(12, rng, 1.0));
    const pc::VoxelGrid grid(*pts, 0.8);
    auto w = keep(pc::voxel_query(grid, *pts, pc::all_indices(12), 0.8, 6));
    auto owner = keep(w->owners());
    ad::Mlp2 phi = ad::make_mlp2(st, "phi", 3, 4, 4, rng);
    Var x = st.add("x", uniform(12, 6, rng)), wr = st.add("w_r", uniform(6, 8, rng));
    const Tensor off = attention::relative_offsets(*pts, *pts, *w);
    return [=] {
      return attention::attention_bias(x, wr, attention::rel_pos_encode(ad::constant(off), phi), *owner, 2);
    };
  }));
  auto layer_case = [](const std::string& name, bool full_layer, bool training) {
    return GradCase{name, [=](double tol, std::uint64_t seed) {
                      std::mt19937_64 rng(seed);
                      ad::ParamStore st;
                      ad::BufferStore buffers;
                      auto layer = attention::make_patt_layer(st, buffers, "l", {8, 8, 2, 0, 0}, rng);
                      for (auto& [n, v] : st.entries()) {
                        if (n.find(".bias") != std::string::npos || n.find("beta") != std::string::npos)
                          v.mutable_value() = uniform(v.rows(), v.cols(), rng, -0.3, 0.3);
                      }
                      const auto pts = points(16, rng, 1.0);
                      const pc::VoxelGrid grid(pts, 0.9);
                      const auto w = pc::voxel_query(grid, pts, pc::all_indices(16), 0.9, 8);
                      Var x = st.add("x", uniform(16, 8, rng));
                      const Tensor proj = uniform(16, 8, rng);
                      auto objective = [&] {
                        const Var y = full_layer ? attention::patt_layer(x, pts, w, layer, training)
                                                 : attention::neighborhood_attention(x, pts, w, layer);
                        return ad::reduce_sum(ad::mul(y, ad::constant(proj)));
                      };
                      return ad::gradcheck(objective, st, kEps, tol);
                    }};
  };
  s.push_back(layer_case("neighborhood_attention", false, true));
  s.push_back(layer_case("patt_layer", true, true));
  s.push_back(layer_case("patt_layer_eval", true, false));
  s.push_back({"deformable_attention", [](double tol, std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 ad::ParamStore st;
                 const std::vector<std::size_t> dims{5, 6};
                 auto p = attention::make_deformable_attention(st, "da", 8, 2, dims, rng);
                 for (auto& [n, v] : st.entries()) {
                   if (n.find(".bias") != std::string::npos) v.mutable_value() = uniform(v.rows(), v.cols(), rng, -0.3, 0.3);
                 }
                 for (auto& sc : p.scales) sc.offset.fc2.weight.mutable_value() = uniform(8, 6, rng, -0.5, 0.5);
                 // Radius and window cover every point so window membership
                 // stays fixed under perturbation.
                 const auto c0 = points(10, rng, 1.0), c1 = points(6, rng, 1.0);
                 const pc::VoxelGrid g0(c0, 20.0), g1(c1, 20.0);
                 Var f0 = st.add("feats0", uniform(10, 5, rng)), f1 = st.add("feats1", uniform(6, 6, rng));
                 const std::vector<attention::ScaleCloud> scales{{c0, f0, &g0, 20.0, 16}, {c1, f1, &g1, 20.0, 16}};
                 const auto ref = points(3, rng, 0.5);
                 Var q = st.add("queries", uniform(3, 8, rng));
                 const Tensor proj = uniform(3, 8, rng);
                 auto objective = [&] {
                   return ad::reduce_sum(ad::mul(attention::deformable_attention(q, ref, scales, p), ad::constant(proj)));
                 };
                 return ad::gradcheck(objective, st, kEps, tol);
               }});

  // ---- losses ----
  s.push_back(scalar("cross_entropy", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var z = st.add("logits", uniform(6, 4, rng, -2, 2));
    auto l = keep(labels(6, 4, rng));
    return [=] { return train::cross_entropy(z, *l); };
  }));
  s.push_back(scalar("lovasz_softmax", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var z = st.add("logits", uniform(7, 3, rng, -2, 2));
    auto l = keep(labels(7, 3, rng));
    return [=] { return train::lovasz_softmax(ad::softmax(z), *l); };
  }));
  s.push_back(scalar("focal_loss", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var z = st.add("logits", uniform(8, 1, rng, -3, 3));
    auto t = keep(labels(8, 2, rng));
    return [=] { return ad::add(train::focal_loss(z, *t), train::focal_loss(z, *t, std::nullopt, 1.5)); };
  }));
  s.push_back(scalar("smooth_l1", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Tensor t = uniform(2, 5, rng, -2.5, 2.5);
    for (double& v : t.data()) {
      if (std::abs(std::abs(v) - 1.0) < 0.05) v *= 1.2;
    }
    Var p = st.add("pred", t);
    return [=] { return train::smooth_l1(p, Tensor::matrix(2, 5)); };
  }));
  s.push_back(scalar("uncertainty_weighted", [](ad::ParamStore& st, std::mt19937_64& rng) -> std::function<Var()> {
    Var l = st.add("loss", uniform(1, 1, rng, 0.5, 2));
    Var r = st.add("rho", uniform(1, 1, rng, -1, 1));
    return [=] { return train::uncertainty_weighted(ad::mul(l, l), r); };
  }));
  s.push_back({"multitask", [](double tol, std::uint64_t seed) {
                 std::mt19937_64 rng(seed);
                 model::ModelConfig c;
                 c.stages = 2;
                 c.width = 8;
                 c.heads = 2;
                 c.layers = 1;
                 c.seg_layers = 1;
                 c.window = 8;
                 c.grid_size = 0.5;
                 c.radius = 0.4;
                 c.queries = 4;
                 c.dec_layers = 1;
                 c.dec_heads = 2;
                 c.dec_window = 8;
                 model::PAttFormer m(c, seed);
                 m.params().at("uncertainty.rho_seg").mutable_value()[0] = 0.3;
                 m.params().at("uncertainty.rho_det").mutable_value()[0] = -0.2;
                 pc::SceneSample scene;
                 scene.cloud = pc::make_cloud(points(64, rng, 1.5), 1);
                 scene.boxes.resize(2);
                 scene.boxes[0].center = {0.6, 0.5, 0.2};
                 scene.boxes[0].size = {1.2, 0.8, 1.0};
                 scene.boxes[0].yaw = 0.3;
                 scene.boxes[1].center = {-0.7, -0.6, -0.3};
                 scene.boxes[1].size = {0.8, 0.8, 1.4};
                 scene.boxes[1].yaw = -1.1;
                 scene.boxes[1].class_id = 1;
                 std::vector<std::uint32_t> lab(64);
                 for (std::size_t i = 0; i < 64; ++i) {
                   lab[i] = static_cast<std::uint32_t>(rng() % 2);
                   for (const auto& b : scene.boxes) {
                     if (pc::box_contains(b, scene.cloud.coords[i])) lab[i] = 2 + b.class_id;
                   }
                   scene.cloud.feats(i, 0) = 0.2 * lab[i];
                 }
                 scene.cloud.labels = lab;
                 train::TrainConfig cfg;
                 cfg.task = model::Task::kMulti;
                 const auto refs = train::noisy_gt_queries(scene.boxes, 0.3, rng);
                 auto objective = [&] {
                   const auto out = m.forward(scene.cloud, model::Task::kMulti, false, refs);
                   return train::compute_losses(m, out, scene, cfg).total;
                 };
                 return ad::gradcheck(objective, m.params(), kEps, tol);
               }});
  return s;
}

}  // namespace

const std::vector<GradCase>& gradient_suite() {
  static const std::vector<GradCase> suite = build_suite();
  return suite;
}

std::vector<GradCase> select_cases(const std::string& name) {
  if (name == "all") return gradient_suite();
  for (const auto& c : gradient_suite()) {
    if (c.name == name) return {c};
  }
  std::string known;
  for (const auto& c : gradient_suite()) known += (known.empty() ? "" : ", ") + c.name;
  throw InputError("unknown gradcheck op '" + name + "' (known: all, " + known + ")");
}

}  // namespace pattformer::check
