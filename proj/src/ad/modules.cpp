#include "pattformer/ad/modules.hpp"

namespace pattformer::ad {

Var add_param(ParamStore& store, const ParamSpec& spec, std::mt19937_64& rng) {
  Tensor t(spec.shape, 0.0);
  switch (spec.init) {
    case Init::kZeros:
      break;
    case Init::kOnes:
      t.fill(1.0);
      break;
    case Init::kGlorotUniform: {
      const std::size_t fan_in = spec.shape.empty() ? 1 : spec.shape[0];
      const std::size_t fan_out = spec.shape.size() < 2 ? 1 : spec.shape[1];
      const double s = glorot_bound(fan_in, fan_out);
      std::uniform_real_distribution<double> dist(-s, s);
      for (double& v : t.data()) v = dist(rng);
      break;
    }
  }
  return store.add(spec.name, std::move(t));
}

Var BatchNorm::operator()(const Var& x, bool training) const {
  return batch_norm(x, gamma, beta, BatchNormState{running_mean, running_var}, training);
}

Linear make_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                   std::mt19937_64& rng) {
  Linear l;
  l.weight = add_param(store, {name + ".weight", {in, out}, Init::kGlorotUniform}, rng);
  l.bias = add_param(store, {name + ".bias", {1, out}, Init::kZeros}, rng);
  return l;
}

Mlp2 make_mlp2(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out, std::mt19937_64& rng) {
  return {make_linear(store, name + ".fc1", in, hidden, rng),
          make_linear(store, name + ".fc2", hidden, out, rng)};
}

BatchNorm make_batch_norm(ParamStore& store, BufferStore& buffers, const std::string& name,
                          std::size_t channels) {
  std::mt19937_64 unused(0);
  BatchNorm bn;
  bn.gamma = add_param(store, {name + ".gamma", {1, channels}, Init::kOnes}, unused);
  bn.beta = add_param(store, {name + ".beta", {1, channels}, Init::kZeros}, unused);
  bn.running_mean = &buffers.add(name + ".running_mean", Tensor::matrix(1, channels, 0.0));
  bn.running_var = &buffers.add(name + ".running_var", Tensor::matrix(1, channels, 1.0));
  return bn;
}

}  // namespace pattformer::ad
