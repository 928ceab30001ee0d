#pragma once

#include <random>
#include <string>

#include "pattformer/ad/ops.hpp"
#include "pattformer/ad/param_store.hpp"

namespace pattformer::ad {

/// Registers one parameter initialized per its spec.
Var add_param(ParamStore& store, const ParamSpec& spec, std::mt19937_64& rng);

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }
};

struct Mlp2 {
  Linear fc1, fc2;
  Var operator()(const Var& x) const {
    return mlp2(x, fc1.weight, fc1.bias, fc2.weight, fc2.bias);
  }
};

struct BatchNorm {
  Var gamma, beta;
  Tensor* running_mean = nullptr;
  Tensor* running_var = nullptr;
  Var operator()(const Var& x, bool training) const;
};

/// Parameters are named `<name>.weight` and `<name>.bias`.
Linear make_linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                   std::mt19937_64& rng);
Mlp2 make_mlp2(ParamStore& store, const std::string& name, std::size_t in, std::size_t hidden,
               std::size_t out, std::mt19937_64& rng);
/// gamma = 1, beta = 0; running mean 0 and variance 1 live in `buffers`.
BatchNorm make_batch_norm(ParamStore& store, BufferStore& buffers, const std::string& name,
                          std::size_t channels);

}  // namespace pattformer::ad
