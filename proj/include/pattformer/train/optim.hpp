#pragma once

#include <vector>

#include "pattformer/ad/param_store.hpp"

namespace pattformer::train {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

/// Decoupled weight decay Adam. Parameters without a gradient in a step are
/// left untouched (neither moved nor decayed).
class AdamW {
 public:
  AdamW(ad::ParamStore& params, AdamWConfig cfg);

  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  ad::ParamStore& params_;
  AdamWConfig cfg_;
  std::vector<ad::Tensor> m_, v_;
  std::vector<std::size_t> count_;
  std::size_t t_ = 0;
};

/// lr_min + (lr_base - lr_min) (1 + cos(pi step / total)) / 2.
double cosine_lr(std::size_t step, std::size_t total, double lr_base, double lr_min);

}  // namespace pattformer::train
