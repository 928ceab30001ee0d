#include "pattformer/train/optim.hpp"

#include <cmath>
#include <numbers>

#include "pattformer/common/errors.hpp"

namespace pattformer::train {

AdamW::AdamW(ad::ParamStore& params, AdamWConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& [name, v] : params_.entries()) {
    m_.emplace_back(v.shape(), 0.0);
    v_.emplace_back(v.shape(), 0.0);
    count_.push_back(0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  auto& entries = params_.entries();
  if (entries.size() != m_.size()) throw InputError("AdamW: parameter store changed size");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    ad::Var& p = entries[i].second;
    if (!p.has_grad()) continue;
    // Bias correction counts the steps this parameter actually took part in.
    const double k = static_cast<double>(++count_[i]);
    const double c1 = 1.0 - std::pow(cfg_.beta1, k);
    const double c2 = 1.0 - std::pow(cfg_.beta2, k);
    auto theta = p.mutable_value().data();
    const auto g = p.grad().data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1, vhat = v[j] / c2;
      theta[j] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * theta[j]);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total, double lr_base, double lr_min) {
  if (step > total) throw InputError("cosine_lr: step beyond schedule");
  if (total == 0) return lr_base;
  const double frac = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_base - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace pattformer::train
