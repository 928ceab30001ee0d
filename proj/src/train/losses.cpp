#include "pattformer/train/losses.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "pattformer/common/errors.hpp"

namespace pattformer::train {

using ad::Tensor;

Var cross_entropy(const Var& logits, std::span<const std::uint32_t> labels,
                  std::optional<std::uint32_t> ignore) {
  if (labels.size() != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " +
                     logits.value().shape_str());
  }
  std::vector<std::size_t> rows, cols;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (ignore && labels[i] == *ignore) continue;
    if (labels[i] >= logits.cols()) {
      throw InputError("cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    }
    rows.push_back(i);
    cols.push_back(labels[i]);
  }
  if (rows.empty()) throw InputError("cross_entropy: every point is ignored");
  const Var lp = ad::log_softmax(rows.size() == labels.size() ? logits : ad::gather_rows(logits, rows));
  return ad::scale(ad::reduce_mean(ad::pick(lp, cols)), -1.0);
}

std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_fg) {
  const std::size_t n = sorted_fg.size();
  double gts = 0;
  for (auto f : sorted_fg) gts += f;
  std::vector<double> jac(n);
  double cum_fg = 0, cum_bg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cum_fg += sorted_fg[i];
    cum_bg += 1 - sorted_fg[i];
    jac[i] = 1.0 - (gts - cum_fg) / (gts + cum_bg);
  }
  for (std::size_t i = n; i-- > 1;) jac[i] -= jac[i - 1];
  return jac;
}

Var lovasz_softmax(const Var& probs, std::span<const std::uint32_t> labels) {
  const std::size_t n = probs.rows(), k = probs.cols();
  if (labels.size() != n) throw ShapeError("lovasz_softmax: label count does not match rows");
  std::vector<Var> per_class;
  for (std::size_t c = 0; c < k; ++c) {
    Tensor fg = Tensor::matrix(n, 1), sign = Tensor::matrix(n, 1);
    bool present = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] >= k) throw InputError("lovasz_softmax: label out of range");
      fg[i] = labels[i] == c ? 1.0 : 0.0;
      sign[i] = 1.0 - 2.0 * fg[i];
      present = present || labels[i] == c;
    }
    if (!present) continue;
    // error = |fg - p| = fg + (1 - 2 fg) p
    const Var err = ad::add(ad::constant(fg), ad::mul(ad::slice_cols(probs, c, 1), ad::constant(sign)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const Tensor& e = err.value();
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return e[a] > e[b]; });
    std::vector<std::uint8_t> sorted_fg(n);
    for (std::size_t i = 0; i < n; ++i) sorted_fg[i] = static_cast<std::uint8_t>(fg[order[i]]);
    const auto g = lovasz_grad(sorted_fg);
    per_class.push_back(ad::reduce_sum(
        ad::mul(ad::gather_rows(err, order), ad::constant(Tensor({n, 1}, g)))));
  }
  if (per_class.empty()) return ad::constant(Tensor::scalar(0.0));
  return ad::reduce_mean(ad::concat_rows(per_class));
}

Var focal_loss(const Var& logits, std::span<const std::uint32_t> targets, std::optional<double> alpha,
               double gamma) {
  const std::size_t n = logits.rows();
  if (logits.cols() != 1 || targets.size() != n) {
    throw ShapeError("focal_loss: logits " + logits.value().shape_str() + " vs " +
                     std::to_string(targets.size()) + " targets");
  }
  if (n == 0) return ad::constant(Tensor::scalar(0.0));
  Tensor sign = Tensor::matrix(n, 1), weight = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] > 1) throw InputError("focal_loss: targets must be 0 or 1");
    sign[i] = targets[i] ? 1.0 : -1.0;
    weight[i] = alpha ? (targets[i] ? *alpha : 1.0 - *alpha) : 1.0;
  }
  // p_t = sigmoid(s z), 1 - p_t = sigmoid(-s z)
  const Var sz = ad::mul(logits, ad::constant(sign));
  const Var log_pt = ad::log_sigmoid(sz);
  Var term = ad::mul(log_pt, ad::constant(weight));
  if (gamma != 0.0) term = ad::mul(term, ad::exp(ad::scale(ad::log_sigmoid(ad::scale(sz, -1.0)), gamma)));
  return ad::scale(ad::reduce_mean(term), -1.0);
}

Var smooth_l1(const Var& pred, const Tensor& target, double beta) {
  if (!pred.value().same_shape(target)) {
    throw ShapeError("smooth_l1: " + pred.value().shape_str() + " vs " + target.shape_str());
  }
  if (target.size() == 0) return ad::constant(Tensor::scalar(0.0));
  return ad::reduce_mean(ad::smooth_l1_elementwise(ad::sub(pred, ad::constant(target)), beta));
}

Var uncertainty_weighted(const Var& loss, const Var& rho) {
  return ad::add(ad::mul(ad::exp(ad::scale(rho, -1.0)), loss), ad::scale(rho, 0.5));
}

}  // namespace pattformer::train
