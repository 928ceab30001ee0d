#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "pattformer/ad/ops.hpp"

namespace pattformer::train {

using ad::Var;

/// Mean -log softmax(logits)[label] over rows whose label is not `ignore`.
Var cross_entropy(const Var& logits, std::span<const std::uint32_t> labels,
                  std::optional<std::uint32_t> ignore = std::nullopt);

/// Lovász-softmax over the classes present in `labels`, averaged.
Var lovasz_softmax(const Var& probs, std::span<const std::uint32_t> labels);

/// Gradient of the Lovász extension of the Jaccard loss for a sorted
/// ground-truth indicator.
std::vector<double> lovasz_grad(std::span<const std::uint8_t> sorted_fg);

/// Mean binary focal loss on an N x 1 logit column. Without alpha, no class
/// weighting is applied.
Var focal_loss(const Var& logits, std::span<const std::uint32_t> targets,
               std::optional<double> alpha = 0.25, double gamma = 2.0);

/// Mean elementwise smooth-L1 between pred and a constant target.
Var smooth_l1(const Var& pred, const ad::Tensor& target, double beta = 1.0);

/// exp(-rho) * loss + rho / 2 for one task.
Var uncertainty_weighted(const Var& loss, const Var& rho);

}  // namespace pattformer::train
