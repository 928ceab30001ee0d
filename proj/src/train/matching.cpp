#include "pattformer/train/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::train {

using ad::Tensor;

namespace {

// Shortest augmenting path assignment for rows <= cols. Returns the column
// assigned to each row.
std::vector<std::size_t> solve(const Tensor& a) {
  const std::size_t n = a.rows(), m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(m + 1, 0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

Tensor transpose(const Tensor& t) {
  Tensor out = Tensor::matrix(t.cols(), t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) out(j, i) = t(i, j);
  return out;
}

}  // namespace

Assignment hungarian_match(const Tensor& cost) {
  if (!cost.all_finite()) throw InputError("hungarian_match: non-finite cost");
  Assignment out;
  if (cost.rows() == 0 || cost.cols() == 0) return out;
  if (cost.rows() <= cost.cols()) {
    const auto r2c = solve(cost);
    for (std::size_t i = 0; i < r2c.size(); ++i) out.emplace_back(i, r2c[i]);
  } else {
    const auto c2r = solve(transpose(cost));
    for (std::size_t j = 0; j < c2r.size(); ++j) out.emplace_back(c2r[j], j);
    std::sort(out.begin(), out.end());
  }
  return out;
}

double assignment_cost(const Tensor& cost, const Assignment& a) {
  double s = 0;
  for (auto [i, j] : a) s += cost(i, j);
  return s;
}

Tensor match_cost(const model::BoxPrediction& pred, std::span<const pc::Box3D> gt,
                  std::size_t first, std::size_t count) {
  const std::size_t q_end = std::min(pred.size(), count == SIZE_MAX ? pred.size() : first + count);
  const std::size_t nq = q_end > first ? q_end - first : 0;
  const Tensor& logits = pred.class_logits.value();
  const std::size_t k = logits.cols();
  Tensor cost = Tensor::matrix(nq, gt.size());
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const std::size_t q = first + qi;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) mx = std::max(mx, logits(q, c));
    double z = 0;
    for (std::size_t c = 0; c < k; ++c) z += std::exp(logits(q, c) - mx);
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (gt[g].class_id + 1 >= k) throw InputError("box class id out of range");
      const double p = std::exp(logits(q, gt[g].class_id) - mx) / z;
      double l1 = 0;
      for (int a = 0; a < 3; ++a) {
        l1 += std::abs(pred.ref_points[q][a] + pred.center_offset.value()(q, a) - gt[g].center[a]);
        l1 += std::abs(std::exp(pred.log_size.value()(q, a)) - gt[g].size[a]);
      }
      cost(qi, g) = (1.0 - p) + l1;
    }
  }
  return cost;
}

DetectionTargets detection_targets(const model::BoxPrediction& pred,
                                   std::span<const pc::Box3D> gt, const Assignment& match,
                                   std::size_t num_det_classes) {
  const std::size_t nq = pred.size();
  DetectionTargets t;
  t.cls.assign(nq, static_cast<std::uint32_t>(num_det_classes));
  t.objectness.assign(nq, 0);
  Assignment sorted = match;
  std::sort(sorted.begin(), sorted.end());
  t.center = Tensor::matrix(sorted.size(), 3);
  t.log_size = Tensor::matrix(sorted.size(), 3);
  t.yaw = Tensor::matrix(sorted.size(), 2);
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    const auto [q, g] = sorted[r];
    if (q >= nq || g >= gt.size()) throw InputError("detection_targets: match index out of range");
    if (gt[g].class_id >= num_det_classes) throw InputError("box class id out of range");
    t.cls[q] = gt[g].class_id;
    t.objectness[q] = 1;
    t.matched.push_back(q);
    for (int a = 0; a < 3; ++a) {
      t.center(r, a) = gt[g].center[a] - pred.ref_points[q][a];
      t.log_size(r, a) = std::log(gt[g].size[a]);
    }
    t.yaw(r, 0) = std::sin(gt[g].yaw);
    t.yaw(r, 1) = std::cos(gt[g].yaw);
  }
  return t;
}

}  // namespace pattformer::train
