#pragma once

// Plain-loop reference arithmetic shared by the oracle tests.

#include <cmath>
#include <vector>

#include "pattformer/ad/modules.hpp"
#include "pattformer/pc/point_cloud.hpp"

namespace pattformer::testing {

using Vec = std::vector<double>;

inline double gelu_ref(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Vec vecmat(const Vec& x, const ad::Tensor& w) {
  Vec out(w.cols(), 0.0);
  for (std::size_t i = 0; i < w.rows(); ++i)
    for (std::size_t j = 0; j < w.cols(); ++j) out[j] += x[i] * w(i, j);
  return out;
}

inline Vec add_bias(Vec x, const ad::Tensor& b) {
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += b[j];
  return x;
}

inline Vec linear_ref(const Vec& x, const ad::Linear& l) {
  return add_bias(vecmat(x, l.weight.value()), l.bias.value());
}

inline Vec mlp_ref(const Vec& x, const ad::Mlp2& m) {
  Vec h = linear_ref(x, m.fc1);
  for (double& v : h) v = gelu_ref(v);
  return linear_ref(h, m.fc2);
}

inline Vec layer_norm_ref(const Vec& x, double eps = 1e-5) {
  double mean = 0, var = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / std::sqrt(var + eps);
  return out;
}

inline Vec row_of(const ad::Tensor& t, std::size_t r) {
  Vec v(t.cols());
  for (std::size_t j = 0; j < t.cols(); ++j) v[j] = t(r, j);
  return v;
}

inline Vec diff(const pc::Vec3& a, const pc::Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

inline double dot(const Vec& a, const Vec& b, std::size_t off, std::size_t len,
                  std::size_t boff = 0) {
  double s = 0;
  for (std::size_t i = 0; i < len; ++i) s += a[off + i] * b[boff + i];
  return s;
}

inline Vec plus(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

}  // namespace pattformer::testing
