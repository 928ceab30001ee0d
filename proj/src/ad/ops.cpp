#include "pattformer/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "pattformer/common/errors.hpp"

namespace pattformer::ad {

namespace {

[[noreturn]] void shape_mismatch(const std::string& op, const Tensor& a, const Tensor& b) {
  throw ShapeError(op + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
}

void require_rank2(const std::string& op, const Tensor& a) {
  if (a.rank() != 2) throw ShapeError(op + ": expected a rank-2 array, got " + a.shape_str());
}

// Gradient buffer of a parent, or nullptr when the parent needs no gradient.
Tensor* grad_of(const Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const Tensor& value_of(const Node& self, std::size_t i) { return self.parents[i]->value; }

template <typename Fwd, typename Deriv>
Var unary(const Var& a, const char* name, Fwd fwd, Deriv deriv) {
  Tensor out(a.shape());
  auto src = a.value().data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = fwd(src[i]);
  return make_result(std::move(out), {a}, name, [deriv](const Node& self) {
    Tensor* ga = grad_of(self, 0);
    if (!ga) return;
    auto x = value_of(self, 0).data();
    auto y = self.value.data();
    auto g = self.grad.data();
    auto d = ga->data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * deriv(x[i], y[i]);
  });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double stable_log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void check_offsets(const std::string& op, std::span<const std::size_t> offsets, std::size_t rows) {
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows) {
    throw ShapeError(op + ": segment offsets must start at 0 and end at " + std::to_string(rows));
  }
  for (std::size_t s = 1; s < offsets.size(); ++s) {
    if (offsets[s] < offsets[s - 1]) throw ShapeError(op + ": segment offsets must be sorted");
  }
}

}  // namespace

Var constant(Tensor value) { return Var(std::move(value), false); }
Var parameter(Tensor value) { return Var(std::move(value), true); }

Var matmul(const Var& a, const Var& b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("matmul", A);
  require_rank2("matmul", B);
  if (A.cols() != B.rows()) shape_mismatch("matmul", A, B);
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor out = Tensor::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* o = &out(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      const double* brow = B.row(p).data();
      for (std::size_t j = 0; j < m; ++j) o[j] += aip * brow[j];
    }
  }
  return make_result(std::move(out), {a, b}, "matmul", [n, k, m](const Node& self) {
    const Tensor& A = value_of(self, 0);
    const Tensor& B = value_of(self, 1);
    const Tensor& G = self.grad;
    if (Tensor* ga = grad_of(self, 0)) {
      // dA = G B^T
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += G(i, j) * B(p, j);
          (*ga)(i, p) += acc;
        }
      }
    }
    if (Tensor* gb = grad_of(self, 1)) {
      // dB = A^T G
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A(i, p);
          double* dst = &(*gb)(p, 0);
          const double* g = G.row(i).data();
          for (std::size_t j = 0; j < m; ++j) dst[j] += aip * g[j];
        }
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) shape_mismatch("add", a.value(), b.value());
  Tensor out = a.value();
  auto d = out.data();
  auto s = b.value().data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
  return make_result(std::move(out), {a, b}, "add", [](const Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (Tensor* g = grad_of(self, p)) {
        auto d = g->data();
        auto s = self.grad.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
      }
    }
  });
}

Var sub(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) shape_mismatch("sub", a.value(), b.value());
  Tensor out = a.value();
  auto d = out.data();
  auto s = b.value().data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s[i];
  return make_result(std::move(out), {a, b}, "sub", [](const Node& self) {
    auto s = self.grad.data();
    if (Tensor* g = grad_of(self, 0)) {
      auto d = g->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
    if (Tensor* g = grad_of(self, 1)) {
      auto d = g->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (!a.value().same_shape(b.value())) shape_mismatch("mul", a.value(), b.value());
  Tensor out = a.value();
  auto d = out.data();
  auto s = b.value().data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= s[i];
  return make_result(std::move(out), {a, b}, "mul", [](const Node& self) {
    auto g = self.grad.data();
    auto av = value_of(self, 0).data();
    auto bv = value_of(self, 1).data();
    if (Tensor* ga = grad_of(self, 0)) {
      auto d = ga->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (Tensor* gb = grad_of(self, 1)) {
      auto d = gb->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var add_row(const Var& a, const Var& bias) {
  const Tensor& A = a.value();
  const Tensor& B = bias.value();
  require_rank2("add_row", A);
  if (B.rows() != 1 || B.cols() != A.cols()) shape_mismatch("add_row", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) += B(0, j);
  }
  return make_result(std::move(out), {a, bias}, "add_row", [](const Node& self) {
    const Tensor& G = self.grad;
    if (Tensor* ga = grad_of(self, 0)) {
      auto d = ga->data();
      auto s = G.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
    if (Tensor* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t j = 0; j < G.cols(); ++j) (*gb)(0, j) += G(i, j);
      }
    }
  });
}

Var mul_col(const Var& a, const Var& s) {
  const Tensor& A = a.value();
  const Tensor& S = s.value();
  require_rank2("mul_col", A);
  if (S.rows() != A.rows() || S.cols() != 1) shape_mismatch("mul_col", A, S);
  Tensor out = A;
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) *= S(i, 0);
  }
  return make_result(std::move(out), {a, s}, "mul_col", [](const Node& self) {
    const Tensor& G = self.grad;
    const Tensor& A = value_of(self, 0);
    const Tensor& S = value_of(self, 1);
    Tensor* ga = grad_of(self, 0);
    Tensor* gs = grad_of(self, 1);
    for (std::size_t i = 0; i < G.rows(); ++i) {
      for (std::size_t j = 0; j < G.cols(); ++j) {
        if (ga) (*ga)(i, j) += G(i, j) * S(i, 0);
        if (gs) (*gs)(i, 0) += G(i, j) * A(i, j);
      }
    }
  });
}

Var scale(const Var& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double value) {
  return unary(
      a, "add_scalar", [value](double x) { return x + value; },
      [](double, double) { return 1.0; });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2("concat_cols", p.value());
    if (p.rows() != n) shape_mismatch("concat_cols", parts[0].value(), p.value());
    total += p.cols();
  }
  Tensor out = Tensor::matrix(n, total);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + offset);
    }
    offset += p.cols();
  }
  return make_result(std::move(out), parts, "concat_cols", [](const Node& self) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      const std::size_t c = value_of(self, p).cols();
      if (Tensor* g = grad_of(self, p)) {
        for (std::size_t i = 0; i < g->rows(); ++i) {
          for (std::size_t j = 0; j < c; ++j) (*g)(i, j) += self.grad(i, offset + j);
        }
      }
      offset += c;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t m = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank2("concat_rows", p.value());
    if (p.cols() != m) shape_mismatch("concat_rows", parts[0].value(), p.value());
    total += p.rows();
  }
  std::vector<double> data;
  data.reserve(total * m);
  for (const Var& p : parts) {
    auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
  }
  return make_result(Tensor({total, m}, std::move(data)), parts, "concat_rows",
                     [](const Node& self) {
                       std::size_t offset = 0;
                       auto src = self.grad.data();
                       for (std::size_t p = 0; p < self.parents.size(); ++p) {
                         const std::size_t len = value_of(self, p).size();
                         if (Tensor* g = grad_of(self, p)) {
                           auto d = g->data();
                           for (std::size_t i = 0; i < len; ++i) d[i] += src[offset + i];
                         }
                         offset += len;
                       }
                     });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
  const Tensor& A = a.value();
  require_rank2("slice_cols", A);
  if (start + count > A.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of range for " + A.shape_str());
  }
  Tensor out = Tensor::matrix(A.rows(), count);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = A(i, start + j);
  }
  return make_result(std::move(out), {a}, "slice_cols", [start, count](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.rows(); ++i) {
        for (std::size_t j = 0; j < count; ++j) (*g)(i, start + j) += self.grad(i, j);
      }
    }
  });
}

Var reshape(const Var& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.value().size()) {
    throw ShapeError("reshape: cannot view " + a.value().shape_str() + " as [" +
                     std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
  Tensor out({rows, cols}, std::vector<double>(a.value().data().begin(), a.value().data().end()));
  return make_result(std::move(out), {a}, "reshape", [](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      auto d = g->data();
      auto s = self.grad.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
  });
}

Var repeat_cols(const Var& a, std::size_t times) {
  const Tensor& A = a.value();
  require_rank2("repeat_cols", A);
  const std::size_t c = A.cols();
  Tensor out = Tensor::matrix(A.rows(), c * times);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t t = 0; t < times; ++t) {
      for (std::size_t j = 0; j < c; ++j) out(i, t * c + j) = A(i, j);
    }
  }
  return make_result(std::move(out), {a}, "repeat_cols", [c, times](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->rows(); ++i) {
        for (std::size_t t = 0; t < times; ++t) {
          for (std::size_t j = 0; j < c; ++j) (*g)(i, j) += self.grad(i, t * c + j);
        }
      }
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> index) {
  const Tensor& A = a.value();
  require_rank2("gather_rows", A);
  const std::size_t c = A.cols();
  Tensor out = Tensor::matrix(index.size(), c);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= A.rows()) {
      throw InputError("gather_rows: row " + std::to_string(index[r]) + " out of range for " +
                       A.shape_str());
    }
    std::copy(A.row(index[r]).begin(), A.row(index[r]).end(), out.row(r).begin());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(std::move(out), {a}, "gather_rows", [idx = std::move(idx), c](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        double* dst = &(*g)(idx[r], 0);
        const double* src = self.grad.row(r).data();
        for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
      }
    }
  });
}

Var pick(const Var& a, std::span<const std::size_t> column) {
  const Tensor& A = a.value();
  require_rank2("pick", A);
  if (column.size() != A.rows()) {
    throw ShapeError("pick: " + std::to_string(column.size()) + " column indices for " +
                     A.shape_str());
  }
  Tensor out = Tensor::matrix(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    if (column[i] >= A.cols()) {
      throw InputError("pick: column " + std::to_string(column[i]) + " out of range for " +
                       A.shape_str());
    }
    out(i, 0) = A(i, column[i]);
  }
  std::vector<std::size_t> cols(column.begin(), column.end());
  return make_result(std::move(out), {a}, "pick", [cols = std::move(cols)](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < cols.size(); ++i) (*g)(i, cols[i]) += self.grad(i, 0);
    }
  });
}

Var scatter_max(const Var& a, std::span<const std::size_t> segment, std::size_t num_segments) {
  const Tensor& A = a.value();
  require_rank2("scatter_max", A);
  if (segment.size() != A.rows()) {
    throw ShapeError("scatter_max: " + std::to_string(segment.size()) +
                     " segment ids for " + A.shape_str());
  }
  const std::size_t c = A.cols();
  Tensor out = Tensor::matrix(num_segments, c, -std::numeric_limits<double>::infinity());
  // argmax keeps the first (lowest row) maximum for determinism
  std::vector<std::size_t> argmax(num_segments * c, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const std::size_t s = segment[i];
    if (s >= num_segments) {
      throw InputError("scatter_max: segment id " + std::to_string(s) + " >= " +
                       std::to_string(num_segments));
    }
    for (std::size_t j = 0; j < c; ++j) {
      if (A(i, j) > out(s, j)) {
        out(s, j) = A(i, j);
        argmax[s * c + j] = i;
      }
    }
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (argmax[s * c] == std::numeric_limits<std::size_t>::max() && c > 0) {
      throw InputError("scatter_max: segment " + std::to_string(s) + " is empty");
    }
  }
  return make_result(std::move(out), {a}, "scatter_max",
                     [argmax = std::move(argmax), c](const Node& self) {
                       if (Tensor* g = grad_of(self, 0)) {
                         for (std::size_t k = 0; k < argmax.size(); ++k) {
                           (*g)(argmax[k], k % c) += self.grad[k];
                         }
                       }
                     });
}

Var segment_sum(const Var& a, std::span<const std::size_t> offsets) {
  const Tensor& A = a.value();
  require_rank2("segment_sum", A);
  check_offsets("segment_sum", offsets, A.rows());
  const std::size_t segments = offsets.size() - 1;
  const std::size_t c = A.cols();
  Tensor out = Tensor::matrix(segments, c);
  for (std::size_t s = 0; s < segments; ++s) {
    double* o = &out(s, 0);
    for (std::size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
      const double* src = A.row(r).data();
      for (std::size_t j = 0; j < c; ++j) o[j] += src[j];
    }
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return make_result(std::move(out), {a}, "segment_sum", [off = std::move(off), c](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t s = 0; s + 1 < off.size(); ++s) {
        const double* src = self.grad.row(s).data();
        for (std::size_t r = off[s]; r < off[s + 1]; ++r) {
          double* dst = &(*g)(r, 0);
          for (std::size_t j = 0; j < c; ++j) dst[j] += src[j];
        }
      }
    }
  });
}

Var segment_softmax(const Var& a, std::span<const std::size_t> offsets) {
  const Tensor& A = a.value();
  require_rank2("segment_softmax", A);
  check_offsets("segment_softmax", offsets, A.rows());
  const std::size_t c = A.cols();
  Tensor out = Tensor::matrix(A.rows(), c);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (lo == hi) continue;
    for (std::size_t j = 0; j < c; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t r = lo; r < hi; ++r) mx = std::max(mx, A(r, j));
      double total = 0.0;
      for (std::size_t r = lo; r < hi; ++r) {
        out(r, j) = std::exp(A(r, j) - mx);
        total += out(r, j);
      }
      for (std::size_t r = lo; r < hi; ++r) out(r, j) /= total;
    }
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return make_result(std::move(out), {a}, "segment_softmax", [off = std::move(off), c](const Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    const Tensor& Y = self.value;
    const Tensor& G = self.grad;
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      for (std::size_t j = 0; j < c; ++j) {
        double dot = 0.0;
        for (std::size_t r = off[s]; r < off[s + 1]; ++r) dot += G(r, j) * Y(r, j);
        for (std::size_t r = off[s]; r < off[s + 1]; ++r) (*g)(r, j) += Y(r, j) * (G(r, j) - dot);
      }
    }
  });
}

Var head_dot(const Var& a, const Var& b, std::size_t heads) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_rank2("head_dot", A);
  if (!A.same_shape(B) || heads == 0 || A.cols() % heads != 0) shape_mismatch("head_dot", A, B);
  const std::size_t c = A.cols() / heads;
  Tensor out = Tensor::matrix(A.rows(), heads);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += A(i, h * c + j) * B(i, h * c + j);
      out(i, h) = acc;
    }
  }
  return make_result(std::move(out), {a, b}, "head_dot", [heads, c](const Node& self) {
    const Tensor& A = value_of(self, 0);
    const Tensor& B = value_of(self, 1);
    Tensor* ga = grad_of(self, 0);
    Tensor* gb = grad_of(self, 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      for (std::size_t h = 0; h < heads; ++h) {
        const double g = self.grad(i, h);
        for (std::size_t j = 0; j < c; ++j) {
          if (ga) (*ga)(i, h * c + j) += g * B(i, h * c + j);
          if (gb) (*gb)(i, h * c + j) += g * A(i, h * c + j);
        }
      }
    }
  });
}

Var mul_heads(const Var& w, const Var& v, std::size_t heads) {
  const Tensor& W = w.value();
  const Tensor& V = v.value();
  require_rank2("mul_heads", V);
  if (heads == 0 || W.rows() != V.rows() || W.cols() != heads || V.cols() % heads != 0) {
    shape_mismatch("mul_heads", W, V);
  }
  const std::size_t c = V.cols() / heads;
  Tensor out = V;
  for (std::size_t i = 0; i < V.rows(); ++i) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t j = 0; j < c; ++j) out(i, h * c + j) *= W(i, h);
    }
  }
  return make_result(std::move(out), {w, v}, "mul_heads", [heads, c](const Node& self) {
    const Tensor& W = value_of(self, 0);
    const Tensor& V = value_of(self, 1);
    Tensor* gw = grad_of(self, 0);
    Tensor* gv = grad_of(self, 1);
    for (std::size_t i = 0; i < V.rows(); ++i) {
      for (std::size_t h = 0; h < heads; ++h) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double g = self.grad(i, h * c + j);
          acc += g * V(i, h * c + j);
          if (gv) (*gv)(i, h * c + j) += g * W(i, h);
        }
        if (gw) (*gw)(i, h) += acc;
      }
    }
  });
}

Var reduce_sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_result(Tensor::scalar(total), {a}, "reduce_sum", [](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      const double s = self.grad[0];
      for (double& d : g->data()) d += s;
    }
  });
}

Var reduce_mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("reduce_mean: empty input");
  return scale(reduce_sum(a), 1.0 / n);
}

Var reduce_sum(const Var& a, int axis) {
  const Tensor& A = a.value();
  require_rank2("reduce_sum", A);
  if (axis != 0 && axis != 1) throw ShapeError("reduce_sum: axis must be 0 or 1");
  Tensor out = axis == 0 ? Tensor::matrix(1, A.cols()) : Tensor::matrix(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      (axis == 0 ? out(0, j) : out(i, 0)) += A(i, j);
    }
  }
  return make_result(std::move(out), {a}, "reduce_sum_axis", [axis](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->rows(); ++i) {
        for (std::size_t j = 0; j < g->cols(); ++j) {
          (*g)(i, j) += axis == 0 ? self.grad(0, j) : self.grad(i, 0);
        }
      }
    }
  });
}

Var reduce_mean(const Var& a, int axis) {
  const std::size_t n = axis == 0 ? a.rows() : a.cols();
  if (n == 0) throw ShapeError("reduce_mean: empty axis");
  return scale(reduce_sum(a, axis), 1.0 / static_cast<double>(n));
}

Var reduce_max(const Var& a, int axis) {
  const Tensor& A = a.value();
  require_rank2("reduce_max", A);
  if (axis != 0 && axis != 1) throw ShapeError("reduce_max: axis must be 0 or 1");
  if (A.empty()) throw ShapeError("reduce_max: empty input");
  const std::size_t outer = axis == 0 ? A.cols() : A.rows();
  const std::size_t inner = axis == 0 ? A.rows() : A.cols();
  auto at = [&](std::size_t o, std::size_t k) { return axis == 0 ? A(k, o) : A(o, k); };
  Tensor out = axis == 0 ? Tensor::matrix(1, outer) : Tensor::matrix(outer, 1);
  std::vector<std::size_t> arg(outer, 0);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 1; k < inner; ++k) {
      if (at(o, k) > at(o, arg[o])) arg[o] = k;
    }
    out[o] = at(o, arg[o]);
  }
  return make_result(std::move(out), {a}, "reduce_max", [arg = std::move(arg), axis](const Node& self) {
    if (Tensor* g = grad_of(self, 0)) {
      for (std::size_t o = 0; o < arg.size(); ++o) {
        if (axis == 0) {
          (*g)(arg[o], o) += self.grad[o];
        } else {
          (*g)(o, arg[o]) += self.grad[o];
        }
      }
    }
  });
}

Var softmax(const Var& a, int axis) {
  const Tensor& A = a.value();
  require_rank2("softmax", A);
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  const std::size_t outer = axis == 1 ? A.rows() : A.cols();
  const std::size_t inner = axis == 1 ? A.cols() : A.rows();
  auto index = [axis, &A](std::size_t o, std::size_t k) {
    return axis == 1 ? o * A.cols() + k : k * A.cols() + o;
  };
  Tensor out(A.shape());
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < inner; ++k) mx = std::max(mx, A[index(o, k)]);
    double total = 0.0;
    for (std::size_t k = 0; k < inner; ++k) {
      out[index(o, k)] = std::exp(A[index(o, k)] - mx);
      total += out[index(o, k)];
    }
    for (std::size_t k = 0; k < inner; ++k) out[index(o, k)] /= total;
  }
  return make_result(std::move(out), {a}, "softmax", [outer, inner, index](const Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t o = 0; o < outer; ++o) {
      double dot = 0.0;
      for (std::size_t k = 0; k < inner; ++k) dot += self.grad[index(o, k)] * self.value[index(o, k)];
      for (std::size_t k = 0; k < inner; ++k) {
        (*g)[index(o, k)] += self.value[index(o, k)] * (self.grad[index(o, k)] - dot);
      }
    }
  });
}

Var log_softmax(const Var& a) {
  const Tensor& A = a.value();
  require_rank2("log_softmax", A);
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : A.row(i)) mx = std::max(mx, v);
    double total = 0.0;
    for (double v : A.row(i)) total += std::exp(v - mx);
    const double lse = mx + std::log(total);
    for (std::size_t j = 0; j < A.cols(); ++j) out(i, j) = A(i, j) - lse;
  }
  return make_result(std::move(out), {a}, "log_softmax", [](const Node& self) {
    Tensor* g = grad_of(self, 0);
    if (!g) return;
    const Tensor& Y = self.value;
    for (std::size_t i = 0; i < Y.rows(); ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < Y.cols(); ++j) gs += self.grad(i, j);
      for (std::size_t j = 0; j < Y.cols(); ++j) {
        (*g)(i, j) += self.grad(i, j) - std::exp(Y(i, j)) * gs;
      }
    }
  });
}

Var relu(const Var& a) {
  return unary(
      a, "relu", [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var gelu(const Var& a) {
  return unary(
      a, "gelu", [](double x) { return x * normal_cdf(x); },
      [](double x, double) { return normal_cdf(x) + x * normal_pdf(x); });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid", [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var log_sigmoid(const Var& a) {
  return unary(
      a, "log_sigmoid", [](double x) { return stable_log_sigmoid(x); },
      [](double x, double) { return stable_sigmoid(-x); });
}

Var log(const Var& a) {
  return unary(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var smooth_l1_elementwise(const Var& a, double beta) {
  return unary(
      a, "smooth_l1",
      [beta](double x) {
        const double ax = std::abs(x);
        return ax < beta ? 0.5 * x * x / beta : ax - 0.5 * beta;
      },
      [beta](double x, double) {
        if (std::abs(x) < beta) return x / beta;
        return x > 0 ? 1.0 : -1.0;
      });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, const BatchNormState& state,
               bool training) {
  const Tensor& X = x.value();
  require_rank2("batch_norm", X);
  const std::size_t n = X.rows(), c = X.cols();
  if (gamma.rows() != 1 || gamma.cols() != c) shape_mismatch("batch_norm", X, gamma.value());
  if (beta.rows() != 1 || beta.cols() != c) shape_mismatch("batch_norm", X, beta.value());
  if (n == 0) throw ShapeError("batch_norm: empty input");

  Tensor mean = Tensor::matrix(1, c);
  Tensor var = Tensor::matrix(1, c);
  if (training) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) mean(0, j) += X(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) mean(0, j) /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double d = X(i, j) - mean(0, j);
        var(0, j) += d * d;
      }
    }
    for (std::size_t j = 0; j < c; ++j) var(0, j) /= static_cast<double>(n);
    if (state.running_mean && state.running_var && grad_enabled()) {
      const double unbias = n > 1 ? static_cast<double>(n) / static_cast<double>(n - 1) : 1.0;
      for (std::size_t j = 0; j < c; ++j) {
        (*state.running_mean)(0, j) =
            state.momentum * (*state.running_mean)(0, j) + (1.0 - state.momentum) * mean(0, j);
        (*state.running_var)(0, j) =
            state.momentum * (*state.running_var)(0, j) + (1.0 - state.momentum) * var(0, j) * unbias;
      }
    }
  } else {
    if (!state.running_mean || !state.running_var) {
      throw InputError("batch_norm: evaluation mode needs running statistics");
    }
    mean = *state.running_mean;
    var = *state.running_var;
  }

  Tensor inv_std = Tensor::matrix(1, c);
  for (std::size_t j = 0; j < c; ++j) inv_std(0, j) = 1.0 / std::sqrt(var(0, j) + state.eps);
  Tensor xhat = Tensor::matrix(n, c);
  Tensor out = Tensor::matrix(n, c);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      xhat(i, j) = (X(i, j) - mean(0, j)) * inv_std(0, j);
      out(i, j) = gamma.value()(0, j) * xhat(i, j) + beta.value()(0, j);
    }
  }
  return make_result(
      std::move(out), {x, gamma, beta}, "batch_norm",
      [xhat = std::move(xhat), inv_std = std::move(inv_std), training, n, c](const Node& self) {
        const Tensor& G = self.grad;
        const Tensor& gam = value_of(self, 1);
        if (Tensor* gg = grad_of(self, 1)) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) (*gg)(0, j) += G(i, j) * xhat(i, j);
          }
        }
        if (Tensor* gb = grad_of(self, 2)) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) (*gb)(0, j) += G(i, j);
          }
        }
        Tensor* gx = grad_of(self, 0);
        if (!gx) return;
        if (!training) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) (*gx)(i, j) += G(i, j) * gam(0, j) * inv_std(0, j);
          }
          return;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < c; ++j) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            sum_g += G(i, j);
            sum_gx += G(i, j) * xhat(i, j);
          }
          const double k = gam(0, j) * inv_std(0, j);
          for (std::size_t i = 0; i < n; ++i) {
            (*gx)(i, j) += k * (G(i, j) - inv_n * sum_g - xhat(i, j) * inv_n * sum_gx);
          }
        }
      });
}

Var layer_norm(const Var& x, double eps) {
  const Tensor& X = x.value();
  require_rank2("layer_norm", X);
  const std::size_t n = X.rows(), c = X.cols();
  if (c == 0) throw ShapeError("layer_norm: empty rows");
  Tensor xhat = Tensor::matrix(n, c);
  Tensor inv_std = Tensor::matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0, var = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += X(i, j);
    mean /= static_cast<double>(c);
    for (std::size_t j = 0; j < c; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= static_cast<double>(c);
    inv_std(i, 0) = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) xhat(i, j) = (X(i, j) - mean) * inv_std(i, 0);
  }
  Tensor out = xhat;
  return make_result(std::move(out), {x}, "layer_norm",
                     [xhat = std::move(xhat), inv_std = std::move(inv_std), n, c](const Node& self) {
                       Tensor* gx = grad_of(self, 0);
                       if (!gx) return;
                       const Tensor& G = self.grad;
                       const double inv_c = 1.0 / static_cast<double>(c);
                       for (std::size_t i = 0; i < n; ++i) {
                         double sum_g = 0.0, sum_gx = 0.0;
                         for (std::size_t j = 0; j < c; ++j) {
                           sum_g += G(i, j);
                           sum_gx += G(i, j) * xhat(i, j);
                         }
                         for (std::size_t j = 0; j < c; ++j) {
                           (*gx)(i, j) += inv_std(i, 0) *
                                          (G(i, j) - inv_c * sum_g - xhat(i, j) * inv_c * sum_gx);
                         }
                       }
                     });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  return add_row(matmul(x, weight), bias);
}

Var mlp2(const Var& x, const Var& w1, const Var& b1, const Var& w2, const Var& b2) {
  return linear(gelu(linear(x, w1, b1)), w2, b2);
}

}  // namespace pattformer::ad
