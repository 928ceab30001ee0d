#include "pattformer/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pattformer/common/errors.hpp"

namespace pattformer::ad {

namespace {

double evaluate(const std::function<Var()>& objective) {
  NoGradGuard guard;
  const Var out = objective();
  if (out.value().size() != 1) {
    throw ShapeError("gradcheck: objective must be scalar, got " + out.value().shape_str());
  }
  const double v = out.item();
  if (!std::isfinite(v)) throw NumericalError("gradcheck: objective is not finite");
  return v;
}

}  // namespace

GradcheckReport gradcheck(const std::function<Var()>& objective, ParamStore& params, double eps,
                          double tol) {
  params.zero_grad();
  {
    const Var out = objective();
    if (!std::isfinite(out.item())) throw NumericalError("gradcheck: objective is not finite");
    backward(out);
  }

  GradcheckReport report;
  for (auto& [name, param] : params.entries()) {
    const Tensor analytic = param.has_grad() ? param.grad() : Tensor(param.shape(), 0.0);
    auto values = param.mutable_value().data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double f_plus = evaluate(objective);
      values[i] = original - eps;
      const double f_minus = evaluate(objective);
      values[i] = original;

      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradcheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      ++report.checked;
      if (!(rel < tol)) report.failures.push_back({name, i, a, numeric, rel});
    }
  }
  params.zero_grad();
  return report;
}

}  // namespace pattformer::ad
