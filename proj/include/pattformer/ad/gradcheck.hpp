#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pattformer/ad/param_store.hpp"

namespace pattformer::ad {

struct GradcheckFailure {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::vector<GradcheckFailure> failures;
  bool passed() const { return failures.empty(); }
};

/// Magnitude below which the relative error is measured against this floor
/// instead of the gradient itself.
inline constexpr double kGradcheckFloor = 1e-2;

/// Compares the tape gradient of a scalar objective with central differences
/// (f(x+eps) - f(x-eps)) / (2 eps) for every entry of every parameter.
/// rel_error = |a - n| / max(|a|, |n|, kGradcheckFloor).
/// Throws NumericalError when f is not finite.
GradcheckReport gradcheck(const std::function<Var()>& objective, ParamStore& params,
                          double eps = 1e-4, double tol = 1e-4);

}  // namespace pattformer::ad
