#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pattformer/ad/gradcheck.hpp"

namespace pattformer::check {

/// One differentiable operator under a central-difference check. `run`
/// builds a seeded random instance and checks every parameter entry.
struct GradCase {
  std::string name;
  std::function<ad::GradcheckReport(double tol, std::uint64_t seed)> run;
};

/// Primitives, attention operators, losses and the full multi-task
/// objective of a tiny model, in that order.
const std::vector<GradCase>& gradient_suite();

/// Cases whose name equals `name`, or all of them for "all". Throws
/// InputError for an unknown name.
std::vector<GradCase> select_cases(const std::string& name);

}  // namespace pattformer::check
