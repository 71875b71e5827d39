#pragma once

#include <functional>
#include <span>
#include <string>

#include "mvsd/autograd.hpp"

namespace mvsd {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Builds a scalar loss on the given tape. Must bind every parameter it
/// depends on through Tape::param and be deterministic in the parameters.
using LossFn = std::function<Var(Tape&)>;

/// Compares reverse-mode gradients against central differences
/// (f(θ+eps) - f(θ-eps)) / 2eps for every entry of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8). Throws if f is not finite.
GradCheckResult grad_check(const LossFn& f, std::span<Parameter* const> params, double eps = 1e-5);

}  // namespace mvsd
