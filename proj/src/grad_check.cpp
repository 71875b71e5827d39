#include "mvsd/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvsd {

namespace {

double evaluate(const LossFn& f) {
  Tape tape;
  const double v = f(tape).value().item();
  if (!std::isfinite(v)) throw std::runtime_error("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossFn& f, std::span<Parameter* const> params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  zero_grads(params);
  {
    Tape tape;
    Var loss = f(tape);
    if (!std::isfinite(loss.value().item())) throw std::runtime_error("grad_check: loss is not finite");
    tape.backward(loss);
  }

  GradCheckResult result;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double plus = evaluate(f);
      p->value[i] = saved - eps;
      const double minus = evaluate(f);
      p->value[i] = saved;

      const double numeric = (plus - minus) / (2.0 * eps);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.entries_checked;
      if (rel > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = rel;
        result.worst_parameter = p->name;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace mvsd
