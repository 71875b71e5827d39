#include "mvsd/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace mvsd {

AdamW::AdamW(std::vector<Parameter*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr >= 0) || !(cfg_.eps > 0) || !(cfg_.beta1 >= 0 && cfg_.beta1 < 1) || !(cfg_.beta2 >= 0 && cfg_.beta2 < 1)) {
    throw std::invalid_argument("invalid AdamW hyperparameters");
  }
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.shape(), 0.0);
    v_.emplace_back(p->value.shape(), 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto theta = params_[k]->value.data();
    const auto g = params_[k]->grad.data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] *= decay;
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void AdamW::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

PlateauScheduler::PlateauScheduler(std::size_t patience, double factor) : patience_(patience), factor_(factor) {
  if (patience == 0) throw std::invalid_argument("scheduler patience must be at least 1");
  if (!(factor > 0 && factor < 1)) throw std::invalid_argument("scheduler factor must lie in (0, 1)");
}

double PlateauScheduler::step(double metric, double lr) {
  if (metric > best_) {
    best_ = metric;
    bad_ = 0;
    return lr;
  }
  if (++bad_ < patience_) return lr;
  bad_ = 0;
  ++reductions_;
  return lr * factor_;
}

}  // namespace mvsd
