#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "mvsd/autograd.hpp"

namespace mvsd {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

/// Adam with decoupled weight decay: theta *= (1 - lr*wd) before the
/// bias-corrected moment update.
class AdamW {
 public:
  AdamW(std::vector<Parameter*> params, AdamWConfig cfg);

  void step();
  void zero_grad();
  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::size_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  std::vector<Parameter*> params_;
  AdamWConfig cfg_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

/// Multiplies the learning rate by `factor` once the monitored value (larger
/// is better) has failed to improve for `patience` consecutive epochs, then
/// restarts the count.
class PlateauScheduler {
 public:
  PlateauScheduler(std::size_t patience = 5, double factor = 0.1);

  /// Returns the learning rate to use next.
  double step(double metric, double lr);
  std::size_t bad_epochs() const { return bad_; }
  std::size_t reductions() const { return reductions_; }

 private:
  std::size_t patience_;
  double factor_;
  double best_ = -std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
  std::size_t reductions_ = 0;
};

}  // namespace mvsd
