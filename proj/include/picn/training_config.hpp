#pragma once

#include <cstdint>
#include <stdexcept>

namespace picn {

/// Full-batch Adam settings plus the composite-loss weights.
/// k_g scales the governing (PDE residual) loss, k_r the boundary losses,
/// k_obs the observation loss (negative means "same as k_r").
struct TrainingConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 1000;
  double k_r = 0.5;
  double k_g = 0.5;
  double k_obs = -1.0;
  std::uint64_t seed = 1;
  int log_every = 100;

  double obs_weight() const { return k_obs < 0.0 ? k_r : k_obs; }

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainingConfig: epochs must be >= 1");
    if (!(learning_rate > 0.0))
      throw std::invalid_argument("TrainingConfig: learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      throw std::invalid_argument("TrainingConfig: betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("TrainingConfig: epsilon must be > 0");
    if (k_r < 0.0 || k_g < 0.0)
      throw std::invalid_argument("TrainingConfig: loss weights must be >= 0");
    if (k_r == 0.0 && k_g == 0.0 && obs_weight() == 0.0)
      throw std::invalid_argument("TrainingConfig: all loss weights are zero");
    if (log_every < 1) throw std::invalid_argument("TrainingConfig: log_every must be >= 1");
  }
};

/// Map a "governing : boundary" weight ratio a:b onto normalized weights
/// k_g = a/(a+b), k_r = b/(a+b).
inline void set_weight_ratio(TrainingConfig& cfg, double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0) || a + b <= 0.0)
    throw std::invalid_argument("set_weight_ratio: ratio parts must be >= 0 and not both 0");
  cfg.k_g = a / (a + b);
  cfg.k_r = b / (a + b);
}

}  // namespace picn
