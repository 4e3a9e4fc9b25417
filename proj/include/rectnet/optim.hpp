#ifndef RECTNET_OPTIM_HPP_
#define RECTNET_OPTIM_HPP_

#include <utility>
#include <vector>

#include "rectnet/layers.hpp"

namespace rectnet {

/// SGD with momentum. Weight decay is coupled (lambda * w added to the
/// gradient) and applies to weights and biases only -- never to PReLU
/// slopes, which decay would bias back toward plain ReLU.
struct OptimConfig {
  double lr = 0.01;           // epsilon
  double momentum = 0.9;      // mu, in [0, 1)
  double weight_decay = 0.0005;  // lambda, >= 0
  std::vector<std::pair<int, double>> lr_steps;  // (epoch, lr) switch points

  /// Learning rate in force at `epoch`: the last switch point whose epoch
  /// is <= the query, or the base lr before any switch.
  double lr_at(int epoch) const;
  void validate() const;
};

struct OptState {
  std::vector<LayerParams> velocity;  // shape-matched to params, zeroed
  static OptState like(const NetworkSpec& spec, const Params& params);
};

/// One update: for weights and biases v := mu v + eps (g + lambda w),
/// w := w - v; for slopes v := mu v + eps g, a := a - v (lambda forced to
/// zero). freeze_slopes skips slope updates entirely.
void sgd_step(Params& params, const Params& grads, OptState& state,
              const OptimConfig& config, int epoch,
              bool freeze_slopes = false);

}  // namespace rectnet

#endif  // RECTNET_OPTIM_HPP_
