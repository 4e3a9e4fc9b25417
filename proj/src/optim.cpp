#include "rectnet/optim.hpp"

#include <stdexcept>

namespace rectnet {

double OptimConfig::lr_at(int epoch) const {
  double eps = lr;
  for (const auto& [e, v] : lr_steps) {
    if (e <= epoch) eps = v;
  }
  return eps;
}

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) {
    throw std::invalid_argument("weight decay must be >= 0");
  }
  int prev = -1;
  for (const auto& [e, v] : lr_steps) {
    if (e <= prev) {
      throw std::invalid_argument("lr_steps epochs must be increasing");
    }
    if (!(v > 0.0)) throw std::invalid_argument("lr_steps rates must be > 0");
    prev = e;
  }
}

OptState OptState::like(const NetworkSpec& spec, const Params& params) {
  OptState s;
  s.velocity = zero_params_like(spec, params).layers;
  return s;
}

namespace {

void check_aligned(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string("sgd_step ") + what +
                                " shape mismatch: " + a.shape_str() + " vs " +
                                b.shape_str());
  }
}

void update_decayed(Tensor& param, const Tensor& grad, Tensor& vel,
                    double eps, double mu, double lambda) {
  check_aligned(param, grad, "grad");
  for (std::size_t i = 0; i < param.size(); ++i) {
    vel[i] = mu * vel[i] + eps * (grad[i] + lambda * param[i]);
    param[i] -= vel[i];
  }
}

void update_plain(Tensor& param, const Tensor& grad, Tensor& vel, double eps,
                  double mu) {
  check_aligned(param, grad, "grad");
  for (std::size_t i = 0; i < param.size(); ++i) {
    vel[i] = mu * vel[i] + eps * grad[i];
    param[i] -= vel[i];
  }
}

}  // namespace

void sgd_step(Params& params, const Params& grads, OptState& state,
              const OptimConfig& config, int epoch, bool freeze_slopes) {
  const double eps = config.lr_at(epoch);
  const double mu = config.momentum;
  const double lambda = config.weight_decay;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    LayerParams& p = params.layers[i];
    const LayerParams& g = grads.layers[i];
    LayerParams& v = state.velocity[i];
    if (!p.weight.empty()) {
      update_decayed(p.weight, g.weight, v.weight, eps, mu, lambda);
      update_decayed(p.bias, g.bias, v.bias, eps, mu, lambda);
    }
    if (!p.slopes.empty() && !freeze_slopes) {
      update_plain(p.slopes, g.slopes, v.slopes, eps, mu);
    }
  }
}

}  // namespace rectnet
