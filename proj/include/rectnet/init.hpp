#ifndef RECTNET_INIT_HPP_
#define RECTNET_INIT_HPP_

#include <cstdint>
#include <string>

#include "rectnet/layers.hpp"
#include "rectnet/net_spec.hpp"

namespace rectnet {

enum class FanDirection { Forward, Backward };

/// Weight initialization scheme. Gaussian draws throughout; the standard
/// deviation per weighted layer is
///   HeForward   sqrt(2 / n)          n = k^2 c (fan-in)
///   HeBackward  sqrt(2 / n_hat)      n_hat = k^2 d (fan-out)
///   Xavier      sqrt(1 / n)
///   FixedStd    sigma
///   PReluAware  sqrt(2 / ((1 + a^2) * fan)), fan chosen by direction.
struct InitScheme {
  enum class Kind { HeForward, HeBackward, Xavier, FixedStd, PReluAware };

  Kind kind = Kind::HeForward;
  double sigma = 0.0;  // FixedStd
  double a = 0.0;      // PReluAware initial slope
  FanDirection direction = FanDirection::Forward;  // PReluAware fan choice

  static InitScheme he_forward() { return {Kind::HeForward, 0, 0, {}}; }
  static InitScheme he_backward() { return {Kind::HeBackward, 0, 0, {}}; }
  static InitScheme xavier() { return {Kind::Xavier, 0, 0, {}}; }
  static InitScheme fixed(double sigma) {
    return {Kind::FixedStd, sigma, 0, {}};
  }
  static InitScheme prelu_aware(double a, FanDirection dir) {
    return {Kind::PReluAware, 0, a, dir};
  }

  /// CLI names: he-fwd | he-bwd | xavier | fixed:<sigma> |
  /// prelu:<a>:fwd | prelu:<a>:bwd.
  static InitScheme parse(const std::string& name);
  std::string name() const;
};

/// n = k^2 c: input connections per response. Errors on non-weighted layers.
std::size_t fan_in(const NetworkSpec& spec, std::size_t layer_index);
/// n_hat = k^2 d: output connections touched by one input unit.
std::size_t fan_out(const NetworkSpec& spec, std::size_t layer_index);

double init_std(const InitScheme& scheme, const WeightedLayer& layer);

/// Scheme std unless the spec file pinned a per-layer override.
double effective_std(const InitScheme& scheme, const WeightedLayer& layer);

/// Draws every weight from a zero-mean Gaussian with the scheme's std,
/// zeroes every bias, and sets every PReLU slope to its spec initial value.
/// One sequential stream seeded from `seed`; deterministic.
Params initialize_network(const NetworkSpec& spec, const InitScheme& scheme,
                          std::uint64_t seed);

}  // namespace rectnet

#endif  // RECTNET_INIT_HPP_
