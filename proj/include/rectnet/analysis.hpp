#ifndef RECTNET_ANALYSIS_HPP_
#define RECTNET_ANALYSIS_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rectnet/init.hpp"
#include "rectnet/net_spec.hpp"

namespace rectnet {

/// Per-weighted-layer variance bookkeeping. With activation slope a and
/// weight variance Var[w] = std^2, each layer multiplies signal variance by
///   gain_fwd = 1/2 (1 + a^2) n Var[w]       (n = fan-in)
/// on the way forward and gradient variance by
///   gain_bwd = 1/2 (1 + a^2) n_hat Var[w]   (n_hat = fan-out)
/// on the way back. The cumulative columns are running products over layers
/// 2..l -- the first layer's factor is listed but excluded, matching the
/// L-layer variance products these gains come from. Pooling and dropout
/// contribute gain 1 analytically; the empirical probe reports whatever it
/// measures, so any pooling effect is surfaced rather than hidden.
struct VarianceRow {
  std::size_t ordinal = 0;  // 1-based weighted-layer index
  std::string kind;         // "conv" | "fc"
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  double std = 0.0;
  double gain_fwd = 0.0;
  double gain_bwd = 0.0;
  double cum_fwd = 1.0;
  double cum_bwd = 1.0;
  double emp_fwd = 0.0;  // empirical mean variance ratio (probe only)
  double emp_bwd = 0.0;
};

struct VarianceReport {
  std::vector<VarianceRow> rows;
  double forward_product = 1.0;   // product of gains over layers 2..L
  double backward_product = 1.0;
  std::size_t trials = 0;         // nonzero for empirical reports
  double activation_a = 0.0;
};

/// Analytic per-layer gains and cumulative products for the given scheme.
/// activation_a is 0 for ReLU, the slope for LReLU / PReLU at init, and 1
/// for identity activations.
VarianceReport predict_gains(const NetworkSpec& spec, const InitScheme& scheme,
                             double activation_a);

/// Infers a uniform activation_a from the spec's activation layers
/// (relu -> 0, lrelu/prelu -> slope, identity or no activations -> 1).
/// Empty when the spec mixes incompatible slopes.
std::optional<double> uniform_activation_slope(const NetworkSpec& spec);

/// Cumulative gradient-std ratio of a fixed-std initialization relative to
/// the fan-out He baseline: product over weighted layers 2..L of
/// fixed_std / sqrt(2 / n_hat_l). Layer 1 is excluded, matching the
/// propagated-gradient bookkeeping (std ratios, not variances).
double attenuation_vs_he(const NetworkSpec& spec, double fixed_std);

/// Monte-Carlo check of the analytic gains: per trial, a fresh network is
/// initialized, unit-Gaussian inputs are pushed forward (loss layer
/// excluded) and unit-Gaussian upstream gradients are pushed backward from
/// the loss boundary. The per-layer empirical ratio is the variance of a
/// weighted layer's response (or of the gradient at its input) divided by
/// the previous measurement point. The first layer has no rectifier below
/// it, so its forward denominator carries the same 1/2 (1 + a^2) convention
/// the analytic gain applies to layer 1; every other ratio is a plain
/// quotient of measured variances. Ratios are averaged across trials.
VarianceReport monte_carlo_probe(const NetworkSpec& spec,
                                 const InitScheme& scheme, std::size_t trials,
                                 std::size_t batch, std::uint64_t seed);

enum class StallVerdict { Healthy, Diminishing };

std::string to_string(StallVerdict v);

/// One optimization step's aggregated weight-gradient norms:
/// residual_norm = ||g - lambda w|| (the loss-contributed part) and
/// decay_norm = lambda ||w||, both over all weight tensors.
struct StallRecord {
  double residual_norm = 0.0;
  double decay_norm = 0.0;
};

StallRecord make_stall_record(const Params& loss_grads, const Params& params,
                              double lambda);

/// Diminishing-gradient diagnostic: flags Diminishing when
/// residual_norm / decay_norm stays below `threshold` for `window`
/// consecutive steps (the update is modulated only by weight decay). With
/// lambda = 0 the decay norms are meaningless, so the test falls back to a
/// trend check: Diminishing when the mean residual over the final window is
/// at most threshold times the mean over the initial window. Fewer than
/// `window` recorded steps shrink the window to the history length; at
/// least 2 steps are required.
StallVerdict stall_diagnostic(std::span<const StallRecord> steps,
                              double lambda, double threshold = 0.05,
                              std::size_t window = 50);

/// Tensor-level convenience: per-step total gradients (decay included) plus
/// the current parameter values.
StallVerdict stall_diagnostic(const std::vector<Params>& step_grads,
                              const Params& params, double lambda,
                              double threshold = 0.05,
                              std::size_t window = 50);

/// CSV layout: layer_index, layer_kind, fan_in, fan_out, std, gain_fwd,
/// gain_bwd, cum_fwd, cum_bwd [, emp_fwd, emp_bwd, trials].
void write_variance_csv(const VarianceReport& report, std::ostream& os);

}  // namespace rectnet

#endif  // RECTNET_ANALYSIS_HPP_
