#include "rectnet/analysis.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rectnet/csv.hpp"
#include "rectnet/layers.hpp"

namespace rectnet {

VarianceReport predict_gains(const NetworkSpec& spec, const InitScheme& scheme,
                             double activation_a) {
  VarianceReport report;
  report.activation_a = activation_a;
  const double act_factor = 0.5 * (1.0 + activation_a * activation_a);
  for (const WeightedLayer& wl : spec.weighted()) {
    VarianceRow row;
    row.ordinal = wl.ordinal;
    row.kind = wl.is_conv ? "conv" : "fc";
    row.fan_in = wl.fan_in();
    row.fan_out = wl.fan_out();
    row.std = effective_std(scheme, wl);
    const double var_w = row.std * row.std;
    row.gain_fwd = act_factor * static_cast<double>(row.fan_in) * var_w;
    row.gain_bwd = act_factor * static_cast<double>(row.fan_out) * var_w;
    if (wl.ordinal > 1) {  // layer 1 sits outside the L-layer products
      report.forward_product *= row.gain_fwd;
      report.backward_product *= row.gain_bwd;
    }
    row.cum_fwd = report.forward_product;
    row.cum_bwd = report.backward_product;
    report.rows.push_back(row);
  }
  return report;
}

std::optional<double> uniform_activation_slope(const NetworkSpec& spec) {
  std::optional<double> slope;
  for (const LayerSpec& l : spec.layers()) {
    const auto* act = std::get_if<ActSpec>(&l);
    if (!act) continue;
    double a = 0.0;
    switch (act->kind) {
      case ActKind::ReLU:
        a = 0.0;
        break;
      case ActKind::Identity:
        a = 1.0;
        break;
      default:
        a = act->a;
    }
    if (slope && *slope != a) return std::nullopt;
    slope = a;
  }
  // No activations at all: responses feed forward unchanged (linear case).
  return slope ? slope : std::optional<double>(1.0);
}

double attenuation_vs_he(const NetworkSpec& spec, double fixed_std) {
  if (!(fixed_std > 0)) {
    throw std::invalid_argument("fixed_std must be > 0");
  }
  double ratio = 1.0;
  for (const WeightedLayer& wl : spec.weighted()) {
    if (wl.ordinal == 1) continue;
    const double he_std =
        std::sqrt(2.0 / static_cast<double>(wl.fan_out()));
    ratio *= fixed_std / he_std;
  }
  return ratio;
}

namespace {

double tensor_variance(const Tensor& t) { return moments(t).variance; }

}  // namespace

VarianceReport monte_carlo_probe(const NetworkSpec& spec,
                                 const InitScheme& scheme, std::size_t trials,
                                 std::size_t batch, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  const std::optional<double> slope = uniform_activation_slope(spec);
  if (!slope) {
    throw std::invalid_argument(
        "monte_carlo_probe needs a uniform activation slope across the spec");
  }
  VarianceReport report = predict_gains(spec, scheme, *slope);
  report.trials = trials;

  const std::size_t L = spec.depth();
  std::vector<double> sum_fwd(L, 0.0), sum_bwd(L, 0.0);
  const ShapeCHW in_shape = spec.input_shape();
  const double act_factor = 0.5 * (1.0 + (*slope) * (*slope));

  for (std::size_t trial = 0; trial < trials; ++trial) {
    const std::uint64_t trial_seed = derive_seed(seed, trial);
    const Params params =
        initialize_network(spec, scheme, derive_seed(trial_seed, 0));
    RngStream rng(derive_seed(trial_seed, 1));
    const Tensor input = sample_gaussian(
        {batch, in_shape.c, in_shape.h, in_shape.w}, 0.0, 1.0, rng);

    // Forward, recording each weighted layer's response variance.
    std::vector<LayerCache> caches(spec.layer_count());
    std::vector<double> var_y(L, 0.0);
    Tensor cur = input;
    std::size_t w = 0;
    for (std::size_t i = 0; i + 1 < spec.layer_count(); ++i) {
      cur = layer_forward(spec, i, params, cur, Mode::Eval, nullptr,
                          caches[i]);
      if (is_weighted(spec.layer(i))) var_y[w++] = tensor_variance(cur);
    }

    const double mean_sq_input = [&] {
      const Moments m = moments(input);
      return m.variance + m.mean * m.mean;
    }();
    for (std::size_t l = 0; l < L; ++l) {
      // Layer 1's denominator carries the analytic first-layer convention:
      // there is no rectifier below it, so 2/(1+a^2) * E[x^2] stands in for
      // the previous response variance.
      const double denom =
          l == 0 ? mean_sq_input / act_factor : var_y[l - 1];
      sum_fwd[l] += var_y[l] / denom;
    }

    // Backward from injected unit-Gaussian gradients at the loss boundary,
    // recording the gradient variance at each weighted layer's input.
    const Tensor injected = sample_gaussian(cur.shape(), 0.0, 1.0, rng);
    const double var_injected = tensor_variance(injected);
    std::vector<double> var_dx(L, 0.0);
    Tensor grad = injected;
    Params grads = zero_params_like(spec, params);
    w = L;
    for (std::size_t i = spec.layer_count() - 1; i-- > 0;) {
      grad = layer_backward(spec, i, params, caches[i], grad,
                            grads.layers[i]);
      if (is_weighted(spec.layer(i))) var_dx[--w] = tensor_variance(grad);
    }
    for (std::size_t l = 0; l < L; ++l) {
      const double denom = l + 1 < L ? var_dx[l + 1] : var_injected;
      sum_bwd[l] += var_dx[l] / denom;
    }
  }

  for (std::size_t l = 0; l < L; ++l) {
    report.rows[l].emp_fwd = sum_fwd[l] / static_cast<double>(trials);
    report.rows[l].emp_bwd = sum_bwd[l] / static_cast<double>(trials);
  }
  return report;
}

std::string to_string(StallVerdict v) {
  return v == StallVerdict::Healthy ? "healthy" : "diminishing";
}

StallRecord make_stall_record(const Params& loss_grads, const Params& params,
                              double lambda) {
  double residual_sq = 0.0, weight_sq = 0.0;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const Tensor& w = params.layers[i].weight;
    const Tensor& g = loss_grads.layers[i].weight;
    if (w.empty()) continue;
    for (std::size_t j = 0; j < w.size(); ++j) {
      residual_sq += g[j] * g[j];
      weight_sq += w[j] * w[j];
    }
  }
  return StallRecord{std::sqrt(residual_sq), lambda * std::sqrt(weight_sq)};
}

StallVerdict stall_diagnostic(std::span<const StallRecord> steps,
                              double lambda, double threshold,
                              std::size_t window) {
  if (steps.size() < 2) {
    throw std::invalid_argument(
        "stall_diagnostic needs at least 2 recorded steps");
  }
  const std::size_t w = std::min(window, steps.size());
  if (lambda == 0.0) {
    // No decay to compare against: absolute-norm trend instead. The loss
    // gradient has collapsed when the trailing window is down to a small
    // fraction of the leading one.
    double head = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < w; ++i) head += steps[i].residual_norm;
    for (std::size_t i = steps.size() - w; i < steps.size(); ++i) {
      tail += steps[i].residual_norm;
    }
    return tail <= threshold * head ? StallVerdict::Diminishing
                                    : StallVerdict::Healthy;
  }
  std::size_t run = 0;
  for (const StallRecord& r : steps) {
    const bool below =
        r.decay_norm > 0.0 && r.residual_norm < threshold * r.decay_norm;
    run = below ? run + 1 : 0;
    if (run >= w) return StallVerdict::Diminishing;
  }
  return StallVerdict::Healthy;
}

StallVerdict stall_diagnostic(const std::vector<Params>& step_grads,
                              const Params& params, double lambda,
                              double threshold, std::size_t window) {
  std::vector<StallRecord> records;
  records.reserve(step_grads.size());
  for (const Params& total : step_grads) {
    // residual = g_total - lambda w, per element.
    double residual_sq = 0.0, weight_sq = 0.0;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      const Tensor& w = params.layers[i].weight;
      const Tensor& g = total.layers[i].weight;
      if (w.empty()) continue;
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double r = g[j] - lambda * w[j];
        residual_sq += r * r;
        weight_sq += w[j] * w[j];
      }
    }
    records.push_back(
        StallRecord{std::sqrt(residual_sq), lambda * std::sqrt(weight_sq)});
  }
  return stall_diagnostic(records, lambda, threshold, window);
}

void write_variance_csv(const VarianceReport& report, std::ostream& os) {
  os << "layer_index,layer_kind,fan_in,fan_out,std,gain_fwd,gain_bwd,"
        "cum_fwd,cum_bwd";
  const bool empirical = report.trials > 0;
  if (empirical) os << ",emp_fwd,emp_bwd,trials";
  os << '\n';
  for (const VarianceRow& r : report.rows) {
    os << r.ordinal << ',' << r.kind << ',' << r.fan_in << ',' << r.fan_out
       << ',' << csv_num(r.std) << ',' << csv_num(r.gain_fwd) << ','
       << csv_num(r.gain_bwd) << ',' << csv_num(r.cum_fwd) << ','
       << csv_num(r.cum_bwd);
    if (empirical) {
      os << ',' << csv_num(r.emp_fwd) << ',' << csv_num(r.emp_bwd) << ','
         << report.trials;
    }
    os << '\n';
  }
}

}  // namespace rectnet
