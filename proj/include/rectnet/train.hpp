#ifndef RECTNET_TRAIN_HPP_
#define RECTNET_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rectnet/analysis.hpp"
#include "rectnet/data.hpp"
#include "rectnet/init.hpp"
#include "rectnet/optim.hpp"

namespace rectnet {

struct TrainConfig {
  int epochs = 1;
  std::size_t batch_size = 128;
  OptimConfig optim;
  InitScheme scheme = InitScheme::he_forward();
  std::uint64_t seed = 0;
  int eval_every = 1;       // validation cadence in epochs; 0 disables
  bool freeze_slopes = false;
  double stall_threshold = 0.05;
  std::size_t stall_window = 50;
  double divergence_limit = 1e6;  // loss above this, or non-finite -> diverged
};

enum class RunStatus { Completed, Diverged, Stalled };

std::string to_string(RunStatus s);

struct EpochRecord {
  int epoch = 0;             // 1-based
  double train_loss = 0.0;   // mean over the epoch's batches (train mode)
  double train_top1 = 0.0;   // running top-1 error over the epoch's batches
  std::optional<double> val_loss;
  std::optional<double> val_top1;
  std::vector<double> grad_norms;      // per weighted layer, mean ||dE/dW||
  std::vector<double> slope_mean_abs;  // per parametric activation layer
  std::vector<double> slope_max_abs;
  StallVerdict verdict = StallVerdict::Healthy;
};

struct TrainRun {
  double initial_train_loss = 0.0;  // eval-mode loss before any update
  std::vector<EpochRecord> epochs;
  Params final_params;
  RunStatus status = RunStatus::Completed;
  double slope_frac_gt1 = 0.0;  // fraction of final slopes with |a| > 1
  std::size_t slope_count = 0;
};

/// Deterministic SGD training. Sub-streams are derived from config.seed:
/// weights (salt 1), dropout (salt 2), batch shuffling (salt 3, XORed with
/// the 1-based epoch). Non-finite or huge loss stops the run as Diverged.
/// A run finishing with a Diminishing stall verdict and less than 1%
/// improvement over the initial loss is reported Stalled.
TrainRun train(const NetworkSpec& spec, const Dataset& train_ds,
               const Dataset* val_ds, const TrainConfig& config);

struct EvalResult {
  double top1_error = 0.0;
  double mean_loss = 0.0;
};

/// Eval-mode argmax accuracy; argmax ties break toward the lowest index.
EvalResult evaluate(const Params& params, const NetworkSpec& spec,
                    const Dataset& ds);

struct GradCheckEntry {
  std::string name;  // e.g. "layer3.weight"
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  bool all_within(double tol) const { return max_rel_err <= tol; }
};

/// Compares the full-network analytic gradient of the scalar loss (weights,
/// biases, PReLU slopes) against central finite differences with the given
/// step, on a random batch drawn from `seed`. Relative error per parameter
/// is |a - n| / max(|a|, |n|, 1e-12). Dropout layers reuse one fixed
/// mask stream per loss evaluation so the compared function is smooth.
/// corrupt_slope_grads doubles the analytic slope gradients (detector
/// sanity hook).
GradCheckReport grad_check(const NetworkSpec& spec, std::uint64_t seed,
                           double step = 1e-5, std::size_t batch = 4,
                           bool corrupt_slope_grads = false);

/// CSV layout: epoch, split, loss, top1, grad_norm_l1.., slope_mean_l1..,
/// stall_verdict. One train row per epoch plus a val row when evaluated.
void write_train_csv(const TrainRun& run, std::ostream& os);

}  // namespace rectnet

#endif  // RECTNET_TRAIN_HPP_
