#include "rectnet/train.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rectnet/csv.hpp"

namespace rectnet {

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed:
      return "completed";
    case RunStatus::Diverged:
      return "diverged";
    case RunStatus::Stalled:
      return "stalled";
  }
  return "?";
}

namespace {

std::size_t argmax_row(const double* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (row[j] > row[best]) best = j;  // ties keep the lowest index
  }
  return best;
}

std::size_t count_correct(const Tensor& logits,
                          const std::vector<std::size_t>& labels) {
  const std::size_t classes = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (argmax_row(logits.data() + n * classes, classes) == labels[n]) {
      ++correct;
    }
  }
  return correct;
}

double tensor_norm(const Tensor& t) {
  double sq = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) sq += t[i] * t[i];
  return std::sqrt(sq);
}

void check_dataset(const NetworkSpec& spec, const Dataset& ds,
                   const char* which) {
  const ShapeCHW in = spec.input_shape();
  if (ds.inputs.rank() != 4 || ds.inputs.dim(1) != in.c ||
      ds.inputs.dim(2) != in.h || ds.inputs.dim(3) != in.w) {
    throw std::invalid_argument(
        std::string(which) + " dataset shape " + ds.inputs.shape_str() +
        " does not match spec input " + in.str());
  }
  if (ds.class_count > spec.classes()) {
    throw std::invalid_argument(std::string(which) + " dataset has " +
                                std::to_string(ds.class_count) +
                                " classes but the spec emits " +
                                std::to_string(spec.classes()));
  }
}

}  // namespace

EvalResult evaluate(const Params& params, const NetworkSpec& spec,
                    const Dataset& ds) {
  check_dataset(spec, ds, "eval");
  constexpr std::size_t kEvalBatch = 256;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < ds.count(); start += kEvalBatch) {
    const std::size_t end = std::min(ds.count(), start + kEvalBatch);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    const Tensor x = gather_inputs(ds, idx);
    const std::vector<std::size_t> y = gather_labels(ds, idx);
    const ForwardPass pass = network_forward(spec, params, x, Mode::Eval);
    const LossResult loss = softmax_xent(pass.logits, y);
    loss_sum += loss.loss * static_cast<double>(idx.size());
    correct += count_correct(pass.logits, y);
  }
  const double n = static_cast<double>(ds.count());
  return EvalResult{1.0 - static_cast<double>(correct) / n, loss_sum / n};
}

TrainRun train(const NetworkSpec& spec, const Dataset& train_ds,
               const Dataset* val_ds, const TrainConfig& config) {
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  config.optim.validate();
  check_dataset(spec, train_ds, "train");
  if (val_ds) check_dataset(spec, *val_ds, "val");

  TrainRun run;
  Params params =
      initialize_network(spec, config.scheme, derive_seed(config.seed, 1));
  OptState state = OptState::like(spec, params);
  RngStream dropout_rng(derive_seed(config.seed, 2));
  const std::uint64_t shuffle_seed = derive_seed(config.seed, 3);

  run.initial_train_loss = evaluate(params, spec, train_ds).mean_loss;

  const std::vector<WeightedLayer> weighted = spec.weighted();
  const std::vector<std::size_t> act_indices = spec.parametric_act_indices();
  const double lambda = config.optim.weight_decay;

  std::vector<StallRecord> stall_records;
  bool diverged = false;

  for (int epoch = 1; epoch <= config.epochs && !diverged; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t seen = 0, correct = 0;
    std::vector<double> grad_norm_sum(weighted.size(), 0.0);
    std::size_t steps = 0;

    for (const std::vector<std::size_t>& batch :
         batch_indices(train_ds.count(), config.batch_size, shuffle_seed,
                       static_cast<std::uint64_t>(epoch))) {
      const Tensor x = gather_inputs(train_ds, batch);
      const std::vector<std::size_t> y = gather_labels(train_ds, batch);
      const ForwardPass pass =
          network_forward(spec, params, x, Mode::Train, &dropout_rng);
      const LossResult loss = softmax_xent(pass.logits, y);
      if (!std::isfinite(loss.loss) || loss.loss > config.divergence_limit) {
        diverged = true;
        break;
      }
      loss_sum += loss.loss;
      correct += count_correct(pass.logits, y);
      seen += batch.size();
      ++steps;

      const Params grads =
          network_backward(spec, params, pass, loss.grad_logits);
      for (std::size_t l = 0; l < weighted.size(); ++l) {
        grad_norm_sum[l] +=
            tensor_norm(grads.layers[weighted[l].spec_index].weight);
      }
      stall_records.push_back(make_stall_record(grads, params, lambda));
      sgd_step(params, grads, state, config.optim, epoch,
               config.freeze_slopes);
    }

    if (steps == 0) break;
    rec.train_loss = loss_sum / static_cast<double>(steps);
    rec.train_top1 = 1.0 - static_cast<double>(correct) /
                               static_cast<double>(seen);
    rec.grad_norms.resize(weighted.size());
    for (std::size_t l = 0; l < weighted.size(); ++l) {
      rec.grad_norms[l] = grad_norm_sum[l] / static_cast<double>(steps);
    }
    for (std::size_t i : act_indices) {
      const Tensor& slopes = params.layers[i].slopes;
      double mean = 0.0, mx = 0.0;
      for (std::size_t j = 0; j < slopes.size(); ++j) {
        mean += std::fabs(slopes[j]);
        mx = std::max(mx, std::fabs(slopes[j]));
      }
      rec.slope_mean_abs.push_back(mean / static_cast<double>(slopes.size()));
      rec.slope_max_abs.push_back(mx);
    }
    rec.verdict = stall_records.size() >= 2
                      ? stall_diagnostic(stall_records, lambda,
                                         config.stall_threshold,
                                         config.stall_window)
                      : StallVerdict::Healthy;
    if (val_ds && config.eval_every > 0 &&
        (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      const EvalResult ev = evaluate(params, spec, *val_ds);
      rec.val_loss = ev.mean_loss;
      rec.val_top1 = ev.top1_error;
    }
    run.epochs.push_back(rec);
  }

  run.final_params = std::move(params);
  std::size_t gt1 = 0, total = 0;
  for (std::size_t i : act_indices) {
    const Tensor& slopes = run.final_params.layers[i].slopes;
    for (std::size_t j = 0; j < slopes.size(); ++j) {
      ++total;
      if (std::fabs(slopes[j]) > 1.0) ++gt1;
    }
  }
  run.slope_count = total;
  run.slope_frac_gt1 =
      total ? static_cast<double>(gt1) / static_cast<double>(total) : 0.0;

  if (diverged) {
    run.status = RunStatus::Diverged;
  } else if (!run.epochs.empty() &&
             run.epochs.back().verdict == StallVerdict::Diminishing &&
             run.initial_train_loss > 0.0 &&
             (run.initial_train_loss - run.epochs.back().train_loss) <
                 0.01 * run.initial_train_loss) {
    run.status = RunStatus::Stalled;
  } else {
    run.status = RunStatus::Completed;
  }
  return run;
}

namespace {

// One fixed evaluation of the scalar loss; the dropout stream restarts at
// the same seed every call so finite differences see a smooth function.
double loss_at(const NetworkSpec& spec, const Params& params, const Tensor& x,
               const std::vector<std::size_t>& y, std::uint64_t dropout_seed) {
  RngStream rng(dropout_seed);
  const ForwardPass pass = network_forward(spec, params, x, Mode::Train, &rng);
  return softmax_xent(pass.logits, y).loss;
}

double rel_err(double a, double n) {
  return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), 1e-12});
}

}  // namespace

GradCheckReport grad_check(const NetworkSpec& spec, std::uint64_t seed,
                           double step, std::size_t batch,
                           bool corrupt_slope_grads) {
  if (!(step > 0)) throw std::invalid_argument("step must be > 0");
  Params params =
      initialize_network(spec, InitScheme::he_forward(), derive_seed(seed, 1));
  RngStream data_rng(derive_seed(seed, 2));
  const ShapeCHW in = spec.input_shape();
  const Tensor x =
      sample_gaussian({batch, in.c, in.h, in.w}, 0.0, 1.0, data_rng);
  std::vector<std::size_t> y(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    y[i] = data_rng.below(spec.classes());
  }
  const std::uint64_t dropout_seed = derive_seed(seed, 3);

  RngStream analytic_rng(dropout_seed);
  const ForwardPass pass =
      network_forward(spec, params, x, Mode::Train, &analytic_rng);
  const LossResult loss = softmax_xent(pass.logits, y);
  Params grads = network_backward(spec, params, pass, loss.grad_logits);
  if (corrupt_slope_grads) {
    for (LayerParams& g : grads.layers) {
      for (std::size_t j = 0; j < g.slopes.size(); ++j) g.slopes[j] *= 2.0;
    }
  }

  GradCheckReport report;
  auto check_tensor = [&](Tensor& p, const Tensor& g, const std::string& name) {
    if (p.empty()) return;
    double worst = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double saved = p[j];
      p[j] = saved + step;
      const double up = loss_at(spec, params, x, y, dropout_seed);
      p[j] = saved - step;
      const double down = loss_at(spec, params, x, y, dropout_seed);
      p[j] = saved;
      const double numeric = (up - down) / (2.0 * step);
      worst = std::max(worst, rel_err(g[j], numeric));
    }
    report.entries.push_back({name, worst});
    report.max_rel_err = std::max(report.max_rel_err, worst);
  };

  for (std::size_t i = 0; i < spec.layer_count(); ++i) {
    const std::string prefix = "layer" + std::to_string(i);
    check_tensor(params.layers[i].weight, grads.layers[i].weight,
                 prefix + ".weight");
    check_tensor(params.layers[i].bias, grads.layers[i].bias,
                 prefix + ".bias");
    check_tensor(params.layers[i].slopes, grads.layers[i].slopes,
                 prefix + ".slopes");
  }
  return report;
}

void write_train_csv(const TrainRun& run, std::ostream& os) {
  std::size_t n_layers = 0, n_slopes = 0;
  if (!run.epochs.empty()) {
    n_layers = run.epochs.front().grad_norms.size();
    n_slopes = run.epochs.front().slope_mean_abs.size();
  }
  os << "epoch,split,loss,top1";
  for (std::size_t l = 1; l <= n_layers; ++l) os << ",grad_norm_l" << l;
  for (std::size_t j = 1; j <= n_slopes; ++j) os << ",slope_mean_l" << j;
  os << ",stall_verdict\n";
  for (const EpochRecord& rec : run.epochs) {
    os << rec.epoch << ",train," << csv_num(rec.train_loss) << ','
       << csv_num(rec.train_top1);
    for (double g : rec.grad_norms) os << ',' << csv_num(g);
    for (double s : rec.slope_mean_abs) os << ',' << csv_num(s);
    os << ',' << to_string(rec.verdict) << '\n';
    if (rec.val_loss) {
      os << rec.epoch << ",val," << csv_num(*rec.val_loss) << ','
         << csv_num(*rec.val_top1);
      for (std::size_t l = 0; l < n_layers + n_slopes; ++l) os << ',';
      os << ",\n";
    }
  }
  os << "# status=" << to_string(run.status)
     << " initial_train_loss=" << csv_num(run.initial_train_loss)
     << " slope_frac_gt1=" << csv_num(run.slope_frac_gt1)
     << " slope_count=" << run.slope_count << '\n';
}

}  // namespace rectnet
