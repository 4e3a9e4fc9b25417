// Command-line experiment runner: analytic init reports, Monte-Carlo
// variance probes, deterministic training runs, and full-network gradient
// checks over the line-oriented network spec format.
//
// Exit codes: 0 success, 1 check failure, 2 usage/input error, 3 run
// completed with a degenerate (diverged/stalled) status.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "rectnet/analysis.hpp"
#include "rectnet/csv.hpp"
#include "rectnet/data.hpp"
#include "rectnet/init.hpp"
#include "rectnet/net_spec.hpp"
#include "rectnet/train.hpp"

namespace {

using namespace rectnet;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDegenerate = 3;

struct OutputTarget {
  std::ofstream file;
  bool to_file = false;
  std::ostream& stream() { return to_file ? file : std::cout; }
  // Human-readable notes go to stdout when the CSV is in a file, stderr
  // otherwise, so the CSV byte stream stays clean either way.
  std::ostream& notes() { return to_file ? std::cout : std::cerr; }
};

OutputTarget open_output(const std::string& out_path) {
  OutputTarget t;
  if (!out_path.empty()) {
    t.file.open(out_path, std::ios::binary);
    if (!t.file) {
      throw std::runtime_error("cannot write output file '" + out_path + "'");
    }
    t.to_file = true;
  }
  return t;
}

ActSpec parse_act_flag(const std::string& text) {
  auto slope_of = [&](const std::string& s) { return std::stod(s); };
  if (text == "relu") return ActSpec{ActKind::ReLU, 0.0};
  if (text == "identity") return ActSpec{ActKind::Identity, 0.0};
  if (text.rfind("lrelu:", 0) == 0) {
    return ActSpec{ActKind::LReLU, slope_of(text.substr(6))};
  }
  if (text.rfind("prelu-shared:", 0) == 0) {
    return ActSpec{ActKind::PReLUShared, slope_of(text.substr(13))};
  }
  if (text.rfind("prelu:", 0) == 0) {
    return ActSpec{ActKind::PReLUChannelWise, slope_of(text.substr(6))};
  }
  throw std::invalid_argument(
      "bad --act value '" + text +
      "' (expected relu|lrelu:<a>|prelu:<a>|prelu-shared:<a>|identity)");
}

std::vector<std::pair<int, double>> parse_lr_steps(const std::string& text) {
  std::vector<std::pair<int, double>> steps;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ',')) {
    const auto colon = item.find(':');
    if (colon == std::string::npos) {
      throw std::invalid_argument("bad --lr-steps entry '" + item +
                                  "' (expected epoch:lr)");
    }
    steps.emplace_back(std::stoi(item.substr(0, colon)),
                       std::stod(item.substr(colon + 1)));
  }
  return steps;
}

struct DataFlag {
  bool synth = false;
  std::string images, labels;
  std::size_t classes = 0, per_class = 0, dims = 0;
  double separation = 0.0;
};

DataFlag parse_data_flag(const std::string& text) {
  DataFlag d;
  if (text.rfind("idx:", 0) == 0) {
    const std::string rest = text.substr(4);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument(
          "bad --data value: idx needs <images>,<labels>");
    }
    d.images = rest.substr(0, comma);
    d.labels = rest.substr(comma + 1);
    return d;
  }
  if (text.rfind("synth:", 0) == 0) {
    std::istringstream is(text.substr(6));
    std::string tok;
    std::vector<std::string> parts;
    while (std::getline(is, tok, ',')) parts.push_back(tok);
    if (parts.size() != 4) {
      throw std::invalid_argument(
          "bad --data value: synth needs <classes>,<per>,<dims>,<sep>");
    }
    d.synth = true;
    d.classes = std::stoul(parts[0]);
    d.per_class = std::stoul(parts[1]);
    d.dims = std::stoul(parts[2]);
    d.separation = std::stod(parts[3]);
    return d;
  }
  throw std::invalid_argument("bad --data value '" + text +
                              "' (expected idx:<img>,<lbl> or "
                              "synth:<classes>,<per>,<dims>,<sep>)");
}

int run_init_report(const std::string& spec_path, const std::string& scheme_s,
                    std::optional<double> a_flag, const std::string& out_path) {
  const NetworkSpec spec = parse_spec_file(spec_path);
  const InitScheme scheme = InitScheme::parse(scheme_s);
  double a = 0.0;
  if (a_flag) {
    a = *a_flag;
  } else {
    const auto inferred = uniform_activation_slope(spec);
    if (!inferred) {
      throw std::invalid_argument(
          "spec mixes activation slopes; pass --a explicitly");
    }
    a = *inferred;
  }
  const VarianceReport report = predict_gains(spec, scheme, a);

  OutputTarget out = open_output(out_path);
  std::ostream& os = out.stream();
  os << "# cmd=init-report spec=" << spec_path << " scheme=" << scheme.name()
     << " a=" << csv_num(a) << '\n';
  write_variance_csv(report, os);
  if (scheme.kind == InitScheme::Kind::FixedStd) {
    const double ratio = attenuation_vs_he(spec, scheme.sigma);
    os << "# attenuation_vs_he_bwd std_ratio=" << csv_num(ratio)
       << " reciprocal=" << csv_num(1.0 / ratio) << '\n';
    out.notes() << "gradient std ratio vs fan-out He baseline: "
                << csv_num(ratio) << " (1/" << csv_num(1.0 / ratio) << ")\n";
  }
  std::ostream& notes = out.notes();
  notes << "scheme " << scheme.name() << ", activation slope " << csv_num(a)
        << ", L=" << spec.depth() << '\n';
  char line[128];
  for (const VarianceRow& r : report.rows) {
    std::snprintf(line, sizeof(line),
                  "layer %2zu %-4s fan_in=%6zu fan_out=%6zu std=%.3f "
                  "gain_fwd=%.3f gain_bwd=%.3f\n",
                  r.ordinal, r.kind.c_str(), r.fan_in, r.fan_out, r.std,
                  r.gain_fwd, r.gain_bwd);
    notes << line;
  }
  notes << "cumulative forward product " << csv_num(report.forward_product)
        << ", backward product " << csv_num(report.backward_product) << '\n';
  return kExitOk;
}

int run_probe(const std::string& spec_path, const std::string& scheme_s,
              std::size_t trials, std::size_t batch, std::uint64_t seed,
              const std::string& out_path) {
  const NetworkSpec spec = parse_spec_file(spec_path);
  const InitScheme scheme = InitScheme::parse(scheme_s);
  const VarianceReport report =
      monte_carlo_probe(spec, scheme, trials, batch, seed);

  OutputTarget out = open_output(out_path);
  std::ostream& os = out.stream();
  os << "# cmd=probe spec=" << spec_path << " scheme=" << scheme.name()
     << " trials=" << trials << " batch=" << batch << " seed=" << seed
     << '\n';
  write_variance_csv(report, os);
  out.notes() << "probed " << report.rows.size() << " weighted layers, "
              << trials << " trials\n";
  return kExitOk;
}

int run_train(const std::string& spec_path, const std::string& data_s,
              const std::string& scheme_s, const std::string& act_s,
              const TrainConfig& base, const std::string& lr_steps_s,
              const std::string& out_path) {
  NetworkSpec spec = parse_spec_file(spec_path);
  if (!act_s.empty()) {
    spec = replace_activations(spec, parse_act_flag(act_s));
  }
  TrainConfig config = base;
  config.scheme = InitScheme::parse(scheme_s);
  if (!lr_steps_s.empty()) config.optim.lr_steps = parse_lr_steps(lr_steps_s);
  config.optim.validate();

  const DataFlag data = parse_data_flag(data_s);
  Dataset train_ds;
  std::optional<Dataset> val_ds;
  if (data.synth) {
    train_ds = synth_gaussian_classes(data.classes, data.per_class, data.dims,
                                      data.separation,
                                      derive_seed(config.seed, 10));
    // Held-out split: same generator family, disjoint seed, 1/5 the size.
    val_ds = synth_gaussian_classes(
        data.classes, std::max<std::size_t>(1, data.per_class / 5), data.dims,
        data.separation, derive_seed(config.seed, 11));
  } else {
    train_ds = load_idx(data.images, data.labels, true);
  }

  const TrainRun run =
      train(spec, train_ds, val_ds ? &*val_ds : nullptr, config);

  OutputTarget out = open_output(out_path);
  std::ostream& os = out.stream();
  os << "# cmd=train spec=" << spec_path << " data=" << data_s
     << " scheme=" << config.scheme.name()
     << " act=" << (act_s.empty() ? "(spec)" : act_s)
     << " epochs=" << config.epochs << " batch=" << config.batch_size
     << " lr=" << csv_num(config.optim.lr)
     << " momentum=" << csv_num(config.optim.momentum)
     << " weight_decay=" << csv_num(config.optim.weight_decay)
     << " lr_steps=" << (lr_steps_s.empty() ? "-" : lr_steps_s)
     << " seed=" << config.seed << " eval_every=" << config.eval_every
     << " freeze_slopes=" << (config.freeze_slopes ? 1 : 0) << '\n';
  write_train_csv(run, os);

  std::ostream& notes = out.notes();
  notes << "status=" << to_string(run.status);
  if (!run.epochs.empty()) {
    notes << " final_train_loss=" << csv_num(run.epochs.back().train_loss)
          << " final_train_top1=" << csv_num(run.epochs.back().train_top1)
          << " stall_verdict=" << to_string(run.epochs.back().verdict);
  }
  notes << '\n';
  return run.status == RunStatus::Completed ? kExitOk : kExitDegenerate;
}

int run_gradcheck(const std::string& spec_path, std::uint64_t seed,
                  double step, double tol, bool corrupt,
                  const std::string& out_path) {
  const NetworkSpec spec = parse_spec_file(spec_path);
  const GradCheckReport report = grad_check(spec, seed, step, 4, corrupt);

  OutputTarget out = open_output(out_path);
  std::ostream& os = out.stream();
  os << "# cmd=gradcheck spec=" << spec_path << " seed=" << seed
     << " step=" << csv_num(step) << " tol=" << csv_num(tol)
     << " corrupt_slopes=" << (corrupt ? 1 : 0) << '\n';
  os << "param,max_rel_err,ok\n";
  for (const GradCheckEntry& e : report.entries) {
    os << e.name << ',' << csv_num(e.max_rel_err) << ','
       << (e.max_rel_err <= tol ? 1 : 0) << '\n';
  }
  os << "# max_rel_err=" << csv_num(report.max_rel_err)
     << " pass=" << (report.all_within(tol) ? 1 : 0) << '\n';
  out.notes() << "max relative error " << csv_num(report.max_rel_err)
              << (report.all_within(tol) ? " (pass)" : " (FAIL)") << '\n';
  return report.all_within(tol) ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rectifier-network experiment runner"};
  app.require_subcommand(1);

  std::string spec_path, scheme = "he-fwd", out_path;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* cmd, bool need_scheme = true) {
    cmd->add_option("--spec", spec_path, "network spec file")->required();
    if (need_scheme) {
      cmd->add_option("--scheme", scheme,
                      "he-fwd|he-bwd|xavier|fixed:<s>|prelu:<a>:fwd|bwd");
    }
    cmd->add_option("--seed", seed, "rng seed");
    cmd->add_option("--out", out_path, "CSV output file (default stdout)");
  };

  CLI::App* rep = app.add_subcommand("init-report",
                                     "per-layer init stds and variance gains");
  std::optional<double> a_flag;
  add_common(rep);
  rep->add_option("--a", a_flag,
                  "activation slope for the gain formulas (default: inferred)");

  CLI::App* probe = app.add_subcommand(
      "probe", "Monte-Carlo forward/backward variance measurement");
  std::size_t trials = 50, probe_batch = 64;
  add_common(probe);
  probe->add_option("--trials", trials, "independent re-initializations");
  probe->add_option("--batch", probe_batch, "examples per trial");

  CLI::App* tr = app.add_subcommand("train", "SGD training run");
  std::string data_s, act_s, lr_steps_s;
  TrainConfig tc;
  add_common(tr);
  tr->add_option("--data", data_s,
                 "idx:<img>,<lbl> or synth:<classes>,<per>,<dims>,<sep>")
      ->required();
  tr->add_option("--epochs", tc.epochs, "training epochs");
  tr->add_option("--batch", tc.batch_size, "mini-batch size");
  tr->add_option("--lr", tc.optim.lr, "learning rate");
  tr->add_option("--momentum", tc.optim.momentum, "momentum");
  tr->add_option("--weight-decay", tc.optim.weight_decay, "weight decay");
  tr->add_option("--lr-steps", lr_steps_s, "epoch:lr[,epoch:lr...]");
  tr->add_option("--act", act_s,
                 "override spec activations: "
                 "relu|lrelu:<a>|prelu:<a>|prelu-shared:<a>|identity");
  tr->add_option("--eval-every", tc.eval_every, "validation cadence (epochs)");
  tr->add_flag("--freeze-slopes", tc.freeze_slopes,
               "keep PReLU slopes at their initial values");

  CLI::App* gc = app.add_subcommand("gradcheck",
                                    "finite-difference gradient verification");
  double gc_step = 1e-5, gc_tol = 1e-5;
  bool gc_corrupt = false;
  add_common(gc, false);
  gc->add_option("--step", gc_step, "central difference step");
  gc->add_option("--tol", gc_tol, "max relative error accepted");
  gc->add_flag("--corrupt-slopes", gc_corrupt,
               "debug: double the analytic slope gradients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (rep->parsed()) {
      return run_init_report(spec_path, scheme, a_flag, out_path);
    }
    if (probe->parsed()) {
      return run_probe(spec_path, scheme, trials, probe_batch, seed, out_path);
    }
    if (tr->parsed()) {
      tc.seed = seed;
      return run_train(spec_path, data_s, scheme, act_s, tc, lr_steps_s,
                       out_path);
    }
    if (gc->parsed()) {
      return run_gradcheck(spec_path, seed, gc_step, gc_tol, gc_corrupt,
                           out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
