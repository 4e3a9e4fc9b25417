#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rectnet/analysis.hpp"
#include "rectnet/net_spec.hpp"
#include "rectnet/rng.hpp"

using namespace rectnet;

namespace {

const std::string kSpecDir = RECTNET_SPEC_DIR;

NetworkSpec fc_stack(std::vector<std::size_t> widths, std::size_t in_dim,
                     ActKind kind = ActKind::ReLU, double a = 0.0) {
  std::vector<LayerSpec> layers;
  layers.push_back(InputSpec{in_dim, 1, 1});
  for (std::size_t w : widths) {
    layers.push_back(FcSpec{w, {}});
    layers.push_back(ActSpec{kind, a});
  }
  layers.push_back(SoftmaxSpec{widths.back()});
  return build_spec(std::move(layers));
}

}  // namespace

TEST_CASE("he-fwd makes every forward gain exactly 1 on ReLU specs") {
  const NetworkSpec spec = fc_stack({64, 96, 128, 32}, 48);
  const VarianceReport rep =
      predict_gains(spec, InitScheme::he_forward(), 0.0);
  for (const VarianceRow& r : rep.rows) {
    CHECK(std::fabs(r.gain_fwd - 1.0) < 1e-14);
  }
  CHECK(std::fabs(rep.forward_product - 1.0) < 1e-13);
}

TEST_CASE("he-bwd: backward product 1, forward product c2/dL") {
  const NetworkSpec spec = fc_stack({64, 96, 128, 32}, 48);
  const VarianceReport rep =
      predict_gains(spec, InitScheme::he_backward(), 0.0);
  CHECK(std::fabs(rep.backward_product - 1.0) < 1e-13);
  const double c2 = 64.0, dL = 32.0;  // first hidden width / classifier width
  CHECK(rep.forward_product == doctest::Approx(c2 / dL).epsilon(1e-12));
}

TEST_CASE("xavier halves forward variance per rectified layer") {
  const NetworkSpec spec = fc_stack({50, 50, 50, 50, 50}, 50);
  const VarianceReport rep = predict_gains(spec, InitScheme::xavier(), 0.0);
  for (const VarianceRow& r : rep.rows) {
    CHECK(r.gain_fwd == doctest::Approx(0.5).epsilon(1e-13));
  }
  CHECK(rep.forward_product ==
        doctest::Approx(std::pow(0.5, 4)).epsilon(1e-12));
}

TEST_CASE("identity activations under xavier recover gain 1") {
  const NetworkSpec spec = fc_stack({40, 40, 40}, 40, ActKind::Identity);
  const VarianceReport rep = predict_gains(spec, InitScheme::xavier(), 1.0);
  for (const VarianceRow& r : rep.rows) {
    CHECK(r.gain_fwd == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("slope-matched init gives gain exactly 1 for any slope") {
  for (double a : {0.1, 0.25, 0.5, 1.0}) {
    const NetworkSpec spec =
        fc_stack({64, 64, 64}, 64, ActKind::PReLUChannelWise, a);
    const VarianceReport rep = predict_gains(
        spec, InitScheme::prelu_aware(a, FanDirection::Forward), a);
    for (const VarianceRow& r : rep.rows) {
      CHECK(std::fabs(r.gain_fwd - 1.0) < 1e-14);
    }
  }
}

TEST_CASE("cumulative columns equal running products of gains") {
  const NetworkSpec spec = fc_stack({64, 96, 128, 32, 80}, 48);
  const VarianceReport rep = predict_gains(spec, InitScheme::xavier(), 0.0);
  double run_f = 1.0, run_b = 1.0;
  for (const VarianceRow& r : rep.rows) {
    if (r.ordinal > 1) {
      run_f *= r.gain_fwd;
      run_b *= r.gain_bwd;
    }
    CHECK(std::fabs(r.cum_fwd - run_f) <= 1e-12 * std::fabs(run_f));
    CHECK(std::fabs(r.cum_bwd - run_b) <= 1e-12 * std::fabs(run_b));
  }
}

TEST_CASE("attenuation on the bundled 10-conv stack reproduces ~1/17000") {
  const NetworkSpec spec = parse_spec_file(kSpecDir + "/vgg-b.spec");
  const double ratio = attenuation_vs_he(spec, 0.01);
  CHECK(1.0 / ratio == doctest::Approx(1.7e4).epsilon(0.05));
  CHECK(ratio == doctest::Approx(5.9e-5).epsilon(0.02));
}

TEST_CASE("attenuation is exactly 1 when the fixed std matches He") {
  // Uniform-width stack: every layer shares one He std.
  const NetworkSpec spec = fc_stack({64, 64, 64, 64}, 64);
  const double he_std = std::sqrt(2.0 / 64.0);
  CHECK(attenuation_vs_he(spec, he_std) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single weighted layer: attenuation is the empty product") {
  const NetworkSpec spec = fc_stack({10}, 64);
  CHECK(attenuation_vs_he(spec, 0.01) == 1.0);
}

TEST_CASE("monte-carlo probe agrees with the analytic gains on a small stack") {
  const NetworkSpec spec = fc_stack({128, 128, 128, 128, 128, 128}, 128);
  const VarianceReport rep =
      monte_carlo_probe(spec, InitScheme::he_forward(), 20, 64, 123);
  REQUIRE(rep.rows.size() == 6);
  for (const VarianceRow& r : rep.rows) {
    CHECK(r.emp_fwd == doctest::Approx(1.0).epsilon(0.2));
    CHECK(r.emp_bwd == doctest::Approx(1.0).epsilon(0.2));
  }
  const VarianceReport xav =
      monte_carlo_probe(spec, InitScheme::xavier(), 20, 64, 123);
  for (const VarianceRow& r : xav.rows) {
    CHECK(r.emp_fwd == doctest::Approx(0.5).epsilon(0.2));
    CHECK(r.emp_bwd == doctest::Approx(0.5).epsilon(0.2));
  }
}

TEST_CASE("probe under identity activations and xavier stays near 1") {
  const NetworkSpec spec = fc_stack({128, 128, 128}, 128, ActKind::Identity);
  const VarianceReport rep =
      monte_carlo_probe(spec, InitScheme::xavier(), 20, 64, 7);
  for (const VarianceRow& r : rep.rows) {
    CHECK(r.emp_fwd == doctest::Approx(1.0).epsilon(0.1));
    CHECK(r.emp_bwd == doctest::Approx(1.0).epsilon(0.1));
  }
}

TEST_CASE("probe is deterministic in its seed") {
  const NetworkSpec spec = fc_stack({64, 64}, 64);
  const VarianceReport a =
      monte_carlo_probe(spec, InitScheme::he_forward(), 5, 32, 9);
  const VarianceReport b =
      monte_carlo_probe(spec, InitScheme::he_forward(), 5, 32, 9);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].emp_fwd == b.rows[i].emp_fwd);
    CHECK(a.rows[i].emp_bwd == b.rows[i].emp_bwd);
  }
}

TEST_CASE("stall diagnostic: pure decay signature vs healthy gradients") {
  // g exactly = lambda w: the loss-contributed residual is zero.
  std::vector<StallRecord> pure(60, StallRecord{0.0, 0.01});
  CHECK(stall_diagnostic(pure, 0.0005) == StallVerdict::Diminishing);

  // g = 10 lambda w: residual = 9 lambda||w|| dominates.
  std::vector<StallRecord> healthy(60, StallRecord{0.09, 0.01});
  CHECK(stall_diagnostic(healthy, 0.0005) == StallVerdict::Healthy);
}

TEST_CASE("stall diagnostic needs a sustained window") {
  std::vector<StallRecord> records(100, StallRecord{0.0, 0.01});
  for (std::size_t i = 0; i < records.size(); i += 30) {
    records[i].residual_norm = 1.0;  // periodic healthy spikes
  }
  CHECK(stall_diagnostic(records, 0.0005, 0.05, 50) == StallVerdict::Healthy);
  CHECK(stall_diagnostic(records, 0.0005, 0.05, 20) ==
        StallVerdict::Diminishing);
}

TEST_CASE("stall diagnostic tensor overload subtracts the decay term") {
  const NetworkSpec spec = fc_stack({4}, 4);
  Params params;
  params.layers.resize(spec.layer_count());
  params.layers[1].weight = Tensor::full({4, 4}, 2.0);
  params.layers[1].bias = Tensor({4});
  const double lambda = 0.001;
  Params g;
  g.layers.resize(spec.layer_count());
  g.layers[1].weight = Tensor::full({4, 4}, 2.0 * lambda);  // g == lambda w
  g.layers[1].bias = Tensor({4});
  const std::vector<Params> history(10, g);
  CHECK(stall_diagnostic(history, params, lambda) ==
        StallVerdict::Diminishing);

  Params big = g;
  big.layers[1].weight = Tensor::full({4, 4}, 20.0 * lambda);
  const std::vector<Params> healthy(10, big);
  CHECK(stall_diagnostic(healthy, params, lambda) == StallVerdict::Healthy);
}

TEST_CASE("lambda = 0 falls back to the trend test") {
  std::vector<StallRecord> fading;
  for (int i = 0; i < 100; ++i) {
    fading.push_back(StallRecord{i < 50 ? 1.0 : 1e-4, 0.0});
  }
  CHECK(stall_diagnostic(fading, 0.0) == StallVerdict::Diminishing);
  std::vector<StallRecord> flat(100, StallRecord{1.0, 0.0});
  CHECK(stall_diagnostic(flat, 0.0) == StallVerdict::Healthy);
  CHECK_THROWS(stall_diagnostic(std::vector<StallRecord>{{1.0, 0.0}}, 0.0));
}

TEST_CASE("variance CSV carries the empirical columns only for probes") {
  const NetworkSpec spec = fc_stack({8, 8}, 8);
  std::ostringstream analytic;
  write_variance_csv(predict_gains(spec, InitScheme::he_forward(), 0.0),
                     analytic);
  CHECK(analytic.str().find("emp_fwd") == std::string::npos);
  std::ostringstream emp;
  write_variance_csv(monte_carlo_probe(spec, InitScheme::he_forward(), 2, 8, 1),
                     emp);
  CHECK(emp.str().find("emp_fwd") != std::string::npos);
  CHECK(emp.str().find("trials") != std::string::npos);
}

TEST_CASE("uniform_activation_slope inference") {
  CHECK(*uniform_activation_slope(fc_stack({8}, 8)) == 0.0);
  CHECK(*uniform_activation_slope(
            fc_stack({8}, 8, ActKind::PReLUShared, 0.25)) == 0.25);
  CHECK(*uniform_activation_slope(fc_stack({8}, 8, ActKind::Identity)) == 1.0);
  const NetworkSpec bare =
      parse_spec("input 4x1x1\nfc 4\nsoftmax 4\n");  // no activations: linear
  CHECK(*uniform_activation_slope(bare) == 1.0);
  const NetworkSpec mixed = parse_spec(
      "input 4x1x1\nfc 4\nact relu\nfc 4\nact lrelu 0.1\nsoftmax 4\n");
  CHECK_FALSE(uniform_activation_slope(mixed).has_value());
}
