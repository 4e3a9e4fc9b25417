#include <stdexcept>
#include <string>

#include "doctest.h"
#include "rectnet/net_spec.hpp"

using namespace rectnet;

namespace {
const std::string kSpecDir = RECTNET_SPEC_DIR;
}

TEST_CASE("minimal valid spec parses with inferred shapes") {
  const NetworkSpec spec =
      parse_spec("input 1x8x8\nfc 10\nact relu\nsoftmax 10\n");
  CHECK(spec.layer_count() == 4);
  CHECK(spec.depth() == 1);  // one weighted layer (the fc)
  CHECK(spec.input_shape() == ShapeCHW{1, 8, 8});
  CHECK(spec.shape_after(1) == ShapeCHW{10, 1, 1});
  CHECK(spec.weighted().front().c == 64);
  CHECK(spec.classes() == 10);
}

TEST_CASE("the bundled 14-layer model has depth 14") {
  const NetworkSpec spec = parse_spec_file(kSpecDir + "/table1-small.spec");
  CHECK(spec.depth() == 14);
  CHECK(spec.classes() == 1000);
  // conv1 7x7 stride 2 on 224 -> 112, pool 3x3/3 -> 37, pool 2x2/2 -> 18
  CHECK(spec.shape_after(1) == ShapeCHW{64, 112, 112});
  CHECK(spec.shape_after(3) == ShapeCHW{64, 37, 37});
}

TEST_CASE("channel chaining holds by construction through pools and acts") {
  // Conv input channels are inferred, so every weighted layer's c equals
  // the previous weighted layer's d; the format cannot express a mismatch.
  const NetworkSpec spec = parse_spec(
      "input 3x16x16\n"
      "conv 3x3 4 stride 1 pad same\n"
      "act relu\n"
      "maxpool 2x2 stride 2\n"
      "conv 3x3 6 stride 1 pad same\n"
      "fc 10\n"
      "softmax 10\n");
  std::size_t prev_d = 0;
  for (const WeightedLayer& wl : spec.weighted()) {
    if (wl.ordinal > 1 && wl.is_conv) CHECK(wl.c == prev_d);
    prev_d = wl.d;
  }
}

TEST_CASE("shape contradictions are rejected with line numbers") {
  const std::string bad =
      "input 3x8x8\n"
      "conv 3x3 4 stride 1 pad same\n"
      "fc 8\n"
      "conv 3x3 4 stride 1 pad valid\n"  // 3x3 window on a 1x1 map
      "softmax 10\n";
  try {
    parse_spec(bad);
    FAIL("expected a shape error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 4") != std::string::npos);
    CHECK(msg.find("shape inference") != std::string::npos);
  }
  // Logit count must match the class count at the loss.
  try {
    parse_spec("input 3x8x8\nconv 3x3 4 stride 1 pad same\nsoftmax 10\n");
    FAIL("expected a logit-count error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("unknown keywords and malformed lines carry line numbers") {
  try {
    parse_spec("input 1x4x4\ncnv 3x3 2 stride 1 pad same\nsoftmax 10\n");
    FAIL("expected parse error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("cnv") != std::string::npos);
  }
  CHECK_THROWS(parse_spec("input 1x4x4\nfc 16\nact relu\nsoftmax 16\nfc 3\n"));
  CHECK_THROWS(parse_spec("fc 10\nsoftmax 10\n"));      // no input layer
  CHECK_THROWS(parse_spec("input 1x4x4\nfc 16\n"));     // no loss layer
  CHECK_THROWS(parse_spec("input 1x4x4\ndropout 1.0\nfc 16\nsoftmax 16\n"));
}

TEST_CASE("comments and blank lines are ignored") {
  const NetworkSpec spec = parse_spec(
      "# a comment\n"
      "input 1x4x4   # trailing comment\n"
      "\n"
      "fc 16\n"
      "softmax 16\n");
  CHECK(spec.depth() == 1);
}

TEST_CASE("per-layer std overrides parse") {
  const NetworkSpec spec = parse_spec(
      "input 1x4x4\nfc 16 std 0.01\nact relu\nfc 16\nsoftmax 16\n");
  CHECK(spec.weighted()[0].std_override == 0.01);
  CHECK_FALSE(spec.weighted()[1].std_override.has_value());
}

TEST_CASE("shape inference failure is a spec error") {
  CHECK_THROWS(parse_spec(
      "input 1x2x2\nconv 3x3 2 stride 1 pad valid\nsoftmax 2\n"));
  CHECK_THROWS(parse_spec(
      "input 1x2x2\nmaxpool 3x3 stride 1\nfc 2\nsoftmax 2\n"));
}

TEST_CASE("slope parameter counting over the bundled 14-layer model") {
  const NetworkSpec spec = parse_spec_file(kSpecDir + "/table1-small.spec");
  CHECK(count_extra_slope_params(spec, SlopeMode::Shared) == 13);
  CHECK(count_extra_slope_params(spec, SlopeMode::ChannelWise) ==
        64 + 4 * 128 + 6 * 256 + 4096 + 4096);  // 10304
}

TEST_CASE("specs without parametric activations count zero slopes") {
  const NetworkSpec spec =
      parse_spec("input 1x8x8\nfc 10\nact relu\nsoftmax 10\n");
  CHECK(count_extra_slope_params(spec, SlopeMode::Shared) == 0);
  CHECK(count_extra_slope_params(spec, SlopeMode::ChannelWise) == 0);
}

TEST_CASE("replace_activations rewrites every activation layer") {
  const NetworkSpec spec = parse_spec(
      "input 1x8x8\nfc 10\nact relu\nfc 10\nact relu\nsoftmax 10\n");
  const NetworkSpec swapped =
      replace_activations(spec, ActSpec{ActKind::PReLUShared, 0.25});
  CHECK(count_extra_slope_params(swapped, SlopeMode::Shared) == 2);
}

TEST_CASE("weighted_at rejects non-weighted layers") {
  const NetworkSpec spec =
      parse_spec("input 1x8x8\nfc 10\nact relu\nsoftmax 10\n");
  CHECK(spec.weighted_at(1).d == 10);
  CHECK_THROWS_AS(spec.weighted_at(2), std::invalid_argument);
}
