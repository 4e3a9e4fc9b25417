#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "rectnet/data.hpp"

using namespace rectnet;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/rectnet_test_") + name;
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& b) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

void be32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

struct IdxFixture {
  std::string images = temp_path("images.idx");
  std::string labels = temp_path("labels.idx");
  IdxFixture() {
    // 3 images of 2x2 pixels, labels 0,1,2.
    std::vector<unsigned char> img;
    be32(img, 0x00000803);
    be32(img, 3);
    be32(img, 2);
    be32(img, 2);
    for (unsigned char p :
         {0, 255, 128, 7, 1, 2, 3, 4, 250, 251, 252, 253}) {
      img.push_back(p);
    }
    write_bytes(images, img);
    std::vector<unsigned char> lbl;
    be32(lbl, 0x00000801);
    be32(lbl, 3);
    lbl.push_back(0);
    lbl.push_back(1);
    lbl.push_back(2);
    write_bytes(labels, lbl);
  }
};

}  // namespace

TEST_CASE("load_idx parses images and labels") {
  IdxFixture fx;
  const Dataset ds = load_idx(fx.images, fx.labels, false);
  CHECK(ds.count() == 3);
  CHECK(ds.class_count == 3);
  CHECK(ds.labels == std::vector<std::size_t>{0, 1, 2});
  CHECK(ds.inputs.shape() == std::vector<std::size_t>{3, 1, 2, 2});
  CHECK(ds.inputs[0] == 0.0);
  CHECK(ds.inputs[1] == 255.0);
}

TEST_CASE("normalization maps byte endpoints to [-1, 1]") {
  IdxFixture fx;
  const Dataset ds = load_idx(fx.images, fx.labels, true);
  CHECK(ds.inputs[0] == doctest::Approx(-1.0));
  CHECK(ds.inputs[1] == doctest::Approx(1.0));
  CHECK(ds.inputs[2] == doctest::Approx((128.0 - 127.5) / 127.5));
}

TEST_CASE("bad magic errors name expected and found values") {
  IdxFixture fx;
  try {
    load_idx(fx.labels, fx.labels, false);  // labels file where images go
    FAIL("expected bad-magic error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("0x00000803") != std::string::npos);  // expected
    CHECK(msg.find("0x00000801") != std::string::npos);  // found
  }
}

TEST_CASE("truncated files and count mismatches are rejected") {
  IdxFixture fx;
  std::vector<unsigned char> img = read_bytes(fx.images);
  img.resize(img.size() - 4);
  const std::string trunc = temp_path("trunc.idx");
  write_bytes(trunc, img);
  CHECK_THROWS_AS(load_idx(trunc, fx.labels, false), std::runtime_error);

  std::vector<unsigned char> lbl;
  be32(lbl, 0x00000801);
  be32(lbl, 2);
  lbl.push_back(0);
  lbl.push_back(1);
  const std::string short_lbl = temp_path("short_labels.idx");
  write_bytes(short_lbl, lbl);
  CHECK_THROWS_AS(load_idx(fx.images, short_lbl, false), std::runtime_error);
}

TEST_CASE("idx round-trips byte-identically through save_idx") {
  IdxFixture fx;
  const Dataset ds = load_idx(fx.images, fx.labels, false);
  const std::string img2 = temp_path("images2.idx");
  const std::string lbl2 = temp_path("labels2.idx");
  save_idx(ds, img2, lbl2);
  CHECK(read_bytes(img2) == read_bytes(fx.images));
  CHECK(read_bytes(lbl2) == read_bytes(fx.labels));
}

TEST_CASE("synthetic datasets are deterministic in the seed") {
  const Dataset a = synth_gaussian_classes(3, 10, 8, 4.0, 42);
  const Dataset b = synth_gaussian_classes(3, 10, 8, 4.0, 42);
  const Dataset c = synth_gaussian_classes(3, 10, 8, 4.0, 43);
  CHECK(a.inputs == b.inputs);
  CHECK(a.labels == b.labels);
  CHECK(a.inputs != c.inputs);
  CHECK(a.count() == 30);
  CHECK(a.class_count == 3);
}

TEST_CASE("separation 10 in 16 dims: nearest-center accuracy >= 0.999") {
  const std::size_t classes = 2, per = 2000, dims = 16;
  const double sep = 10.0;
  const std::uint64_t seed = 7;
  const Tensor centers = synth_class_centers(classes, dims, sep, seed);
  const Dataset ds = synth_gaussian_classes(classes, per, dims, sep, seed);

  // Distance between the two centers bounds the Bayes error at
  // Phi(-d/2) per example; for these seeds d is comfortably > 7 sigma.
  double dist_sq = 0.0;
  for (std::size_t j = 0; j < dims; ++j) {
    const double diff = centers[j] - centers[dims + j];
    dist_sq += diff * diff;
  }
  const double d = std::sqrt(dist_sq);
  const double bound = 0.5 * std::erfc(d / (2.0 * std::sqrt(2.0)));
  CHECK(bound < 1e-4);

  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.count(); ++i) {
    double best = 1e300;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      double dd = 0.0;
      for (std::size_t j = 0; j < dims; ++j) {
        const double diff = ds.inputs[i * dims + j] - centers[c * dims + j];
        dd += diff * diff;
      }
      if (dd < best) {
        best = dd;
        best_c = c;
      }
    }
    if (best_c == ds.labels[i]) ++correct;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(ds.count()) >=
        0.999);
}

TEST_CASE("separation 0 leaves classes indistinguishable") {
  const std::size_t classes = 4, per = 500, dims = 8;
  const Tensor centers = synth_class_centers(classes, dims, 0.0, 3);
  for (std::size_t i = 0; i < centers.size(); ++i) CHECK(centers[i] == 0.0);

  // Nearest-center against the degenerate (identical) centers is chance.
  const Dataset ds = synth_gaussian_classes(classes, per, dims, 0.0, 3);
  // All centers coincide, so use per-class empirical means as a probe; the
  // resulting accuracy must sit near chance = 1/classes.
  Tensor means({classes, dims});
  std::vector<double> counts(classes, 0.0);
  for (std::size_t i = 0; i < ds.count(); ++i) {
    counts[ds.labels[i]] += 1.0;
    for (std::size_t j = 0; j < dims; ++j) {
      means[ds.labels[i] * dims + j] += ds.inputs[i * dims + j];
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < dims; ++j) means[c * dims + j] /= counts[c];
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < ds.count(); ++i) {
    double best = 1e300;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      double dd = 0.0;
      for (std::size_t j = 0; j < dims; ++j) {
        const double diff = ds.inputs[i * dims + j] - means[c * dims + j];
        dd += diff * diff;
      }
      if (dd < best) {
        best = dd;
        best_c = c;
      }
    }
    if (best_c == ds.labels[i]) ++correct;
  }
  const double acc = static_cast<double>(correct) / ds.count();
  CHECK(acc < 1.0 / classes + 0.06);  // chance plus estimation noise
}

TEST_CASE("batches partition the dataset with the final partial batch kept") {
  const auto batches = batch_indices(10, 4, 5, 1);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
}

TEST_CASE("batch order is deterministic per (seed, epoch)") {
  const auto a = batch_indices(64, 8, 9, 3);
  const auto b = batch_indices(64, 8, 9, 3);
  CHECK(a == b);
  CHECK(a != batch_indices(64, 8, 9, 4));
  CHECK(a != batch_indices(64, 8, 10, 3));
}

TEST_CASE("every example appears exactly once per epoch") {
  for (std::size_t count : {1u, 7u, 64u, 129u}) {
    for (std::size_t bs : {1u, 4u, 128u}) {
      std::set<std::size_t> seen;
      std::size_t total = 0;
      for (const auto& batch : batch_indices(count, bs, 11, 2)) {
        for (std::size_t i : batch) {
          seen.insert(i);
          ++total;
        }
      }
      CHECK(total == count);
      CHECK(seen.size() == count);
      if (count) CHECK(*seen.rbegin() == count - 1);
    }
  }
}

TEST_CASE("gather pulls rows in index order") {
  const Dataset ds = synth_gaussian_classes(2, 4, 3, 1.0, 5);
  const Tensor batch = gather_inputs(ds, {3, 0});
  CHECK(batch.shape() == std::vector<std::size_t>{2, 3, 1, 1});
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(batch[j] == ds.inputs[3 * 3 + j]);
    CHECK(batch[3 + j] == ds.inputs[j]);
  }
  CHECK(gather_labels(ds, {3, 0}) ==
        std::vector<std::size_t>{ds.labels[3], ds.labels[0]});
}
