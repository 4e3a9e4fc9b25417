#include "rectnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace rectnet {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("truncated IDX file '" + path + "'");
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
      static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::vector<unsigned char> read_payload(std::ifstream& in, std::size_t n,
                                        const std::string& path) {
  std::vector<unsigned char> buf(n);
  if (!in.read(reinterpret_cast<char*>(buf.data()),
               static_cast<std::streamsize>(n))) {
    throw std::runtime_error("truncated IDX file '" + path + "'");
  }
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 bool normalize) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot open '" + images_path + "'");
  const std::uint32_t img_magic = read_be32(img, images_path);
  if (img_magic != kImagesMagic) {
    throw std::runtime_error("bad IDX image magic in '" + images_path +
                             "': expected " + hex32(kImagesMagic) + ", found " +
                             hex32(img_magic));
  }
  const std::uint32_t count = read_be32(img, images_path);
  const std::uint32_t rows = read_be32(img, images_path);
  const std::uint32_t cols = read_be32(img, images_path);

  std::ifstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw std::runtime_error("cannot open '" + labels_path + "'");
  const std::uint32_t lbl_magic = read_be32(lbl, labels_path);
  if (lbl_magic != kLabelsMagic) {
    throw std::runtime_error("bad IDX label magic in '" + labels_path +
                             "': expected " + hex32(kLabelsMagic) + ", found " +
                             hex32(lbl_magic));
  }
  const std::uint32_t lbl_count = read_be32(lbl, labels_path);
  if (lbl_count != count) {
    throw std::runtime_error("IDX count mismatch: " + std::to_string(count) +
                             " images vs " + std::to_string(lbl_count) +
                             " labels");
  }

  const std::size_t pixels = std::size_t(count) * rows * cols;
  const std::vector<unsigned char> img_bytes =
      read_payload(img, pixels, images_path);
  const std::vector<unsigned char> lbl_bytes =
      read_payload(lbl, count, labels_path);

  Dataset ds;
  ds.inputs = Tensor({count, 1, rows, cols});
  for (std::size_t i = 0; i < pixels; ++i) {
    const double v = static_cast<double>(img_bytes[i]);
    ds.inputs[i] = normalize ? (v - 127.5) / 127.5 : v;
  }
  ds.labels.resize(count);
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    ds.labels[i] = lbl_bytes[i];
    max_label = std::max<std::size_t>(max_label, lbl_bytes[i]);
  }
  ds.class_count = max_label + 1;
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  if (ds.inputs.rank() != 4 || ds.inputs.dim(1) != 1) {
    throw std::invalid_argument("save_idx expects [N x 1 x H x W] inputs");
  }
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot write '" + images_path + "'");
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(ds.count()));
  write_be32(img, static_cast<std::uint32_t>(ds.inputs.dim(2)));
  write_be32(img, static_cast<std::uint32_t>(ds.inputs.dim(3)));
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
    const double v = ds.inputs[i];
    if (v < 0.0 || v > 255.0 || v != std::floor(v)) {
      throw std::invalid_argument(
          "save_idx requires raw byte pixel values in [0, 255]");
    }
    const unsigned char b = static_cast<unsigned char>(v);
    img.write(reinterpret_cast<const char*>(&b), 1);
  }
  std::ofstream lbl(labels_path, std::ios::binary);
  if (!lbl) throw std::runtime_error("cannot write '" + labels_path + "'");
  write_be32(lbl, kLabelsMagic);
  write_be32(lbl, static_cast<std::uint32_t>(ds.count()));
  for (std::size_t label : ds.labels) {
    const unsigned char b = static_cast<unsigned char>(label);
    lbl.write(reinterpret_cast<const char*>(&b), 1);
  }
}

Tensor synth_class_centers(std::size_t classes, std::size_t dims,
                           double separation, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (separation < 0) throw std::invalid_argument("separation must be >= 0");
  RngStream rng(seed);
  Tensor centers({classes, dims});
  for (std::size_t c = 0; c < classes; ++c) {
    double norm_sq = 0.0;
    for (std::size_t j = 0; j < dims; ++j) {
      const double v = rng.gaussian();
      centers[c * dims + j] = v;
      norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    for (std::size_t j = 0; j < dims; ++j) {
      centers[c * dims + j] =
          norm > 0 ? separation * centers[c * dims + j] / norm : 0.0;
    }
  }
  return centers;
}

Dataset synth_gaussian_classes(std::size_t classes, std::size_t per_class,
                               std::size_t dims, double separation,
                               std::uint64_t seed) {
  const Tensor centers = synth_class_centers(classes, dims, separation, seed);
  // Continue the same stream the centers consumed so the whole dataset is a
  // single deterministic draw sequence. The center computation consumes
  // exactly classes * dims gaussians.
  RngStream rng(seed);
  for (std::size_t i = 0; i < classes * dims; ++i) rng.gaussian();

  const std::size_t count = classes * per_class;
  Dataset ds;
  ds.class_count = classes;
  ds.inputs = Tensor({count, dims, 1, 1});
  ds.labels.resize(count);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < per_class; ++s) {
      const std::size_t row = c * per_class + s;
      ds.labels[row] = c;
      for (std::size_t j = 0; j < dims; ++j) {
        ds.inputs[row * dims + j] = centers[c * dims + j] + rng.gaussian();
      }
    }
  }
  // Deterministic Fisher-Yates shuffle of (input row, label) pairs.
  for (std::size_t i = count > 0 ? count - 1 : 0; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    if (i == j) continue;
    std::swap(ds.labels[i], ds.labels[j]);
    for (std::size_t k = 0; k < dims; ++k) {
      std::swap(ds.inputs[i * dims + k], ds.inputs[j * dims + k]);
    }
  }
  return ds;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t shuffle_seed,
                                                    std::uint64_t epoch) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(shuffle_seed ^ epoch);
  for (std::size_t i = count; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

Tensor gather_inputs(const Dataset& ds, const std::vector<std::size_t>& idx) {
  const std::size_t per = ds.inputs.size() / ds.count();
  std::vector<std::size_t> shape = ds.inputs.shape();
  shape[0] = idx.size();
  Tensor out(shape);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* src = ds.inputs.data() + idx[i] * per;
    double* dst = out.data() + i * per;
    for (std::size_t j = 0; j < per; ++j) dst[j] = src[j];
  }
  return out;
}

std::vector<std::size_t> gather_labels(const Dataset& ds,
                                       const std::vector<std::size_t>& idx) {
  std::vector<std::size_t> out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[idx[i]];
  return out;
}

}  // namespace rectnet
