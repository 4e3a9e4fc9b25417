#include "rectnet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace rectnet {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) {
    throw std::invalid_argument("tensor shape must be nonempty");
  }
  for (std::size_t d : shape) {
    if (d == 0) {
      throw std::invalid_argument("tensor dimensions must be positive, got " +
                                  shape_to_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  check_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data_.size()) +
                                " does not match shape " + shape_str());
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.data_) v = value;
  return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
  check_shape(new_shape);
  if (shape_numel(new_shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_str() + " to " +
                                shape_to_string(new_shape));
  }
  Tensor t;
  t.shape_ = std::move(new_shape);
  t.data_ = data_;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul expects rank-2 tensors, got " +
                                a.shape_str() + " and " + b.shape_str());
  }
  const std::size_t m = a.dim(0), k = a.dim(1);
  const std::size_t k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw std::invalid_argument("matmul dimension mismatch: " + a.shape_str() +
                                " x " + b.shape_str());
  }
  Tensor out({m, n});
  // i,k,j loop order: for each output element the k-summation still runs in
  // ascending order, so results are bit-identical to the naive i,j,k form.
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = pa[i * k + kk];
      const double* brow = pb + kk * n;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        orow[j] += av * brow[j];
      }
    }
  }
  return out;
}

Moments moments(const Tensor& t) {
  if (t.empty()) {
    throw std::invalid_argument("moments of an empty tensor are undefined");
  }
  const std::size_t n = t.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += t[i];
  const double mean = sum / static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = t[i] - mean;
    sq += d * d;
  }
  return Moments{mean, sq / static_cast<double>(n)};
}

}  // namespace rectnet
