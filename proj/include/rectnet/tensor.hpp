#ifndef RECTNET_TENSOR_HPP_
#define RECTNET_TENSOR_HPP_

#include <cstddef>
#include <string>
#include <vector>

namespace rectnet {

/// Dense row-major N-dimensional array of doubles.
///
/// The data vector always has exactly prod(shape) elements. Everything in
/// this project runs in 64-bit floating point: the gradient checks need
/// ~1e-6 relative agreement with finite differences, which float32 cannot
/// deliver. Operations on finite inputs produce finite outputs; callers
/// that can overflow (the training loop) must check via all_finite()
/// rather than letting NaN/Inf propagate into downstream results.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t dim(std::size_t axis) const { return shape_[axis]; }

  /// Same data, new shape; element counts must agree.
  Tensor reshaped(std::vector<std::size_t> new_shape) const;

  bool all_finite() const;
  std::string shape_str() const;  // e.g. "[2x3]"

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

/// Standard matrix product of rank-2 tensors [m x k] * [k x n] -> [m x n].
/// Accumulation runs over k in ascending order for every output element.
Tensor matmul(const Tensor& a, const Tensor& b);

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // population variance: divide by count, not count-1
};

/// Sample mean and population variance (biased, divide by N). The variance
/// algebra this project verifies is about distribution moments, so the
/// biased estimator is the right one.
Moments moments(const Tensor& t);

}  // namespace rectnet

#endif  // RECTNET_TENSOR_HPP_
