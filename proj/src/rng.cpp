#include "rectnet/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rectnet {

double RngStream::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller. u1 is shifted into (0, 1] so log never sees zero.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + salt * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor sample_gaussian(const std::vector<std::size_t>& shape, double mean,
                       double std, RngStream& rng) {
  if (std < 0.0 || !std::isfinite(std)) {
    throw std::invalid_argument("gaussian std must be finite and >= 0, got " +
                                std::to_string(std));
  }
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = mean + std * rng.gaussian();
  }
  return t;
}

}  // namespace rectnet
