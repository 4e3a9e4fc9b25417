#ifndef RECTNET_RNG_HPP_
#define RECTNET_RNG_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "rectnet/tensor.hpp"

namespace rectnet {

/// Deterministic random stream: a seeded mt19937_64 plus a Box-Muller
/// transform for Gaussian draws.
///
/// Generator recipe (fixed so a seed reproduces the same value stream on
/// any run of this implementation):
///   - next_u64(): raw mt19937_64 output.
///   - uniform(): (next_u64() >> 11) * 2^-53, uniformly spaced in [0, 1).
///   - gaussian(): classic Box-Muller on two uniforms, u1 mapped to (0, 1];
///     the second variate of each pair is cached and returned by the next
///     call.
///
/// Streams are bit-stable within this implementation (libm differences may
/// change Gaussian values across platforms, which is acceptable here). An
/// RngStream must not be shared between threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double gaussian();

  /// Uniform integer in [0, bound) via modulo; the tiny modulo bias is
  /// irrelevant for shuffling and the mapping is stable everywhere.
  std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer, used to derive independent sub-stream seeds
/// (init / dropout / shuffle / per-trial) from one base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

/// Tensor of i.i.d. draws from N(mean, std^2), filled in row-major order.
/// std must be >= 0; std == 0 yields a constant tensor.
Tensor sample_gaussian(const std::vector<std::size_t>& shape, double mean,
                       double std, RngStream& rng);

}  // namespace rectnet

#endif  // RECTNET_RNG_HPP_
