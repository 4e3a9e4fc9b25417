#ifndef RECTNET_DATA_HPP_
#define RECTNET_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "rectnet/rng.hpp"
#include "rectnet/tensor.hpp"

namespace rectnet {

/// Inputs are [count x channels x height x width]; labels are class
/// indices, one per example, each < class_count. IDX pixels load either
/// raw (0..255) or normalized to [-1, 1] via (v - 127.5) / 127.5. Synthetic
/// data keeps its raw Gaussian values (roughly within +-(separation + 4)).
struct Dataset {
  Tensor inputs;
  std::vector<std::size_t> labels;
  std::size_t class_count = 0;
  std::size_t count() const { return labels.size(); }
};

/// Reads big-endian IDX files: magic 0x00000803 (rank-3 byte images) and
/// 0x00000801 (rank-1 byte labels). Image and label counts must agree.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 bool normalize);

/// Writes a dataset back to IDX. Inputs must hold integral values in
/// [0, 255] (i.e. loaded with normalize = false) and one channel.
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

/// Class centers at separation * (random unit direction per class), drawn
/// deterministically from the seed. [classes x dims].
Tensor synth_class_centers(std::size_t classes, std::size_t dims,
                           double separation, std::uint64_t seed);

/// classes * per_class examples, class c drawn from N(center_c, I), then
/// deterministically shuffled. Inputs are shaped [count x dims x 1 x 1].
Dataset synth_gaussian_classes(std::size_t classes, std::size_t per_class,
                               std::size_t dims, double separation,
                               std::uint64_t seed);

/// Epoch-deterministic batch order: a Fisher-Yates permutation seeded with
/// shuffle_seed XOR epoch, chunked into batch_size groups; the final
/// partial batch is kept.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t count,
                                                    std::size_t batch_size,
                                                    std::uint64_t shuffle_seed,
                                                    std::uint64_t epoch);

Tensor gather_inputs(const Dataset& ds, const std::vector<std::size_t>& idx);
std::vector<std::size_t> gather_labels(const Dataset& ds,
                                       const std::vector<std::size_t>& idx);

}  // namespace rectnet

#endif  // RECTNET_DATA_HPP_
