#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "imcs/tensor.hpp"

namespace imcs {

// Gaussian blobs around well-separated unit directions. Class c's centroid
// sits at separation * noise_std times a random unit vector; samples add
// isotropic noise_std noise. Labels are balanced (count per class differs by
// at most one) and only ever read by evaluation code.
struct DatasetSpec {
  std::size_t n = 2000;
  std::size_t input_dim = 32;
  std::size_t k_true = 4;
  double separation = 10.0;
  double noise_std = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Dataset {
  Matrix features;          // n x input_dim
  std::vector<int> labels;  // n entries in [0, k_true)
};

Dataset gen_synthetic(const DatasetSpec& spec);

// Random crop-and-jitter recipe for one view family. Full-size views keep a
// wide contiguous coordinate window; small views keep a narrow one. Kept
// coordinates are rescaled by 1/keep, jittered with Gaussian noise, and
// dropped to zero with probability mask_prob.
struct ViewConfig {
  std::size_t n_high = 2;
  std::size_t n_low = 4;
  double high_keep = 0.75;
  double low_keep = 0.35;
  double jitter_std = 0.1;
  double mask_prob = 0.1;

  std::size_t total_views() const { return n_high + n_low; }
  void validate() const;
};

// Views of one batch. views[v] has one row per sample; the first n_high
// entries are the full-size family. Each (seed, sample id, view index)
// triple determines its row completely, independent of batch composition.
struct ViewSetBatch {
  std::vector<Matrix> views;
  std::vector<std::size_t> sample_ids;
  std::uint64_t seed = 0;
};

ViewSetBatch make_views(const Matrix& rows, const std::vector<std::size_t>& sample_ids,
                        const ViewConfig& cfg, std::uint64_t seed);

// Shuffled full batches (the ragged remainder is dropped). batch_size must
// not exceed n.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t epoch_seed);

// Container round-trip for datasets ("features" n x d, "labels" 1 x n).
void save_dataset(const std::string& path, const Dataset& data);
Dataset load_dataset(const std::string& path);

}  // namespace imcs
