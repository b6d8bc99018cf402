#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cbonn/dataset.hpp"
#include "cbonn/rng.hpp"

namespace cbonn {

/// x ~ U[0,1], y = sin(2 pi x) + noise_std * xi.
Dataset gen_sine(std::size_t samples, double noise_std, std::uint64_t seed);

/// x ~ U[0,1], y = x^2 + noise_std * xi.
Dataset gen_square(std::size_t samples, double noise_std, std::uint64_t seed);

/// P regression tasks sharing one input sample.
struct TaskSet {
  std::vector<Dataset> tasks;
  std::vector<double> shifts;

  std::size_t size() const { return tasks.size(); }
};

/// Task p (0-based) has targets sin(2 pi x) + shift_p with shifts evenly
/// spaced on [-1, 1]. All tasks reuse the same x draws.
TaskSet gen_shifted_sines(std::size_t tasks, std::size_t samples, std::uint64_t seed);

/// Epoch-based minibatching: each epoch is a fresh seeded permutation cut
/// into ceil(S / S') consecutive batches; the last one may be short.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

  /// Indices of the next batch. The span stays valid until the next call.
  std::span<const std::size_t> next_batch();

  std::size_t batches_per_epoch() const { return batches_per_epoch_; }
  std::size_t batch_size() const { return batch_size_; }
  /// Number of permutations drawn so far.
  std::size_t epochs_started() const { return epochs_started_; }

 private:
  void reshuffle();

  std::size_t size_;
  std::size_t batch_size_;
  std::size_t batches_per_epoch_;
  std::size_t cursor_ = 0;
  std::size_t epochs_started_ = 0;
  std::vector<std::size_t> order_;
  RngStream rng_;
};

}  // namespace cbonn
