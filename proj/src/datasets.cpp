#include "cbonn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace cbonn {

void Dataset::validate() const {
  if (input_dim == 0) throw std::invalid_argument(name + ": input_dim must be positive");
  if (inputs.size() % input_dim != 0)
    throw std::invalid_argument(name + ": input buffer is not a multiple of input_dim");
  const std::size_t s = size();
  if (s == 0) throw std::invalid_argument(name + ": dataset is empty");
  if (target_kind == TargetKind::Real) {
    if (targets.size() != s * output_dim)
      throw std::invalid_argument(name + ": target count does not match input count");
  } else {
    if (labels.size() != s)
      throw std::invalid_argument(name + ": label count does not match input count");
    for (std::size_t i = 0; i < s; ++i)
      if (labels[i] >= output_dim)
        throw std::out_of_range(name + ": label " + std::to_string(labels[i]) + " at sample " +
                                std::to_string(i) + " exceeds class count");
  }
}

namespace {

template <class Fn>
Dataset gen_regression(const char* name, std::size_t samples, double noise_std, std::uint64_t seed,
                       Fn&& target) {
  if (samples == 0) throw std::invalid_argument("sample count must be positive");
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be non-negative");
  Dataset ds;
  ds.name = name;
  ds.input_dim = 1;
  ds.output_dim = 1;
  ds.target_kind = TargetKind::Real;
  ds.inputs.resize(samples);
  ds.targets.resize(samples);
  RngStream rng(seed, StreamDomain::Data, 0);
  for (std::size_t s = 0; s < samples; ++s) {
    const double x = rng.uniform(0.0, 1.0);
    const double xi = rng.normal();
    ds.inputs[s] = x;
    ds.targets[s] = target(x) + noise_std * xi;
  }
  return ds;
}

}  // namespace

Dataset gen_sine(std::size_t samples, double noise_std, std::uint64_t seed) {
  return gen_regression("sine", samples, noise_std, seed,
                        [](double x) { return std::sin(2.0 * std::numbers::pi * x); });
}

Dataset gen_square(std::size_t samples, double noise_std, std::uint64_t seed) {
  return gen_regression("square", samples, noise_std, seed, [](double x) { return x * x; });
}

TaskSet gen_shifted_sines(std::size_t tasks, std::size_t samples, std::uint64_t seed) {
  if (tasks < 2) throw std::invalid_argument("shifted sines need at least two tasks");
  const Dataset base = gen_sine(samples, 0.0, seed);
  TaskSet set;
  set.tasks.reserve(tasks);
  for (std::size_t p = 0; p < tasks; ++p) {
    const double shift =
        -1.0 + 2.0 * static_cast<double>(p) / static_cast<double>(tasks - 1);
    Dataset task = base;
    task.name = "shifted_sine_" + std::to_string(p + 1);
    for (double& y : task.targets) y += shift;
    set.shifts.push_back(shift);
    set.tasks.push_back(std::move(task));
  }
  return set;
}

MinibatchSampler::MinibatchSampler(std::size_t dataset_size, std::size_t batch_size,
                                   std::uint64_t seed)
    : size_(dataset_size),
      batch_size_(batch_size),
      batches_per_epoch_(0),
      order_(dataset_size),
      rng_(seed, StreamDomain::Sampler, 0) {
  if (dataset_size == 0) throw std::invalid_argument("sampler over an empty dataset");
  if (batch_size == 0 || batch_size > dataset_size)
    throw std::invalid_argument("batch size must lie in [1, " + std::to_string(dataset_size) +
                                "], got " + std::to_string(batch_size));
  batches_per_epoch_ = (size_ + batch_size_ - 1) / batch_size_;
  cursor_ = size_;
}

void MinibatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::shuffle(order_.begin(), order_.end(), rng_.engine());
  cursor_ = 0;
  ++epochs_started_;
}

std::span<const std::size_t> MinibatchSampler::next_batch() {
  if (cursor_ >= size_) reshuffle();
  const std::size_t len = std::min(batch_size_, size_ - cursor_);
  std::span<const std::size_t> out(order_.data() + cursor_, len);
  cursor_ += len;
  return out;
}

}  // namespace cbonn
