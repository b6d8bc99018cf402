#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cbonn {

enum class TargetKind { Real, ClassIndex };

/// S input/target pairs stored row-major. Class labels are 0-based.
struct Dataset {
  std::string name;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  TargetKind target_kind = TargetKind::Real;
  std::vector<double> inputs;          // S x input_dim
  std::vector<double> targets;         // S x output_dim, Real targets only
  std::vector<std::uint32_t> labels;   // S, ClassIndex targets only
  std::vector<std::string> notes;      // provenance carried into run metadata

  std::size_t size() const { return input_dim == 0 ? 0 : inputs.size() / input_dim; }

  std::span<const double> input(std::size_t s) const {
    return {inputs.data() + s * input_dim, input_dim};
  }
  std::span<const double> target(std::size_t s) const {
    return {targets.data() + s * output_dim, output_dim};
  }

  /// Throws std::invalid_argument when sizes or labels are inconsistent.
  void validate() const;
};

/// A minibatch: either the whole dataset in ascending order or an index list.
class BatchRef {
 public:
  explicit BatchRef(const Dataset& data) : data_(&data), full_(true) {}
  BatchRef(const Dataset& data, std::span<const std::size_t> indices)
      : data_(&data), indices_(indices), full_(false) {}

  const Dataset& data() const { return *data_; }
  std::size_t size() const { return full_ ? data_->size() : indices_.size(); }
  std::size_t index(std::size_t k) const { return full_ ? k : indices_[k]; }

 private:
  const Dataset* data_;
  std::span<const std::size_t> indices_;
  bool full_;
};

}  // namespace cbonn
