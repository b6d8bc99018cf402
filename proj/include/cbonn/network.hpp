#pragma once

// Two-layer ReLU networks g(x) = (1/M) sum_m c_m relu(w_m . x + b_m), viewed
// either as a flat parameter vector or as an empirical measure over neurons.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbonn/dataset.hpp"

namespace cbonn {

enum class Activation { ReLU };
enum class LossKind { SquaredError, CrossEntropy };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// Raised when an input's extent does not match the network it is used with.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(std::string dimension, std::size_t expected, std::size_t actual);

  const std::string& dimension() const { return dimension_; }
  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

 private:
  std::string dimension_;
  std::size_t expected_;
  std::size_t actual_;
};

/// Raised when a value that must be finite is not.
class NonFiniteError : public std::domain_error {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : std::domain_error(what + " (index " + std::to_string(index) + ")"), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

struct NetworkShape {
  std::size_t input_dim = 1;   // d
  std::size_t width = 1;       // M
  std::size_t output_dim = 1;  // C
  Activation activation = Activation::ReLU;

  /// Length of one neuron block [w (d), b, c (C)].
  std::size_t atom_dim() const { return input_dim + 1 + output_dim; }
  std::size_t param_count() const { return width * atom_dim(); }
  void validate() const;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Flat parameters laid out as M contiguous blocks [w_m | b_m | c_m].
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(const NetworkShape& shape);
  ParamVector(const NetworkShape& shape, std::vector<double> values);

  const NetworkShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> neuron(std::size_t m) const {
    return {values_.data() + m * shape_.atom_dim(), shape_.atom_dim()};
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  NetworkShape shape_;
  std::vector<double> values_;
};

/// Uniform-weight measure (1/M) sum_m delta(w_m, b_m, c_m). The atom order is
/// the neuron order of the matching ParamVector.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  EmpiricalMeasure(const NetworkShape& shape, std::vector<double> atoms);

  static EmpiricalMeasure from_params(const ParamVector& params);
  ParamVector to_params() const;

  const NetworkShape& shape() const { return shape_; }
  std::size_t atom_count() const { return shape_.width; }
  std::size_t atom_dim() const { return shape_.atom_dim(); }

  std::span<const double> atom(std::size_t i) const {
    return {data_.data() + i * atom_dim(), atom_dim()};
  }
  std::span<double> atom(std::size_t i) { return {data_.data() + i * atom_dim(), atom_dim()}; }
  std::span<const double> w(std::size_t i) const { return atom(i).first(shape_.input_dim); }
  double b(std::size_t i) const { return atom(i)[shape_.input_dim]; }
  std::span<const double> c(std::size_t i) const { return atom(i).last(shape_.output_dim); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const EmpiricalMeasure&, const EmpiricalMeasure&) = default;

 private:
  NetworkShape shape_;
  std::vector<double> data_;
};

std::vector<double> forward(const ParamVector& params, std::span<const double> x);
std::vector<double> forward_measure(const EmpiricalMeasure& measure, std::span<const double> x);

/// Writes batch.size() x C predictions into `out`. Shared kernel behind
/// forward, the risks and the multi-task evaluation.
void predict_batch(const NetworkShape& shape, std::span<const double> params,
                   const BatchRef& batch, std::span<double> out);

double squared_error_loss(double y_true, double y_pred);
/// -log softmax(logits)[label] with a max shift.
double cross_entropy_loss(std::size_t label, std::span<const double> logits);

/// Loss of sample `s` of `data` against the prediction `pred`.
double sample_loss(LossKind kind, const Dataset& data, std::size_t s, std::span<const double> pred);

/// Checks that `data` fits `shape` under `kind`.
void check_compatible(const NetworkShape& shape, const Dataset& data, LossKind kind);

/// Mean loss over the batch, accumulated in batch order.
double risk_from_predictions(LossKind kind, const BatchRef& batch, std::span<const double> preds);
double empirical_risk(const ParamVector& params, const BatchRef& batch, LossKind kind);

struct RiskGradient {
  double risk = 0.0;
  std::vector<double> gradient;
};

/// Exact gradient of empirical_risk, with relu'(0) = 0.
RiskGradient value_and_gradient(const ParamVector& params, const BatchRef& batch, LossKind kind);
std::vector<double> gradient(const ParamVector& params, const BatchRef& batch, LossKind kind);

/// max_m ||c_m||_inf (||w_m||_1 + |b_m|): an upper bound on the Barron norm
/// of the represented function.
double barron_estimate(const EmpiricalMeasure& measure);

}  // namespace cbonn
