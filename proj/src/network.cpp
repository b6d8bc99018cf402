#include "cbonn/network.hpp"

#include <algorithm>
#include <cmath>

namespace cbonn {

std::string to_string(LossKind kind) {
  return kind == LossKind::SquaredError ? "squared_error" : "cross_entropy";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "squared_error" || name == "mse") return LossKind::SquaredError;
  if (name == "cross_entropy" || name == "ce") return LossKind::CrossEntropy;
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

DimensionError::DimensionError(std::string dimension, std::size_t expected, std::size_t actual)
    : std::invalid_argument("dimension mismatch in " + dimension + ": expected " +
                            std::to_string(expected) + ", got " + std::to_string(actual)),
      dimension_(std::move(dimension)),
      expected_(expected),
      actual_(actual) {}

void NetworkShape::validate() const {
  if (input_dim == 0) throw DimensionError("input_dim", 1, 0);
  if (width == 0) throw DimensionError("width", 1, 0);
  if (output_dim == 0) throw DimensionError("output_dim", 1, 0);
}

namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) throw NonFiniteError(std::string("non-finite ") + what, i);
}

}  // namespace

ParamVector::ParamVector(const NetworkShape& shape)
    : shape_(shape), values_(shape.param_count(), 0.0) {
  shape_.validate();
}

ParamVector::ParamVector(const NetworkShape& shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  shape_.validate();
  if (values_.size() != shape_.param_count())
    throw DimensionError("parameter vector", shape_.param_count(), values_.size());
  check_finite(values_, "parameter");
}

EmpiricalMeasure::EmpiricalMeasure(const NetworkShape& shape, std::vector<double> atoms)
    : shape_(shape), data_(std::move(atoms)) {
  shape_.validate();
  if (data_.size() != shape_.param_count())
    throw DimensionError("measure atoms", shape_.param_count(), data_.size());
  check_finite(data_, "atom coordinate");
}

EmpiricalMeasure EmpiricalMeasure::from_params(const ParamVector& params) {
  const auto v = params.values();
  return EmpiricalMeasure(params.shape(), std::vector<double>(v.begin(), v.end()));
}

ParamVector EmpiricalMeasure::to_params() const { return ParamVector(shape_, data_); }

void predict_batch(const NetworkShape& shape, std::span<const double> params,
                   const BatchRef& batch, std::span<double> out) {
  const std::size_t d = shape.input_dim;
  const std::size_t m_count = shape.width;
  const std::size_t c_count = shape.output_dim;
  const std::size_t a = shape.atom_dim();
  if (params.size() != shape.param_count())
    throw DimensionError("parameter vector", shape.param_count(), params.size());
  if (batch.data().input_dim != d) throw DimensionError("input_dim", d, batch.data().input_dim);
  if (out.size() != batch.size() * c_count)
    throw DimensionError("prediction buffer", batch.size() * c_count, out.size());

  // Transposed copies so the inner loops run over neurons.
  std::vector<double> wt(d * m_count), bias(m_count), ct(m_count * c_count), z(m_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const double* block = params.data() + m * a;
    for (std::size_t j = 0; j < d; ++j) wt[j * m_count + m] = block[j];
    bias[m] = block[d];
    for (std::size_t k = 0; k < c_count; ++k) ct[m * c_count + k] = block[d + 1 + k];
  }
  const double inv_m = 1.0 / static_cast<double>(m_count);

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto x = batch.data().input(batch.index(s));
    std::copy(bias.begin(), bias.end(), z.begin());
    for (std::size_t j = 0; j < d; ++j) {
      const double xv = x[j];
      if (xv == 0.0) continue;
      const double* row = wt.data() + j * m_count;
      for (std::size_t m = 0; m < m_count; ++m) z[m] += xv * row[m];
    }
    double* y = out.data() + s * c_count;
    std::fill(y, y + c_count, 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
      if (!(z[m] > 0.0)) continue;
      const double h = z[m];
      const double* cm = ct.data() + m * c_count;
      for (std::size_t k = 0; k < c_count; ++k) y[k] += h * cm[k];
    }
    for (std::size_t k = 0; k < c_count; ++k) y[k] *= inv_m;
  }
}

namespace {

std::vector<double> forward_flat(const NetworkShape& shape, std::span<const double> params,
                                 std::span<const double> x) {
  if (x.size() != shape.input_dim) throw DimensionError("input_dim", shape.input_dim, x.size());
  Dataset single;
  single.input_dim = shape.input_dim;
  single.inputs.assign(x.begin(), x.end());
  std::vector<double> out(shape.output_dim);
  predict_batch(shape, params, BatchRef(single), out);
  return out;
}

}  // namespace

std::vector<double> forward(const ParamVector& params, std::span<const double> x) {
  return forward_flat(params.shape(), params.values(), x);
}

std::vector<double> forward_measure(const EmpiricalMeasure& measure, std::span<const double> x) {
  return forward_flat(measure.shape(), measure.data(), x);
}

double squared_error_loss(double y_true, double y_pred) {
  if (!std::isfinite(y_pred)) throw NonFiniteError("non-finite prediction", 0);
  const double r = y_true - y_pred;
  return r * r;
}

double cross_entropy_loss(std::size_t label, std::span<const double> logits) {
  if (label >= logits.size())
    throw std::out_of_range("class index " + std::to_string(label) + " out of range for " +
                            std::to_string(logits.size()) + " classes");
  double shift = logits[0];
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (!std::isfinite(logits[k])) throw NonFiniteError("non-finite prediction", k);
    shift = std::max(shift, logits[k]);
  }
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - shift);
  return std::log(sum) - (logits[label] - shift);
}

void check_compatible(const NetworkShape& shape, const Dataset& data, LossKind kind) {
  if (data.input_dim != shape.input_dim)
    throw DimensionError("input_dim", shape.input_dim, data.input_dim);
  if (kind == LossKind::SquaredError) {
    if (data.target_kind != TargetKind::Real)
      throw std::invalid_argument("squared error loss needs real-valued targets");
    if (shape.output_dim != 1) throw DimensionError("output_dim", 1, shape.output_dim);
    if (data.output_dim != 1) throw DimensionError("target dim", 1, data.output_dim);
  } else {
    if (data.target_kind != TargetKind::ClassIndex)
      throw std::invalid_argument("cross-entropy loss needs class-index targets");
    if (data.output_dim != shape.output_dim)
      throw DimensionError("output_dim", shape.output_dim, data.output_dim);
  }
}

double sample_loss(LossKind kind, const Dataset& data, std::size_t s, std::span<const double> pred) {
  if (kind == LossKind::SquaredError) return squared_error_loss(data.targets[s], pred[0]);
  return cross_entropy_loss(data.labels[s], pred);
}

double risk_from_predictions(LossKind kind, const BatchRef& batch, std::span<const double> preds) {
  if (batch.size() == 0) throw std::invalid_argument("empirical risk of an empty batch");
  const std::size_t c = preds.size() / batch.size();
  double sum = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k)
    sum += sample_loss(kind, batch.data(), batch.index(k), preds.subspan(k * c, c));
  return sum / static_cast<double>(batch.size());
}

double empirical_risk(const ParamVector& params, const BatchRef& batch, LossKind kind) {
  if (batch.size() == 0) throw std::invalid_argument("empirical risk of an empty batch");
  check_compatible(params.shape(), batch.data(), kind);
  std::vector<double> preds(batch.size() * params.shape().output_dim);
  predict_batch(params.shape(), params.values(), batch, preds);
  return risk_from_predictions(kind, batch, preds);
}

RiskGradient value_and_gradient(const ParamVector& params, const BatchRef& batch, LossKind kind) {
  if (batch.size() == 0) throw std::invalid_argument("gradient of an empty batch");
  const NetworkShape& shape = params.shape();
  check_compatible(shape, batch.data(), kind);
  const std::size_t d = shape.input_dim;
  const std::size_t m_count = shape.width;
  const std::size_t c_count = shape.output_dim;
  const std::size_t a = shape.atom_dim();
  const auto theta = params.values();

  std::vector<double> wt(d * m_count), bias(m_count), ct(m_count * c_count);
  for (std::size_t m = 0; m < m_count; ++m) {
    const double* block = theta.data() + m * a;
    for (std::size_t j = 0; j < d; ++j) wt[j * m_count + m] = block[j];
    bias[m] = block[d];
    for (std::size_t k = 0; k < c_count; ++k) ct[m * c_count + k] = block[d + 1 + k];
  }
  const double inv_m = 1.0 / static_cast<double>(m_count);

  // Accumulators of the unscaled per-sample terms, summed in batch order.
  std::vector<double> g_wt(d * m_count, 0.0), g_b(m_count, 0.0), g_ct(m_count * c_count, 0.0);
  std::vector<double> z(m_count), dz(m_count), y(c_count), dy(c_count);
  double loss_sum = 0.0;

  for (std::size_t s = 0; s < batch.size(); ++s) {
    const std::size_t idx = batch.index(s);
    const auto x = batch.data().input(idx);
    std::copy(bias.begin(), bias.end(), z.begin());
    for (std::size_t j = 0; j < d; ++j) {
      const double xv = x[j];
      if (xv == 0.0) continue;
      const double* row = wt.data() + j * m_count;
      for (std::size_t m = 0; m < m_count; ++m) z[m] += xv * row[m];
    }
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
      if (!(z[m] > 0.0)) continue;
      const double* cm = ct.data() + m * c_count;
      for (std::size_t k = 0; k < c_count; ++k) y[k] += z[m] * cm[k];
    }
    for (std::size_t k = 0; k < c_count; ++k) y[k] *= inv_m;

    loss_sum += sample_loss(kind, batch.data(), idx, y);
    if (kind == LossKind::SquaredError) {
      dy[0] = 2.0 * (y[0] - batch.data().targets[idx]);
    } else {
      double shift = y[0];
      for (double v : y) shift = std::max(shift, v);
      double total = 0.0;
      for (std::size_t k = 0; k < c_count; ++k) {
        dy[k] = std::exp(y[k] - shift);
        total += dy[k];
      }
      for (std::size_t k = 0; k < c_count; ++k) dy[k] /= total;
      dy[batch.data().labels[idx]] -= 1.0;
    }

    for (std::size_t m = 0; m < m_count; ++m) {
      if (!(z[m] > 0.0)) {
        dz[m] = 0.0;
        continue;
      }
      const double* cm = ct.data() + m * c_count;
      double* gcm = g_ct.data() + m * c_count;
      double dh = 0.0;
      for (std::size_t k = 0; k < c_count; ++k) {
        dh += dy[k] * cm[k];
        gcm[k] += dy[k] * z[m];
      }
      dz[m] = dh;
      g_b[m] += dh;
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double xv = x[j];
      if (xv == 0.0) continue;
      double* row = g_wt.data() + j * m_count;
      for (std::size_t m = 0; m < m_count; ++m) row[m] += xv * dz[m];
    }
  }

  const double n = static_cast<double>(batch.size());
  const double scale = inv_m / n;
  RiskGradient out;
  out.risk = loss_sum / n;
  out.gradient.assign(shape.param_count(), 0.0);
  for (std::size_t m = 0; m < m_count; ++m) {
    double* block = out.gradient.data() + m * a;
    for (std::size_t j = 0; j < d; ++j) block[j] = g_wt[j * m_count + m] * scale;
    block[d] = g_b[m] * scale;
    for (std::size_t k = 0; k < c_count; ++k) block[d + 1 + k] = g_ct[m * c_count + k] * scale;
  }
  return out;
}

std::vector<double> gradient(const ParamVector& params, const BatchRef& batch, LossKind kind) {
  return value_and_gradient(params, batch, kind).gradient;
}

double barron_estimate(const EmpiricalMeasure& measure) {
  double best = 0.0;
  for (std::size_t i = 0; i < measure.atom_count(); ++i) {
    double c_inf = 0.0;
    for (double v : measure.c(i)) c_inf = std::max(c_inf, std::abs(v));
    double w_l1 = 0.0;
    for (double v : measure.w(i)) w_l1 += std::abs(v);
    best = std::max(best, c_inf * (w_l1 + std::abs(measure.b(i))));
  }
  return best;
}

}  // namespace cbonn
