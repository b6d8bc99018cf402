#include "cbonn/ot.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "cbonn/assignment.hpp"

namespace cbonn {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double t = a[k] - b[k];
    s += t * t;
  }
  return s;
}

void check_pair(CloudView first, CloudView second) {
  if (first.dim != second.dim) throw DimensionError("atom dimension", first.dim, second.dim);
  if (first.count() != second.count())
    throw DimensionError("atom count", first.count(), second.count());
  if (first.count() == 0) throw std::invalid_argument("measure without atoms");
}

// Optimal coupling of `rows` (barycenter side) against `cols`.
AssignmentSolution couple(CloudView rows, CloudView cols) {
  const std::size_t m = rows.count();
  std::vector<double> cost(m * m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t i = 0; i < m; ++i)
      cost[j * m + i] = squared_distance(rows.point(j), cols.point(i));
  return solve_assignment(cost, m);
}

// Same summation order as AssignmentSolution::total_cost.
double raw_cost(CloudView rows, CloudView cols, std::span<const std::size_t> perm) {
  double s = 0.0;
  for (std::size_t j = 0; j < perm.size(); ++j) s += squared_distance(rows.point(j), cols.point(perm[j]));
  return s;
}

}  // namespace

double coupling_cost(CloudView first, CloudView second, std::span<const std::size_t> perm) {
  check_pair(first, second);
  if (perm.size() != first.count()) throw DimensionError("coupling", first.count(), perm.size());
  double s = 0.0;
  for (std::size_t j = 0; j < perm.size(); ++j)
    s += squared_distance(first.point(j), second.point(perm[j]));
  return s / static_cast<double>(perm.size());
}

W2Result w2_empirical(CloudView first, CloudView second) {
  check_pair(first, second);
  auto sol = couple(first, second);
  W2Result out;
  out.assignment.perm = std::move(sol.col_of_row);
  out.assignment.cost = coupling_cost(first, second, out.assignment.perm);
  out.distance = std::sqrt(out.assignment.cost);
  return out;
}

W2Result w2_empirical(const EmpiricalMeasure& first, const EmpiricalMeasure& second) {
  return w2_empirical(view_of(first), view_of(second));
}

namespace {

void check_inputs(std::span<const CloudView> inputs, std::span<const double> weights) {
  if (inputs.empty()) throw std::invalid_argument("barycenter of no measures");
  if (weights.size() != inputs.size()) throw DimensionError("weights", inputs.size(), weights.size());
  double total = 0.0;
  for (std::size_t n = 0; n < weights.size(); ++n) {
    if (!(weights[n] >= 0.0) || !std::isfinite(weights[n]))
      throw std::invalid_argument("barycenter weight " + std::to_string(n) + " is not a finite non-negative number");
    total += weights[n];
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("barycenter weights must sum to 1");
  for (const auto& in : inputs) check_pair(inputs[0], in);
}

void update_support(PointCloud& y, std::span<const CloudView> inputs, std::span<const double> weights,
                    const std::vector<std::vector<std::size_t>>& couplings) {
  std::fill(y.coords.begin(), y.coords.end(), 0.0);
  const std::size_t m = y.count();
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const double w = weights[n];
    if (w == 0.0) continue;
    for (std::size_t j = 0; j < m; ++j) {
      const auto x = inputs[n].point(couplings[n][j]);
      double* yj = y.coords.data() + j * y.dim;
      for (std::size_t k = 0; k < y.dim; ++k) yj[k] += w * x[k];
    }
  }
}

double objective(const PointCloud& y, std::span<const CloudView> inputs, std::span<const double> weights,
                 const std::vector<std::vector<std::size_t>>& couplings) {
  double f = 0.0;
  for (std::size_t n = 0; n < inputs.size(); ++n)
    f += weights[n] * coupling_cost(y.view(), inputs[n], couplings[n]);
  return 0.5 * f;
}

// Alternates exact couplings with the weighted support update, starting from `start`.
Barycenter fixed_point(std::span<const CloudView> inputs, std::span<const double> weights,
                       const BarycenterOptions& options, PointCloud start) {
  const std::size_t n_inputs = inputs.size();

  Barycenter out;
  out.support = std::move(start);

  std::vector<std::vector<std::size_t>> previous;
  std::vector<std::vector<std::size_t>> current(n_inputs);
  double last_f = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0;; ++it) {
    parallel_for(n_inputs, options.policy, [&](std::size_t n) {
      auto sol = couple(out.support.view(), inputs[n]);
      // Keep the previous coupling when it is still optimal so ties cannot cycle.
      if (!previous.empty() && raw_cost(out.support.view(), inputs[n], previous[n]) <= sol.total_cost) {
        current[n] = previous[n];
      } else {
        current[n] = std::move(sol.col_of_row);
      }
    });
    const double f = objective(out.support, inputs, weights, current);
    out.objective_history.push_back(f);
    out.objective = f;
    out.couplings = current;
    out.iterations = it;

    if (current == previous) {
      out.converged = true;
      break;
    }
    const bool stalled = it > 0 && last_f - f <= options.tol * last_f;
    if (it >= options.max_iters) {
      out.converged = false;
      break;
    }
    update_support(out.support, inputs, weights, current);
    previous = current;
    if (stalled) {
      out.objective = objective(out.support, inputs, weights, current);
      out.objective_history.push_back(out.objective);
      out.converged = true;
      break;
    }
    last_f = f;
  }
  return out;
}

// One Gauss-Seidel sweep: re-couple each measure against the weighted mean of
// the others. Each accepted change strictly lowers F at the mean support.
bool recouple(std::span<const CloudView> inputs, std::span<const double> weights,
              std::vector<std::vector<std::size_t>>& couplings) {
  const std::size_t m = inputs[0].count();
  const std::size_t dim = inputs[0].dim;
  PointCloud y{dim, std::vector<double>(m * dim)};
  update_support(y, inputs, weights, couplings);
  PointCloud others{dim, std::vector<double>(m * dim)};
  bool changed = false;
  for (std::size_t n = 0; n < inputs.size(); ++n) {
    const double w = weights[n];
    if (w == 0.0 || w >= 1.0) continue;
    for (std::size_t j = 0; j < m; ++j) {
      const auto x = inputs[n].point(couplings[n][j]);
      for (std::size_t k = 0; k < dim; ++k)
        others.coords[j * dim + k] = (y.coords[j * dim + k] - w * x[k]) / (1.0 - w);
    }
    auto sol = couple(others.view(), inputs[n]);
    if (sol.total_cost < raw_cost(others.view(), inputs[n], couplings[n])) {
      couplings[n] = std::move(sol.col_of_row);
      update_support(y, inputs, weights, couplings);
      changed = true;
    }
  }
  return changed;
}

}  // namespace

Barycenter barycenter(std::span<const CloudView> inputs, std::span<const double> weights,
                      const BarycenterOptions& options) {
  check_inputs(inputs, weights);
  PointCloud start;
  if (options.init) {
    check_pair(options.init->view(), inputs[0]);
    start = *options.init;
  } else {
    std::size_t heaviest = 0;
    for (std::size_t n = 1; n < inputs.size(); ++n)
      if (weights[n] > weights[heaviest]) heaviest = n;
    start.dim = inputs[0].dim;
    start.coords.assign(inputs[heaviest].coords.begin(), inputs[heaviest].coords.end());
  }

  Barycenter out = fixed_point(inputs, weights, options, std::move(start));
  // The fixed point only moves one support at a time; escape its local minima
  // by re-coupling single measures, then settle the support again.
  while (out.iterations + 1 < options.max_iters) {
    auto couplings = out.couplings;
    if (!recouple(inputs, weights, couplings)) break;
    PointCloud y{out.support.dim, std::vector<double>(out.support.coords.size())};
    update_support(y, inputs, weights, couplings);
    BarycenterOptions rest = options;
    rest.max_iters = options.max_iters - out.iterations - 1;
    Barycenter next = fixed_point(inputs, weights, rest, std::move(y));
    next.objective_history.insert(next.objective_history.begin(), out.objective_history.begin(),
                                  out.objective_history.end());
    next.iterations += out.iterations + 1;
    out = std::move(next);
  }
  return out;
}

double first_order_residual(const Barycenter& bary, std::span<const CloudView> inputs,
                            std::span<const double> weights) {
  PointCloud target{bary.support.dim, std::vector<double>(bary.support.coords.size())};
  update_support(target, inputs, weights, bary.couplings);
  double worst = 0.0;
  for (std::size_t j = 0; j < target.count(); ++j)
    worst = std::max(worst, std::sqrt(squared_distance(target.point(j), bary.support.point(j))));
  return worst;
}

std::vector<CloudView> MeasureEnsemble::views() const {
  std::vector<CloudView> v;
  v.reserve(measures.size());
  for (const auto& m : measures) v.push_back(view_of(m));
  return v;
}

void MeasureEnsemble::validate() const {
  if (measures.empty()) throw std::invalid_argument("empty measure ensemble");
  if (weights.size() != measures.size()) throw DimensionError("weights", measures.size(), weights.size());
  for (const auto& m : measures)
    if (!(m.shape() == measures[0].shape()))
      throw std::invalid_argument("measures in one ensemble must share a shape");
}

MeasureEnsemble MeasureEnsemble::uniform(const NetworkShape& shape, std::size_t n, double lo,
                                         double hi, std::uint64_t seed) {
  MeasureEnsemble e;
  e.measures.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream init(seed, StreamDomain::Init, i);
    std::vector<double> atoms(shape.param_count());
    for (double& v : atoms) v = init.uniform(lo, hi);
    e.measures.emplace_back(shape, std::move(atoms));
    e.noise.emplace_back(seed, StreamDomain::Noise, i);
  }
  e.weights.assign(n, 1.0 / static_cast<double>(n));
  return e;
}

Barycenter barycenter(const MeasureEnsemble& ensemble, const BarycenterOptions& options) {
  ensemble.validate();
  const auto views = ensemble.views();
  return barycenter(views, ensemble.weights, options);
}

EmpiricalMeasure barycenter_measure(const Barycenter& bary, const NetworkShape& shape) {
  if (bary.support.dim != shape.atom_dim())
    throw DimensionError("atom dimension", shape.atom_dim(), bary.support.dim);
  return EmpiricalMeasure(shape, bary.support.coords);
}

void ot_cbo_step(MeasureEnsemble& ensemble, const Barycenter& bary, double lambda, double sigma,
                 double dt, const ExecPolicy& policy) {
  ensemble.validate();
  const std::size_t n_measures = ensemble.size();
  if (bary.couplings.size() != n_measures)
    throw DimensionError("barycenter couplings (stale barycenter)", n_measures, bary.couplings.size());
  if (ensemble.noise.size() != n_measures)
    throw DimensionError("noise streams", n_measures, ensemble.noise.size());
  const std::size_t m = ensemble.measures[0].atom_count();
  const std::size_t dim = ensemble.measures[0].atom_dim();
  if (bary.support.dim != dim || bary.support.count() != m)
    throw DimensionError("barycenter support (stale barycenter)", m, bary.support.count());
  for (const auto& c : bary.couplings)
    if (c.size() != m) throw DimensionError("coupling (stale barycenter)", m, c.size());

  const double keep = 1.0 - lambda * dt;
  const double noise_scale = sigma * std::sqrt(dt);
  parallel_for(n_measures, policy, [&](std::size_t n) {
    std::vector<std::size_t> target_of_atom(m);
    for (std::size_t j = 0; j < m; ++j) target_of_atom[bary.couplings[n][j]] = j;
    auto& measure = ensemble.measures[n];
    for (std::size_t i = 0; i < m; ++i) {
      auto x = measure.atom(i);
      const auto y = bary.support.point(target_of_atom[i]);
      for (std::size_t k = 0; k < dim; ++k) {
        const double xi = ensemble.noise[n].normal();
        x[k] = y[k] + keep * (x[k] - y[k]) + noise_scale * xi;
      }
    }
  });
}

double ensemble_variance(std::span<const CloudView> inputs, const PointCloud& center) {
  if (inputs.empty()) throw std::invalid_argument("variance of an empty ensemble");
  double total = 0.0;
  for (const auto& in : inputs) total += w2_empirical(in, center.view()).assignment.cost;
  return total / (2.0 * static_cast<double>(inputs.size()));
}

double ensemble_variance(const MeasureEnsemble& ensemble, const Barycenter& bary) {
  ensemble.validate();
  const auto views = ensemble.views();
  return ensemble_variance(views, bary.support);
}

double measure_risk(const EmpiricalMeasure& measure, const BatchRef& batch, LossKind kind) {
  if (batch.size() == 0) throw std::invalid_argument("empirical risk of an empty batch");
  check_compatible(measure.shape(), batch.data(), kind);
  std::vector<double> preds(batch.size() * measure.shape().output_dim);
  predict_batch(measure.shape(), measure.data(), batch, preds);
  return risk_from_predictions(kind, batch, preds);
}

}  // namespace cbonn
