#pragma once

// Exact optimal transport between uniform empirical measures with equal atom
// counts, free-support Wasserstein barycenters, and the measure-valued CBO
// dynamics built on them.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cbonn/network.hpp"
#include "cbonn/parallel.hpp"
#include "cbonn/rng.hpp"

namespace cbonn {

/// Read-only view of `count` points in R^dim, row-major.
struct CloudView {
  std::span<const double> coords;
  std::size_t dim = 0;

  std::size_t count() const { return dim == 0 ? 0 : coords.size() / dim; }
  std::span<const double> point(std::size_t i) const { return coords.subspan(i * dim, dim); }
};

/// Owning uniform point cloud.
struct PointCloud {
  std::size_t dim = 0;
  std::vector<double> coords;

  std::size_t count() const { return dim == 0 ? 0 : coords.size() / dim; }
  std::span<const double> point(std::size_t i) const {
    return std::span<const double>(coords).subspan(i * dim, dim);
  }
  CloudView view() const { return {coords, dim}; }
};

inline CloudView view_of(const EmpiricalMeasure& m) { return {m.data(), m.atom_dim()}; }

/// perm[j] is the atom of the second measure coupled with atom j of the first.
/// cost = (1/M) sum_j ||y_j - x_perm[j]||^2 = W2^2 under this coupling.
struct Assignment {
  std::vector<std::size_t> perm;
  double cost = 0.0;
};

struct W2Result {
  double distance = 0.0;
  Assignment assignment;
};

/// Exact W2 between two uniform measures with the same atom count and dimension.
W2Result w2_empirical(CloudView first, CloudView second);
W2Result w2_empirical(const EmpiricalMeasure& first, const EmpiricalMeasure& second);

/// (1/M) sum_j ||y_j - x_perm[j]||^2.
double coupling_cost(CloudView first, CloudView second, std::span<const std::size_t> perm);

struct BarycenterOptions {
  double tol = 1e-12;            // relative objective decrease that counts as stalled
  std::size_t max_iters = 50;
  std::optional<PointCloud> init;  // defaults to the support of the heaviest input
  ExecPolicy policy;
};

struct Barycenter {
  PointCloud support;
  /// couplings[n][j]: atom of input n coupled with barycenter atom j.
  std::vector<std::vector<std::size_t>> couplings;
  bool converged = false;
  double objective = 0.0;  // F = 1/2 sum_n beta_n W2^2(support, input_n)
  std::size_t iterations = 0;
  std::vector<double> objective_history;  // F at each iterate, non-increasing
};

/// Free-support barycenter by alternating exact couplings with the weighted
/// support update y_j = sum_n beta_n x_{n, couplings[n][j]}. Stops when the
/// couplings repeat, when F stalls, or after max_iters (converged = false).
/// The result is a stationary point; global optimality is not guaranteed.
Barycenter barycenter(std::span<const CloudView> inputs, std::span<const double> weights,
                      const BarycenterOptions& options = {});

/// max_j || sum_n beta_n x_{n, couplings[n][j]} - y_j ||.
double first_order_residual(const Barycenter& bary, std::span<const CloudView> inputs,
                            std::span<const double> weights);

/// N measures with equal shape, their barycenter weights and noise streams.
struct MeasureEnsemble {
  std::vector<EmpiricalMeasure> measures;
  std::vector<double> weights;
  std::vector<RngStream> noise;

  std::size_t size() const { return measures.size(); }
  std::vector<CloudView> views() const;
  void validate() const;

  /// Atoms drawn from U[lo, hi] per coordinate, uniform weights.
  static MeasureEnsemble uniform(const NetworkShape& shape, std::size_t n, double lo, double hi,
                                 std::uint64_t seed);
};

Barycenter barycenter(const MeasureEnsemble& ensemble, const BarycenterOptions& options = {});

/// Barycenter support as a measure with the ensemble's network shape.
EmpiricalMeasure barycenter_measure(const Barycenter& bary, const NetworkShape& shape);

/// Atom i of measure n moves toward barycenter atom j with couplings[n][j] = i:
/// x <- y + (1 - lambda dt)(x - y) + sigma sqrt(dt) xi, xi ~ N(0, I) additive.
void ot_cbo_step(MeasureEnsemble& ensemble, const Barycenter& bary, double lambda, double sigma,
                 double dt, const ExecPolicy& policy = {});

/// (1 / 2N) sum_n W2^2(mu_n, barycenter), each W2 solved afresh.
double ensemble_variance(const MeasureEnsemble& ensemble, const Barycenter& bary);
double ensemble_variance(std::span<const CloudView> inputs, const PointCloud& center);

/// Empirical risk of the network a measure represents.
double measure_risk(const EmpiricalMeasure& measure, const BatchRef& batch, LossKind kind);

}  // namespace cbonn
