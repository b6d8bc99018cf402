#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cbonn/datasets.hpp"
#include "cbonn/network.hpp"
#include "cbonn/parallel.hpp"
#include "cbonn/rng.hpp"

namespace cbonn {

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double delta = 1e-8;
};

/// First/second moment estimates. Both start at zero; `step` counts updates.
struct AdamState {
  AdamState() = default;
  AdamState(std::size_t params, AdamConfig config) : s(params, 0.0), r(params, 0.0), cfg(config) {}

  std::vector<double> s;
  std::vector<double> r;
  std::uint64_t step = 0;
  AdamConfig cfg;
};

/// Folds gradient `d` into the moments and returns s_hat / (sqrt(r_hat) + delta).
/// Throws NonFiniteError (state untouched) on the first non-finite entry.
std::vector<double> adam_direction(AdamState& state, std::span<const double> d);

/// theta <- theta - dt * adam_direction(state, d).
void adam_step(AdamState& state, ParamVector& params, std::span<const double> d, double dt);

/// Fan-in uniform start for a single network trained by Adam: hidden weights and
/// biases ~ U[-1/sqrt(d), 1/sqrt(d)], output weights ~ U[-1/sqrt(M), 1/sqrt(M)].
ParamVector fan_in_uniform_init(const NetworkShape& shape, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Consensus-based optimisation

struct CBOConfig {
  std::size_t particles = 200;
  double lambda = 1.0;  // drift rate
  double sigma = 1.0;   // diffusion scale
  double alpha = 1e5;   // inverse temperature
  double dt = 0.1;

  void validate() const;
  /// 2 lambda - sigma^2; consensus forms for anisotropic noise when positive.
  double consensus_margin() const { return 2.0 * lambda - sigma * sigma; }
};

struct Ensemble {
  std::vector<ParamVector> particles;
  std::vector<RngStream> noise;  // one stream per particle
  std::vector<double> risks;     // refreshed before each consensus computation

  std::size_t size() const { return particles.size(); }

  /// N particles with every coordinate drawn from U[lo, hi]; particle n uses
  /// its own initialisation stream, and noise stream n is keyed the same way.
  static Ensemble uniform(const NetworkShape& shape, std::size_t n, double lo, double hi,
                          std::uint64_t seed);
};

/// beta_n = exp(-alpha (R_n - min R)) / sum_m exp(-alpha (R_m - min R)).
std::vector<double> gibbs_weights(std::span<const double> risks, double alpha);

/// sum_n weights_n * particles_n, accumulated in particle order.
ParamVector weighted_mean(std::span<const ParamVector> particles, std::span<const double> weights);

ParamVector consensus_point(std::span<const ParamVector> particles, std::span<const double> risks,
                            double alpha);

/// Risk of every particle on one batch (parallel map, one slot per particle).
std::vector<double> ensemble_risks(const Ensemble& ensemble, const BatchRef& batch, LossKind kind,
                                   const ExecPolicy& policy = {});

/// theta_n <- (1 - lambda dt) theta_n + lambda dt V + sigma sqrt(dt) (theta_n - V) * xi_n,
/// with xi_n drawn componentwise from particle n's stream. All particles move
/// against the same V.
void cbo_step(Ensemble& ensemble, const ParamVector& consensus, const CBOConfig& cfg,
              const ExecPolicy& policy = {});

struct HybridConfig {
  double gamma = 0.7;
  CBOConfig cbo;
  AdamConfig adam;
};

/// Convex combination of an Adam step and a CBO step per particle, both built
/// from the same batch: gradients and the consensus point come from `batch`.
/// Fills ensemble.risks with the batch risks and returns the consensus point used.
ParamVector hybrid_step(Ensemble& ensemble, std::vector<AdamState>& adam_states,
                        const HybridConfig& cfg, const BatchRef& batch, LossKind kind,
                        const ExecPolicy& policy = {});

/// Same as hybrid_step but with gradients and consensus point supplied.
void hybrid_update(Ensemble& ensemble, std::vector<AdamState>& adam_states,
                   std::span<const std::vector<double>> gradients, const ParamVector& consensus,
                   const HybridConfig& cfg, const ExecPolicy& policy = {});

// ---------------------------------------------------------------------------
// Multi-task CBO

/// particle -> task map. Block assignment gives particles [p*N/P, (p+1)*N/P) to task p.
struct TaskAssignment {
  std::vector<std::size_t> task_of_particle;
  std::size_t tasks = 0;

  static TaskAssignment blocks(std::size_t particles, std::size_t tasks);
  void validate(std::size_t particles) const;
};

/// task_risks[p][n] is the risk of particle n on task p. Builds V(T_p) from all
/// N particles, then moves only the particles assigned to p toward it.
/// Returns the P consensus points.
std::vector<ParamVector> multitask_update(Ensemble& ensemble,
                                          std::span<const std::vector<double>> task_risks,
                                          const CBOConfig& cfg, const TaskAssignment& assignment,
                                          const ExecPolicy& policy = {});

/// Per-task risks on a shared index batch (tasks share inputs, so predictions
/// are computed once per particle), then multitask_update.
std::vector<ParamVector> multitask_step(Ensemble& ensemble, const TaskSet& taskset,
                                        std::span<const std::size_t> batch, const CBOConfig& cfg,
                                        const TaskAssignment& assignment,
                                        const ExecPolicy& policy = {});

/// Risks of every particle on every task: result[p][n].
std::vector<std::vector<double>> task_risk_matrix(const Ensemble& ensemble, const TaskSet& taskset,
                                                  std::span<const std::size_t> batch,
                                                  const ExecPolicy& policy = {});

// ---------------------------------------------------------------------------
// Schedules

struct ScheduleConfig {
  bool alpha_enabled = true;
  double alpha_factor = 10.0;
  std::size_t alpha_every = 100;
  double alpha_cap = 1e7;
  bool sigma_enabled = false;
  double sigma_factor = 0.9;
  std::size_t sigma_every = 100;

  void validate(const CBOConfig& base) const;
};

/// Config in effect after `boundaries` completed schedule units (epochs or
/// iterations). Pure in (base, sched, boundaries), so re-applying is harmless.
CBOConfig apply_schedules(const CBOConfig& base, const ScheduleConfig& sched,
                          std::size_t boundaries);

}  // namespace cbonn
