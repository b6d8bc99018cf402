#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "cbonn/optimizers.hpp"

namespace cbonn {

void CBOConfig::validate() const {
  if (particles < 2) throw std::invalid_argument("CBO needs at least two particles");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
}

Ensemble Ensemble::uniform(const NetworkShape& shape, std::size_t n, double lo, double hi,
                           std::uint64_t seed) {
  Ensemble e;
  e.particles.reserve(n);
  e.noise.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream init(seed, StreamDomain::Init, i);
    ParamVector p(shape);
    for (double& v : p.values()) v = init.uniform(lo, hi);
    e.particles.push_back(std::move(p));
    e.noise.emplace_back(seed, StreamDomain::Noise, i);
  }
  e.risks.assign(n, 0.0);
  return e;
}

std::vector<double> gibbs_weights(std::span<const double> risks, double alpha) {
  if (risks.empty()) throw std::invalid_argument("gibbs weights of an empty ensemble");
  double lowest = risks[0];
  for (std::size_t n = 0; n < risks.size(); ++n) {
    if (!std::isfinite(risks[n])) throw NonFiniteError("non-finite risk", n);
    lowest = std::min(lowest, risks[n]);
  }
  std::vector<double> w(risks.size());
  double total = 0.0;
  for (std::size_t n = 0; n < risks.size(); ++n) {
    w[n] = std::exp(-alpha * (risks[n] - lowest));
    total += w[n];
  }
  // total >= 1: the best particle contributes exp(0).
  for (double& v : w) v /= total;
  return w;
}

ParamVector weighted_mean(std::span<const ParamVector> particles, std::span<const double> weights) {
  if (particles.empty()) throw std::invalid_argument("weighted mean of an empty ensemble");
  if (weights.size() != particles.size())
    throw DimensionError("weights", particles.size(), weights.size());
  ParamVector out(particles[0].shape());
  auto v = out.values();
  for (std::size_t n = 0; n < particles.size(); ++n) {
    if (particles[n].size() != v.size())
      throw DimensionError("particle " + std::to_string(n), v.size(), particles[n].size());
    const double w = weights[n];
    if (w == 0.0) continue;
    const auto p = particles[n].values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += w * p[i];
  }
  return out;
}

ParamVector consensus_point(std::span<const ParamVector> particles, std::span<const double> risks,
                            double alpha) {
  if (risks.size() != particles.size())
    throw DimensionError("risks", particles.size(), risks.size());
  return weighted_mean(particles, gibbs_weights(risks, alpha));
}

std::vector<double> ensemble_risks(const Ensemble& ensemble, const BatchRef& batch, LossKind kind,
                                   const ExecPolicy& policy) {
  std::vector<double> risks(ensemble.size());
  parallel_for(ensemble.size(), policy, [&](std::size_t n) {
    risks[n] = empirical_risk(ensemble.particles[n], batch, kind);
  });
  return risks;
}

namespace {

// V + (theta - V) * ((1 - lambda dt) + sigma sqrt(dt) xi): keeps a particle
// sitting on V fixed and lands exactly on V when lambda dt = 1, sigma = 0.
void move_toward(std::span<double> theta, std::span<const double> target, double keep,
                 double noise_scale, RngStream& stream) {
  if (theta.size() != target.size()) throw DimensionError("consensus point", theta.size(), target.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double xi = stream.normal();
    const double diff = theta[i] - target[i];
    theta[i] = target[i] + diff * (keep + noise_scale * xi);
  }
}

}  // namespace

void cbo_step(Ensemble& ensemble, const ParamVector& consensus, const CBOConfig& cfg,
              const ExecPolicy& policy) {
  if (ensemble.noise.size() != ensemble.size())
    throw DimensionError("noise streams", ensemble.size(), ensemble.noise.size());
  const double keep = 1.0 - cfg.lambda * cfg.dt;
  const double noise_scale = cfg.sigma * std::sqrt(cfg.dt);
  parallel_for(ensemble.size(), policy, [&](std::size_t n) {
    move_toward(ensemble.particles[n].values(), consensus.values(), keep, noise_scale,
                ensemble.noise[n]);
  });
}

void hybrid_update(Ensemble& ensemble, std::vector<AdamState>& adam_states,
                   std::span<const std::vector<double>> gradients, const ParamVector& consensus,
                   const HybridConfig& cfg, const ExecPolicy& policy) {
  if (cfg.gamma < 0.0 || cfg.gamma > 1.0) throw std::invalid_argument("gamma must lie in [0,1]");
  const std::size_t n_particles = ensemble.size();
  if (adam_states.size() != n_particles)
    throw DimensionError("adam states", n_particles, adam_states.size());
  if (gradients.size() != n_particles) throw DimensionError("gradients", n_particles, gradients.size());
  const double keep = 1.0 - cfg.cbo.lambda * cfg.cbo.dt;
  const double noise_scale = cfg.cbo.sigma * std::sqrt(cfg.cbo.dt);
  const double gamma = cfg.gamma;
  const double dt = cfg.cbo.dt;

  // Validate every gradient before mutating anything.
  for (std::size_t n = 0; n < n_particles; ++n)
    for (std::size_t i = 0; i < gradients[n].size(); ++i)
      if (!std::isfinite(gradients[n][i]))
        throw NonFiniteError("non-finite gradient of particle " + std::to_string(n), i);

  parallel_for(n_particles, policy, [&](std::size_t n) {
    auto theta = ensemble.particles[n].values();
    const auto dir = adam_direction(adam_states[n], gradients[n]);
    std::vector<double> cbo_part(theta.begin(), theta.end());
    move_toward(cbo_part, consensus.values(), keep, noise_scale, ensemble.noise[n]);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double adam_part = theta[i] - dt * dir[i];
      theta[i] = (1.0 - gamma) * cbo_part[i] + gamma * adam_part;
    }
  });
}

ParamVector hybrid_step(Ensemble& ensemble, std::vector<AdamState>& adam_states,
                        const HybridConfig& cfg, const BatchRef& batch, LossKind kind,
                        const ExecPolicy& policy) {
  const std::size_t n_particles = ensemble.size();
  std::vector<std::vector<double>> grads(n_particles);
  ensemble.risks.assign(n_particles, 0.0);
  parallel_for(n_particles, policy, [&](std::size_t n) {
    auto rg = value_and_gradient(ensemble.particles[n], batch, kind);
    ensemble.risks[n] = rg.risk;
    grads[n] = std::move(rg.gradient);
  });
  ParamVector v = consensus_point(ensemble.particles, ensemble.risks, cfg.cbo.alpha);
  hybrid_update(ensemble, adam_states, grads, v, cfg, policy);
  return v;
}

TaskAssignment TaskAssignment::blocks(std::size_t particles, std::size_t tasks) {
  if (tasks == 0 || particles < tasks)
    throw std::invalid_argument("block assignment needs 1 <= tasks <= particles");
  TaskAssignment a;
  a.tasks = tasks;
  a.task_of_particle.resize(particles);
  for (std::size_t n = 0; n < particles; ++n) a.task_of_particle[n] = n * tasks / particles;
  return a;
}

void TaskAssignment::validate(std::size_t particles) const {
  if (task_of_particle.size() != particles)
    throw DimensionError("task assignment", particles, task_of_particle.size());
  std::vector<std::size_t> count(tasks, 0);
  for (std::size_t t : task_of_particle) {
    if (t >= tasks) throw std::out_of_range("particle assigned to unknown task " + std::to_string(t));
    ++count[t];
  }
  for (std::size_t p = 0; p < tasks; ++p)
    if (count[p] == 0) throw std::invalid_argument("task " + std::to_string(p) + " has no particles");
}

std::vector<ParamVector> multitask_update(Ensemble& ensemble,
                                          std::span<const std::vector<double>> task_risks,
                                          const CBOConfig& cfg, const TaskAssignment& assignment,
                                          const ExecPolicy& policy) {
  assignment.validate(ensemble.size());
  if (task_risks.size() != assignment.tasks)
    throw DimensionError("task risks", assignment.tasks, task_risks.size());
  std::vector<ParamVector> targets;
  targets.reserve(assignment.tasks);
  for (std::size_t p = 0; p < assignment.tasks; ++p)
    targets.push_back(consensus_point(ensemble.particles, task_risks[p], cfg.alpha));

  const double keep = 1.0 - cfg.lambda * cfg.dt;
  const double noise_scale = cfg.sigma * std::sqrt(cfg.dt);
  parallel_for(ensemble.size(), policy, [&](std::size_t n) {
    const auto& v = targets[assignment.task_of_particle[n]];
    move_toward(ensemble.particles[n].values(), v.values(), keep, noise_scale, ensemble.noise[n]);
  });
  return targets;
}

std::vector<std::vector<double>> task_risk_matrix(const Ensemble& ensemble, const TaskSet& taskset,
                                                  std::span<const std::size_t> batch,
                                                  const ExecPolicy& policy) {
  if (taskset.size() == 0) throw std::invalid_argument("empty task set");
  const Dataset& shared = taskset.tasks[0];
  for (const auto& t : taskset.tasks)
    if (t.size() != shared.size() || t.input_dim != shared.input_dim)
      throw std::invalid_argument("tasks must share one input sample");
  const std::size_t n_particles = ensemble.size();
  std::vector<std::vector<double>> risks(taskset.size(), std::vector<double>(n_particles));
  parallel_for(n_particles, policy, [&](std::size_t n) {
    const auto& theta = ensemble.particles[n];
    const BatchRef shared_batch = batch.empty() ? BatchRef(shared) : BatchRef(shared, batch);
    check_compatible(theta.shape(), shared, LossKind::SquaredError);
    std::vector<double> preds(shared_batch.size() * theta.shape().output_dim);
    predict_batch(theta.shape(), theta.values(), shared_batch, preds);
    for (std::size_t p = 0; p < taskset.size(); ++p) {
      const BatchRef tb = batch.empty() ? BatchRef(taskset.tasks[p]) : BatchRef(taskset.tasks[p], batch);
      risks[p][n] = risk_from_predictions(LossKind::SquaredError, tb, preds);
    }
  });
  return risks;
}

std::vector<ParamVector> multitask_step(Ensemble& ensemble, const TaskSet& taskset,
                                        std::span<const std::size_t> batch, const CBOConfig& cfg,
                                        const TaskAssignment& assignment,
                                        const ExecPolicy& policy) {
  if (assignment.tasks != taskset.size())
    throw DimensionError("task count", taskset.size(), assignment.tasks);
  const auto risks = task_risk_matrix(ensemble, taskset, batch, policy);
  return multitask_update(ensemble, risks, cfg, assignment, policy);
}

void ScheduleConfig::validate(const CBOConfig& base) const {
  if (!(alpha_factor > 0.0) || !(sigma_factor > 0.0))
    throw std::invalid_argument("schedule factors must be positive");
  if (alpha_every == 0 || sigma_every == 0)
    throw std::invalid_argument("schedule periods must be positive");
  if (alpha_enabled && alpha_cap < base.alpha)
    throw std::invalid_argument("alpha cap must not be below the initial alpha");
}

CBOConfig apply_schedules(const CBOConfig& base, const ScheduleConfig& sched,
                          std::size_t boundaries) {
  CBOConfig cfg = base;
  if (sched.alpha_enabled) {
    const std::size_t events = boundaries / sched.alpha_every;
    for (std::size_t i = 0; i < events && cfg.alpha < sched.alpha_cap; ++i)
      cfg.alpha = std::min(cfg.alpha * sched.alpha_factor, sched.alpha_cap);
  }
  if (sched.sigma_enabled) {
    const std::size_t events = boundaries / sched.sigma_every;
    for (std::size_t i = 0; i < events; ++i) cfg.sigma *= sched.sigma_factor;
  }
  return cfg;
}

}  // namespace cbonn
