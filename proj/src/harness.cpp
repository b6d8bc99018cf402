#include "cbonn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "cbonn/datasets.hpp"
#include "cbonn/mnist.hpp"
#include "cbonn/optimizers.hpp"
#include "cbonn/ot.hpp"

namespace cbonn {

const char* version() { return CBONN_VERSION; }

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

using Clock = std::chrono::steady_clock;

struct EpochEval {
  double risk = kNaN;
  double median_task = kNaN;
  double min_task = kNaN;
};

// Progress through the schedule: epochs or iterations completed.
std::size_t schedule_boundaries(const ExperimentConfig& cfg, std::size_t epochs_done,
                                std::size_t iterations_done) {
  return cfg.schedule_unit == ScheduleUnit::Epoch ? epochs_done : iterations_done;
}

void check_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NonFiniteError(what, 0);
}

double consensus_risk(const Ensemble& ens, const Dataset& data, LossKind kind, double alpha,
                      const ExecPolicy& policy) {
  const BatchRef full(data);
  const auto risks = ensemble_risks(ens, full, kind, policy);
  const ParamVector v = consensus_point(ens.particles, risks, alpha);
  return empirical_risk(v, full, kind);
}

EpochEval multitask_eval(const Ensemble& ens, const TaskSet& tasks, double alpha,
                         const ExecPolicy& policy) {
  const auto risks = task_risk_matrix(ens, tasks, {}, policy);
  std::vector<double> task_risk(tasks.size());
  for (std::size_t p = 0; p < tasks.size(); ++p) {
    const ParamVector v = consensus_point(ens.particles, risks[p], alpha);
    task_risk[p] = empirical_risk(v, BatchRef(tasks.tasks[p]), LossKind::SquaredError);
  }
  EpochEval e;
  e.min_task = *std::min_element(task_risk.begin(), task_risk.end());
  e.median_task = median(task_risk);
  e.risk = e.median_task;
  return e;
}

std::vector<double> measure_risks(const MeasureEnsemble& ens, const BatchRef& batch, LossKind kind,
                                  const ExecPolicy& policy) {
  std::vector<double> r(ens.size());
  parallel_for(ens.size(), policy, [&](std::size_t n) { r[n] = measure_risk(ens.measures[n], batch, kind); });
  return r;
}

BarycenterOptions bary_options(const ExperimentConfig& cfg, const ExecPolicy& policy,
                               const std::optional<PointCloud>& previous) {
  BarycenterOptions o;
  o.tol = cfg.ot_tol;
  o.max_iters = cfg.ot_max_iters;
  o.policy = policy;
  if (cfg.ot_warm_start && previous) o.init = previous;
  return o;
}

double barycenter_risk(MeasureEnsemble& ens, const Dataset& data, LossKind kind, double alpha,
                       const BarycenterOptions& opts, const ExecPolicy& policy) {
  const BatchRef full(data);
  ens.weights = gibbs_weights(measure_risks(ens, full, kind, policy), alpha);
  const Barycenter bary = barycenter(ens, opts);
  return measure_risk(barycenter_measure(bary, ens.measures[0].shape()), full, kind);
}

// Shared epoch loop: `step(batch, cfg_k)` applies one update, `eval(cfg_k)`
// evaluates on the full set after every epoch.
template <class Step, class Eval>
void epoch_loop(const ExperimentConfig& cfg, std::size_t samples, std::uint64_t seed,
                RunRecord& rec, const RunOptions& options, Step&& step, Eval&& eval) {
  auto record = [&](std::size_t epoch, const CBOConfig& k, Clock::time_point t0) {
    const EpochEval e = eval(k);
    EpochRow row{epoch, e.risk, e.median_task, e.min_task, k.alpha, k.sigma};
    rec.rows.push_back(row);
    rec.wall_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    check_finite(e.risk, "non-finite risk at epoch " + std::to_string(epoch));
    if (options.log && (epoch % 10 == 0 || epoch == cfg.epochs))
      options.log(rec.experiment + "/" + rec.method + " seed " + std::to_string(rec.seed) + " epoch " +
                  std::to_string(epoch) + " risk " + format_real(e.risk));
  };

  const auto start = Clock::now();
  record(0, apply_schedules(cfg.cbo, cfg.schedule, 0), start);

  MinibatchSampler sampler(samples, std::min(cfg.batch_size, samples), seed);
  std::size_t iterations = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t b = 0; b < sampler.batches_per_epoch(); ++b) {
      const CBOConfig k = apply_schedules(cfg.cbo, cfg.schedule,
                                          schedule_boundaries(cfg, epoch - 1, iterations));
      step(sampler.next_batch(), k);
      ++iterations;
    }
    record(epoch, apply_schedules(cfg.cbo, cfg.schedule, schedule_boundaries(cfg, epoch, iterations)),
           start);
  }
}

}  // namespace

Dataset load_experiment_mnist(const ExperimentConfig& cfg) {
  const std::filesystem::path dir(cfg.mnist_dir);
  return load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", cfg.samples);
}

RunRecord run_seed(const ExperimentConfig& base_cfg, std::uint64_t seed, const Dataset* mnist,
                   const RunOptions& options) {
  base_cfg.validate();
  ExperimentConfig cfg = base_cfg;
  cfg.seed = seed;
  cfg.seeds = 1;

  RunRecord rec;
  rec.experiment = cfg.experiment;
  rec.method = cfg.method;
  rec.width = cfg.width;
  rec.seed = seed;
  rec.config_text = resolved_text(cfg);
  rec.config_hash = config_hash(cfg);
  rec.code_version = version();
  if (cfg.cbo.consensus_margin() <= 0.0 && cfg.method != "adam")
    rec.notes.push_back("warning: 2 lambda <= sigma^2, consensus is not expected to form");

  const ExecPolicy policy{cfg.workers};
  const NetworkShape shape = cfg.shape();
  const LossKind kind = cfg.loss();

  try {
    if (cfg.experiment == "multitask") {
      const TaskSet tasks = gen_shifted_sines(cfg.tasks, cfg.samples, seed);
      Ensemble ens = Ensemble::uniform(shape, cfg.cbo.particles, cfg.init_low, cfg.init_high, seed);
      const auto assignment = TaskAssignment::blocks(cfg.cbo.particles, cfg.tasks);
      epoch_loop(
          cfg, cfg.samples, seed, rec, options,
          [&](std::span<const std::size_t> batch, const CBOConfig& k) {
            multitask_step(ens, tasks, batch, k, assignment, policy);
          },
          [&](const CBOConfig& k) { return multitask_eval(ens, tasks, k.alpha, policy); });
      return rec;
    }

    Dataset owned;
    const Dataset* data = nullptr;
    if (cfg.experiment == "mnist") {
      if (mnist == nullptr) {
        owned = load_experiment_mnist(cfg);
        mnist = &owned;
      }
      data = mnist;
    } else if (cfg.experiment == "sine") {
      owned = gen_sine(cfg.samples, cfg.noise_std, seed);
      data = &owned;
    } else {
      owned = gen_square(cfg.samples, cfg.noise_std, seed);
      data = &owned;
    }
    for (const auto& n : data->notes) rec.notes.push_back(n);
    const std::size_t samples = data->size();

    if (cfg.method == "adam") {
      ParamVector theta = fan_in_uniform_init(shape, seed);
      AdamState state(theta.size(), cfg.adam);
      rec.notes.push_back("adam init: fan-in uniform");
      epoch_loop(
          cfg, samples, seed, rec, options,
          [&](std::span<const std::size_t> batch, const CBOConfig& k) {
            const auto g = gradient(theta, BatchRef(*data, batch), kind);
            adam_step(state, theta, g, k.dt);
          },
          [&](const CBOConfig&) {
            return EpochEval{empirical_risk(theta, BatchRef(*data), kind), kNaN, kNaN};
          });
    } else if (cfg.method == "cbo") {
      Ensemble ens = Ensemble::uniform(shape, cfg.cbo.particles, cfg.init_low, cfg.init_high, seed);
      epoch_loop(
          cfg, samples, seed, rec, options,
          [&](std::span<const std::size_t> batch, const CBOConfig& k) {
            ens.risks = ensemble_risks(ens, BatchRef(*data, batch), kind, policy);
            const ParamVector v = consensus_point(ens.particles, ens.risks, k.alpha);
            cbo_step(ens, v, k, policy);
          },
          [&](const CBOConfig& k) {
            return EpochEval{consensus_risk(ens, *data, kind, k.alpha, policy), kNaN, kNaN};
          });
    } else if (cfg.method == "hybrid") {
      Ensemble ens = Ensemble::uniform(shape, cfg.cbo.particles, cfg.init_low, cfg.init_high, seed);
      std::vector<AdamState> states(ens.size(), AdamState(shape.param_count(), cfg.adam));
      epoch_loop(
          cfg, samples, seed, rec, options,
          [&](std::span<const std::size_t> batch, const CBOConfig& k) {
            HybridConfig h{cfg.gamma, k, cfg.adam};
            hybrid_step(ens, states, h, BatchRef(*data, batch), kind, policy);
          },
          [&](const CBOConfig& k) {
            return EpochEval{consensus_risk(ens, *data, kind, k.alpha, policy), kNaN, kNaN};
          });
    } else if (cfg.method == "ot_cbo") {
      MeasureEnsemble ens =
          MeasureEnsemble::uniform(shape, cfg.cbo.particles, cfg.init_low, cfg.init_high, seed);
      std::optional<PointCloud> previous;
      rec.notes.push_back(cfg.ot_warm_start ? "barycenter init: previous barycenter"
                                            : "barycenter init: support of the heaviest measure");
      epoch_loop(
          cfg, samples, seed, rec, options,
          [&](std::span<const std::size_t> batch, const CBOConfig& k) {
            ens.weights = gibbs_weights(measure_risks(ens, BatchRef(*data, batch), kind, policy), k.alpha);
            const Barycenter bary = barycenter(ens, bary_options(cfg, policy, previous));
            ot_cbo_step(ens, bary, k.lambda, k.sigma, k.dt, policy);
            previous = bary.support;
          },
          [&](const CBOConfig& k) {
            return EpochEval{barycenter_risk(ens, *data, kind, k.alpha,
                                             bary_options(cfg, policy, previous), policy),
                             kNaN, kNaN};
          });
    }
  } catch (const std::domain_error& e) {
    // Non-finite values end the run; the rows so far are kept.
    rec.completed = false;
    rec.diagnostic = e.what();
    if (options.log) options.log("run aborted: " + rec.diagnostic);
  }
  return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  Dataset mnist;
  const Dataset* preloaded = nullptr;
  if (cfg.experiment == "mnist") {
    mnist = load_experiment_mnist(cfg);
    preloaded = &mnist;
  }
  std::vector<RunRecord> out;
  for (std::uint64_t seed : cfg.seed_list()) {
    out.push_back(run_seed(cfg, seed, preloaded, options));
    if (options.write_files) write_run_files(out.back(), cfg.out_dir);
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AggregateRecord aggregate(std::span<const RunRecord> records) {
  std::vector<const RunRecord*> done;
  for (const auto& r : records)
    if (r.completed) done.push_back(&r);
  if (done.empty()) throw std::invalid_argument("no completed runs to aggregate");

  const RunRecord& first = *done.front();
  AggregateRecord agg;
  agg.experiment = first.experiment;
  agg.method = first.method;
  agg.seeds = done.size();
  for (const auto& row : first.rows) agg.epochs.push_back(row.epoch);
  for (const RunRecord* r : done) {
    if (r->experiment != first.experiment || r->method != first.method)
      throw std::invalid_argument("records from different experiments or methods");
    if (r->rows.size() != first.rows.size())
      throw std::invalid_argument("misaligned epoch grids: " + std::to_string(r->rows.size()) + " vs " +
                                  std::to_string(first.rows.size()) + " rows");
    for (std::size_t i = 0; i < r->rows.size(); ++i)
      if (r->rows[i].epoch != agg.epochs[i])
        throw std::invalid_argument("misaligned epoch grids at row " + std::to_string(i));
  }

  auto per_epoch = [&](auto pick, auto reduce) {
    std::vector<double> out(agg.epochs.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::vector<double> v;
      for (const RunRecord* r : done) v.push_back(pick(r->rows[i]));
      out[i] = reduce(v);
    }
    return out;
  };
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto med = [](const std::vector<double>& v) { return median(v); };

  agg.stats["median_risk"] = per_epoch([](const EpochRow& r) { return r.risk; }, med);
  agg.stats["mean_risk"] = per_epoch([](const EpochRow& r) { return r.risk; }, mean);
  if (first.multitask()) {
    agg.stats["median_task_risk"] = per_epoch([](const EpochRow& r) { return r.median_task_risk; }, med);
    agg.stats["min_task_risk"] = per_epoch([](const EpochRow& r) { return r.min_task_risk; }, med);
  }
  return agg;
}

}  // namespace cbonn
