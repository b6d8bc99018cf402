#include "cbonn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cbonn/network.hpp"
#include "cbonn/optimizers.hpp"
#include "cbonn/ot.hpp"
#include "cbonn/rng.hpp"

namespace cbonn {

namespace {

std::size_t pick(RngStream& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng.engine());
}

void note(SuiteResult& r, double err, double tol) {
  ++r.checks;
  r.worst = std::max(r.worst, err);
  if (!(err <= tol)) {
    ++r.failures;
    r.passed = false;
  }
}

// Pre-activations closer than this to the ReLU kink make central differences
// meaningless, so such instances are redrawn.
constexpr double kKinkMargin = 1e-3;

bool near_kink(const ParamVector& theta, const Dataset& data) {
  const auto& sh = theta.shape();
  for (std::size_t s = 0; s < data.size(); ++s)
    for (std::size_t m = 0; m < sh.width; ++m) {
      const auto a = theta.neuron(m);
      double z = a[sh.input_dim];
      for (std::size_t k = 0; k < sh.input_dim; ++k) z += a[k] * data.input(s)[k];
      if (std::abs(z) < kKinkMargin) return true;
    }
  return false;
}

SuiteResult gradient_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "gradient";
  r.tolerance = 1e-5;
  const double h = 1e-5;
  for (std::size_t inst = 0; inst < 100; ++inst) {
    RngStream rng(seed, StreamDomain::Fixture, inst);
    const LossKind kind = inst % 2 == 0 ? LossKind::SquaredError : LossKind::CrossEntropy;
    NetworkShape sh{pick(rng, 1, 5), pick(rng, 1, 20), kind == LossKind::SquaredError ? 1 : pick(rng, 2, 5)};
    Dataset data;
    data.input_dim = sh.input_dim;
    data.output_dim = sh.output_dim;
    data.target_kind = kind == LossKind::SquaredError ? TargetKind::Real : TargetKind::ClassIndex;
    const std::size_t samples = pick(rng, 1, 8);
    for (std::size_t s = 0; s < samples * sh.input_dim; ++s) data.inputs.push_back(rng.uniform(-1, 1));
    for (std::size_t s = 0; s < samples; ++s) {
      if (kind == LossKind::SquaredError) data.targets.push_back(rng.normal());
      else data.labels.push_back(static_cast<std::uint32_t>(pick(rng, 0, sh.output_dim - 1)));
    }
    ParamVector theta(sh);
    do {
      for (double& v : theta.values()) v = rng.uniform(-1, 1);
    } while (near_kink(theta, data));

    const BatchRef batch(data);
    const auto g = gradient(theta, batch, kind);
    for (std::size_t i = 0; i < theta.size(); ++i) {
      ParamVector plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (empirical_risk(plus, batch, kind) - empirical_risk(minus, batch, kind)) / (2 * h);
      const double scale = std::max({std::abs(g[i]), std::abs(fd), 1e-4});
      note(r, std::abs(g[i] - fd) / scale, r.tolerance);
    }
  }
  return r;
}

PointCloud random_cloud(RngStream& rng, std::size_t count, std::size_t dim) {
  PointCloud c{dim, std::vector<double>(count * dim)};
  for (double& v : c.coords) v = rng.uniform(-1, 1);
  return c;
}

double brute_force_w2sq(const PointCloud& a, const PointCloud& b) {
  std::vector<std::size_t> perm(a.count());
  std::iota(perm.begin(), perm.end(), 0);
  double best = INFINITY;
  do {
    best = std::min(best, coupling_cost(a.view(), b.view(), perm));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

SuiteResult w2_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "w2";
  r.tolerance = 1e-12;
  for (std::size_t inst = 0; inst < 200; ++inst) {
    RngStream rng(seed, StreamDomain::Fixture, 1000 + inst);
    const std::size_t m = pick(rng, 1, 7);
    const std::size_t dim = pick(rng, 1, 4);
    const auto a = random_cloud(rng, m, dim);
    const auto b = random_cloud(rng, m, dim);
    const auto res = w2_empirical(a.view(), b.view());
    note(r, std::abs(res.assignment.cost - brute_force_w2sq(a, b)), r.tolerance);
  }
  return r;
}

std::vector<double> random_weights(RngStream& rng, std::size_t n) {
  std::vector<double> w(n);
  double total = 0.0;
  for (double& v : w) total += (v = rng.uniform(0.05, 1.0));
  for (double& v : w) v /= total;
  return w;
}

// min over every combination of couplings of F(mean(couplings), couplings).
double exhaustive_objective(std::span<const CloudView> inputs, std::span<const double> weights) {
  const std::size_t n = inputs.size();
  const std::size_t m = inputs[0].count();
  const std::size_t dim = inputs[0].dim;
  std::vector<std::vector<std::size_t>> perms;
  std::vector<std::size_t> p(m);
  std::iota(p.begin(), p.end(), 0);
  do perms.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));

  std::vector<std::size_t> choice(n, 0);
  double best = INFINITY;
  for (;;) {
    std::vector<double> y(m * dim, 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < m; ++j)
        for (std::size_t c = 0; c < dim; ++c) y[j * dim + c] += weights[k] * inputs[k].point(perms[choice[k]][j])[c];
    double f = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      f += weights[k] * coupling_cost({y, dim}, inputs[k], perms[choice[k]]);
    best = std::min(best, 0.5 * f);
    std::size_t k = 0;
    while (k < n && ++choice[k] == perms.size()) choice[k++] = 0;
    if (k == n) break;
  }
  return best;
}

SuiteResult barycenter_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "barycenter";
  r.tolerance = 1e-9;
  std::ostringstream detail;
  std::size_t not_converged = 0;
  for (std::size_t inst = 0; inst < 120; ++inst) {
    RngStream rng(seed, StreamDomain::Fixture, 2000 + inst);
    const bool tiny = inst >= 100;
    const std::size_t n = tiny ? 3 : pick(rng, 1, 5);
    const std::size_t m = tiny ? 3 : pick(rng, 1, 5);
    const std::size_t dim = tiny ? 2 : pick(rng, 1, 4);
    std::vector<PointCloud> clouds;
    for (std::size_t k = 0; k < n; ++k) clouds.push_back(random_cloud(rng, m, dim));
    std::vector<CloudView> views;
    for (const auto& c : clouds) views.push_back(c.view());
    const auto w = random_weights(rng, n);
    const Barycenter b = barycenter(views, w);

    double rise = 0.0;
    for (std::size_t t = 1; t < b.objective_history.size(); ++t)
      rise = std::max(rise, b.objective_history[t] - b.objective_history[t - 1]);
    note(r, rise <= 1e-12 ? 0.0 : rise, r.tolerance);
    if (!b.converged) ++not_converged;
    note(r, b.converged ? first_order_residual(b, views, w) : INFINITY, r.tolerance);
    if (tiny) note(r, std::abs(b.objective - exhaustive_objective(views, w)), r.tolerance);
  }
  detail << not_converged << " instances hit max_iters";
  r.detail = detail.str();
  return r;
}

SuiteResult frechet_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "frechet";
  r.tolerance = 1e-12;
  for (std::size_t inst = 0; inst < 100; ++inst) {
    RngStream rng(seed, StreamDomain::Fixture, 3000 + inst);
    const std::size_t n = pick(rng, 1, 10);
    const NetworkShape sh{pick(rng, 1, 4), 1, 1};
    std::vector<ParamVector> particles;
    std::vector<double> risks(n);
    for (std::size_t k = 0; k < n; ++k) {
      ParamVector p(sh);
      for (double& v : p.values()) v = rng.uniform(-1, 1);
      particles.push_back(std::move(p));
      risks[k] = rng.uniform(0, 1);
    }
    const double alpha = rng.uniform(0, 10);
    const ParamVector v = consensus_point(particles, risks, alpha);
    std::vector<CloudView> views;
    for (const auto& p : particles) views.push_back({p.values(), sh.atom_dim()});
    const Barycenter b = barycenter(views, gibbs_weights(risks, alpha));
    double err = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) err = std::max(err, std::abs(v[i] - b.support.coords[i]));
    note(r, err, r.tolerance);
  }
  return r;
}

SuiteResult contraction_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "contraction";
  r.tolerance = 1e-10;
  const NetworkShape sh{2, 4, 1};
  double worst_after_one = 0.0;
  for (double dt : {0.25, 0.5, 1.0}) {
    for (std::uint64_t run = 0; run < 50; ++run) {
      MeasureEnsemble ens = MeasureEnsemble::uniform(sh, 8, -2.0, 2.0, seed * 1000 + run);
      BarycenterOptions opts;
      Barycenter bary = barycenter(ens, opts);
      double v = ensemble_variance(ens, bary);
      for (int step = 0; step < 20; ++step) {
        ot_cbo_step(ens, bary, 1.0, 0.0, dt);
        opts.init = bary.support;  // warm start keeps the pushed-forward barycenter reachable
        bary = barycenter(ens, opts);
        const double next = ensemble_variance(ens, bary);
        const double bound = (1 - dt) * (1 - dt) * v;
        note(r, std::max(0.0, next - bound), r.tolerance);
        if (dt == 1.0 && step == 0) worst_after_one = std::max(worst_after_one, next);
        v = next;
      }
    }
  }
  note(r, worst_after_one <= 1e-20 ? 0.0 : worst_after_one, r.tolerance);
  char buf[80];
  std::snprintf(buf, sizeof buf, "largest variance after one step at dt = 1: %.3g", worst_after_one);
  r.detail = buf;
  return r;
}

SuiteResult consensus_suite(std::uint64_t seed) {
  SuiteResult r;
  r.name = "consensus";
  r.tolerance = 1e-9;
  for (std::size_t inst = 0; inst < 100; ++inst) {
    RngStream rng(seed, StreamDomain::Fixture, 4000 + inst);
    const std::size_t n = pick(rng, 2, 20);
    const NetworkShape sh{pick(rng, 1, 3), pick(rng, 1, 5), 1};
    std::vector<ParamVector> particles;
    std::vector<double> risks(n);
    for (std::size_t k = 0; k < n; ++k) {
      ParamVector p(sh);
      for (double& v : p.values()) v = rng.uniform(-1, 1);
      particles.push_back(std::move(p));
      risks[k] = rng.uniform(0, 1);
    }
    const std::size_t best = std::min_element(risks.begin(), risks.end()) - risks.begin();
    const ParamVector sharp = consensus_point(particles, risks, 1e12);
    double norm = 0.0, diff = 0.0;
    for (std::size_t i = 0; i < sharp.size(); ++i) {
      diff = std::max(diff, std::abs(sharp[i] - particles[best][i]));
      norm = std::max(norm, std::abs(particles[best][i]));
    }
    note(r, diff / std::max(norm, 1e-300), 1e-9);

    const ParamVector flat = consensus_point(particles, risks, 0.0);
    double err = 0.0;
    for (std::size_t i = 0; i < flat.size(); ++i) {
      double mean = 0.0;
      for (const auto& p : particles) mean += p[i];
      err = std::max(err, std::abs(flat[i] - mean / static_cast<double>(n)));
    }
    note(r, err, 1e-12);

    const double alpha = rng.uniform(0, 50);
    const double shift = rng.uniform(-10, 10);
    std::vector<double> shifted = risks;
    for (double& v : shifted) v += shift;
    const ParamVector a = consensus_point(particles, risks, alpha);
    const ParamVector b = consensus_point(particles, shifted, alpha);
    err = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
    note(r, err, 1e-12);
  }
  return r;
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"gradient", "w2", "barycenter", "frechet", "contraction", "consensus"};
  return names;
}

SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "gradient") return gradient_suite(seed);
  if (name == "w2") return w2_suite(seed);
  if (name == "barycenter") return barycenter_suite(seed);
  if (name == "frechet") return frechet_suite(seed);
  if (name == "contraction") return contraction_suite(seed);
  if (name == "consensus") return consensus_suite(seed);
  throw std::invalid_argument("unknown verify suite '" + name + "'");
}

}  // namespace cbonn
