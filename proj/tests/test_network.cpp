#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cbonn/network.hpp"
#include "support.hpp"

using namespace cbonn;
using testing::fixture;
using testing::pick;

TEST_CASE("forward of the zero network is zero") {
  const NetworkShape sh{3, 4, 2};
  const ParamVector p(sh);
  const auto y = forward(p, std::vector<double>{0.3, -2.0, 5.0});
  REQUIRE(y.size() == 2);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
}

TEST_CASE("single neuron closed form") {
  const NetworkShape sh{1, 1, 1};
  const ParamVector p(sh, {1.0, 0.0, 2.0});
  CHECK(forward(p, std::vector<double>{0.5})[0] == 1.0);
  CHECK(forward_measure(EmpiricalMeasure::from_params(p), std::vector<double>{0.5})[0] == 1.0);
}

TEST_CASE("forward matches the per-neuron loop") {
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto rng = fixture(i);
    const NetworkShape sh{2, 3, 1};
    const auto p = testing::random_params(rng, sh);
    const std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    CHECK(forward(p, x)[0] == doctest::Approx(testing::naive_forward(p, x)[0]).epsilon(1e-12));
  }
}

TEST_CASE("forward_measure on ten atoms matches a direct average") {
  auto rng = fixture(40);
  const NetworkShape sh{3, 10, 2};
  const auto p = testing::random_params(rng, sh);
  const EmpiricalMeasure mu = EmpiricalMeasure::from_params(p);
  const std::vector<double> x{0.2, -0.7, 0.9};
  const auto got = forward_measure(mu, x);
  for (std::size_t c = 0; c < 2; ++c) {
    double sum = 0.0;
    for (std::size_t m = 0; m < 10; ++m) {
      double z = mu.b(m);
      for (std::size_t k = 0; k < 3; ++k) z += mu.w(m)[k] * x[k];
      sum += mu.c(m)[c] * std::max(z, 0.0);
    }
    CHECK(std::abs(got[c] - sum / 10.0) <= 1e-12);
  }
}

TEST_CASE("dimension mismatch names the dimension") {
  const ParamVector p(NetworkShape{2, 3, 1});
  try {
    forward(p, std::vector<double>{1.0});
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(e.dimension() == "input_dim");
    CHECK(e.expected() == 2);
    CHECK(e.actual() == 1);
  }
  CHECK_THROWS_AS(ParamVector(NetworkShape{2, 3, 1}, std::vector<double>(5)), DimensionError);
  CHECK_THROWS_AS(NetworkShape({0, 1, 1}).validate(), DimensionError);
}

TEST_CASE("parameter vectors reject non-finite entries") {
  std::vector<double> v(4, 0.0);
  v[2] = NAN;
  CHECK_THROWS_AS(ParamVector(NetworkShape{1, 1, 2}, v), NonFiniteError);
}

TEST_CASE("measure and parameter vector convert both ways") {
  auto rng = fixture(41);
  const NetworkShape sh{4, 6, 3};
  const auto p = testing::random_params(rng, sh);
  const auto mu = EmpiricalMeasure::from_params(p);
  CHECK(mu.atom_count() == 6);
  CHECK(mu.atom_dim() == 8);
  CHECK(mu.to_params() == p);
  CHECK(mu.b(2) == p[2 * 8 + 4]);
}

TEST_CASE("losses") {
  CHECK(squared_error_loss(1.0, 1.0) == 0.0);
  CHECK(squared_error_loss(1.0, -1.0) == 4.0);
  const std::vector<double> zeros{0.0, 0.0};
  CHECK(cross_entropy_loss(0, zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS_AS(cross_entropy_loss(2, zeros), std::out_of_range);
  CHECK_THROWS_AS(cross_entropy_loss(0, std::vector<double>{0.0, INFINITY}), NonFiniteError);
  CHECK_THROWS_AS(squared_error_loss(0.0, NAN), NonFiniteError);
}

TEST_CASE("cross entropy matches softmax then -log") {
  for (std::uint64_t i = 0; i < 20; ++i) {
    auto rng = fixture(100 + i);
    std::vector<double> logits(10);
    for (double& v : logits) v = rng.uniform(-5, 5);
    const std::size_t label = pick(rng, 0, 9);
    double z = 0.0;
    for (double v : logits) z += std::exp(v);
    const double oracle = -std::log(std::exp(logits[label]) / z);
    CHECK(std::abs(cross_entropy_loss(label, logits) - oracle) <= 1e-12);
  }
}

TEST_CASE("cross entropy is stable for large logits") {
  auto rng = fixture(150);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> logits(6);
    for (double& v : logits) v = rng.uniform(9990, 1e4);
    logits[static_cast<std::size_t>(rep) % 6] = 1e4;
    const std::size_t label = pick(rng, 0, 5);
    double z = 0.0;
    for (double v : logits) z += std::exp(v - 1e4);
    const double shifted = -(logits[label] - 1e4 - std::log(z));
    const double got = cross_entropy_loss(label, logits);
    CHECK(std::isfinite(got));
    CHECK(std::abs(got - shifted) <= 1e-9);
  }
}

TEST_CASE("empirical risk") {
  auto rng = fixture(200);
  const NetworkShape sh{1, 5, 1};
  const auto p = testing::random_params(rng, sh);

  SUBCASE("a batch of one sample is that sample's loss") {
    const auto data = testing::regression_data(rng, 1, 1);
    const double pred = forward(p, data.input(0))[0];
    CHECK(empirical_risk(p, BatchRef(data), LossKind::SquaredError) ==
          squared_error_loss(data.targets[0], pred));
  }
  SUBCASE("zero network against sine targets gives the mean of y^2") {
    Dataset data;
    data.input_dim = 1;
    data.output_dim = 1;
    double oracle = 0.0;
    for (int s = 0; s < 50; ++s) {
      const double x = rng.uniform(0, 1);
      data.inputs.push_back(x);
      data.targets.push_back(std::sin(2 * M_PI * x));
      oracle += data.targets.back() * data.targets.back();
    }
    CHECK(empirical_risk(ParamVector(sh), BatchRef(data), LossKind::SquaredError) ==
          doctest::Approx(oracle / 50).epsilon(1e-14));
  }
  SUBCASE("duplicating every sample leaves the risk unchanged") {
    const auto data = testing::regression_data(rng, 1, 7);
    std::vector<std::size_t> twice;
    for (std::size_t s = 0; s < 7; ++s) twice.insert(twice.end(), {s, s});
    CHECK(empirical_risk(p, BatchRef(data, twice), LossKind::SquaredError) ==
          doctest::Approx(empirical_risk(p, BatchRef(data), LossKind::SquaredError)).epsilon(1e-14));
  }
  SUBCASE("empty batch is an error") {
    const auto data = testing::regression_data(rng, 1, 3);
    CHECK_THROWS_AS(empirical_risk(p, BatchRef(data, std::span<const std::size_t>{}), LossKind::SquaredError),
                    std::invalid_argument);
  }
  SUBCASE("loss kind must fit the data") {
    const auto data = testing::regression_data(rng, 1, 3);
    CHECK_THROWS(empirical_risk(p, BatchRef(data), LossKind::CrossEntropy));
  }
}

TEST_CASE("gradient at the zero network is zero") {
  auto rng = fixture(300);
  const auto data = testing::regression_data(rng, 3, 10);
  const auto g = gradient(ParamVector(NetworkShape{3, 4, 1}), BatchRef(data), LossKind::SquaredError);
  CHECK(std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; }));
}

// Central differences are only meaningful away from the ReLU kink.
static bool away_from_kinks(const ParamVector& p, const Dataset& data) {
  const auto& sh = p.shape();
  for (std::size_t s = 0; s < data.size(); ++s)
    for (std::size_t m = 0; m < sh.width; ++m) {
      const auto a = p.neuron(m);
      double z = a[sh.input_dim];
      for (std::size_t k = 0; k < sh.input_dim; ++k) z += a[k] * data.input(s)[k];
      if (std::abs(z) < 1e-3) return false;
    }
  return true;
}

TEST_CASE("gradient matches central differences for both losses") {
  const double h = 1e-5;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    auto rng = fixture(400 + i);
    const bool ce = i % 2 == 1;
    const NetworkShape sh{pick(rng, 1, 5), pick(rng, 1, 12), ce ? pick(rng, 2, 4) : 1};
    const auto data = ce ? testing::class_data(rng, sh.input_dim, sh.output_dim, pick(rng, 1, 9))
                         : testing::regression_data(rng, sh.input_dim, pick(rng, 1, 9));
    const LossKind kind = ce ? LossKind::CrossEntropy : LossKind::SquaredError;
    ParamVector p = testing::random_params(rng, sh);
    while (!away_from_kinks(p, data)) p = testing::random_params(rng, sh);
    const auto rg = value_and_gradient(p, BatchRef(data), kind);
    CHECK(rg.risk == empirical_risk(p, BatchRef(data), kind));
    for (std::size_t k = 0; k < p.size(); ++k) {
      ParamVector up = p, down = p;
      up[k] += h;
      down[k] -= h;
      const double fd =
          (empirical_risk(up, BatchRef(data), kind) - empirical_risk(down, BatchRef(data), kind)) / (2 * h);
      worst = std::max(worst, std::abs(rg.gradient[k] - fd) / std::max({std::abs(fd), std::abs(rg.gradient[k]), 1e-4}));
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("gradient is unchanged when the batch is duplicated") {
  auto rng = fixture(500);
  const NetworkShape sh{2, 5, 1};
  const auto p = testing::random_params(rng, sh);
  const auto data = testing::regression_data(rng, 2, 6);
  std::vector<std::size_t> twice;
  for (std::size_t s = 0; s < 6; ++s) twice.insert(twice.end(), {s, s});
  const auto g1 = gradient(p, BatchRef(data), LossKind::SquaredError);
  const auto g2 = gradient(p, BatchRef(data, twice), LossKind::SquaredError);
  for (std::size_t k = 0; k < g1.size(); ++k) CHECK(g2[k] == doctest::Approx(g1[k]).epsilon(1e-13));
}

TEST_CASE("barron estimate") {
  CHECK(barron_estimate(EmpiricalMeasure(NetworkShape{2, 1, 1}, {1.0, -1.0, 0.5, 2.0})) == 5.0);
  CHECK(barron_estimate(EmpiricalMeasure(NetworkShape{2, 2, 1}, {1.0, -1.0, 0.5, 0.0, 3.0, 1.0, 2.0, 0.0})) == 0.0);
  auto rng = fixture(600);
  const NetworkShape sh{3, 5, 2};
  const auto mu = EmpiricalMeasure::from_params(testing::random_params(rng, sh));
  double oracle = 0.0;
  for (std::size_t m = 0; m < 5; ++m) {
    double l1 = std::abs(mu.b(m));
    for (double w : mu.w(m)) l1 += std::abs(w);
    double cmax = 0.0;
    for (double c : mu.c(m)) cmax = std::max(cmax, std::abs(c));
    oracle = std::max(oracle, cmax * l1);
  }
  CHECK(barron_estimate(mu) == oracle);
}

// ---- properties over random instances -------------------------------------

TEST_CASE("property: parameter and measure views predict identically") {
  for (std::uint64_t i = 0; i < 30; ++i) {
    auto rng = fixture(700 + i);
    const NetworkShape sh{pick(rng, 1, 4), pick(rng, 1, 10), pick(rng, 1, 3)};
    const auto p = testing::random_params(rng, sh);
    const auto mu = EmpiricalMeasure::from_params(p);
    for (int g = 0; g < 5; ++g) {
      std::vector<double> x(sh.input_dim);
      for (double& v : x) v = rng.uniform(-3, 3);
      CHECK(forward(p, x) == forward_measure(mu, x));
    }
  }
}

TEST_CASE("property: positive homogeneity of the hidden layer") {
  for (std::uint64_t i = 0; i < 30; ++i) {
    auto rng = fixture(800 + i);
    const NetworkShape sh{pick(rng, 1, 4), pick(rng, 1, 8), 1};
    auto p = testing::random_params(rng, sh);
    // Powers of two keep the scaling exact in floating point.
    const double s = std::ldexp(1.0, static_cast<int>(pick(rng, 0, 6)) - 3);
    ParamVector q = p;
    for (std::size_t m = 0; m < sh.width; ++m)
      for (std::size_t k = 0; k <= sh.input_dim; ++k) q[m * sh.atom_dim() + k] *= s;
    std::vector<double> x(sh.input_dim);
    for (double& v : x) v = rng.uniform(-2, 2);
    CHECK(forward(q, x)[0] == forward(p, x)[0] * s);
  }
}

TEST_CASE("property: risk does not depend on neuron order") {
  for (std::uint64_t i = 0; i < 30; ++i) {
    auto rng = fixture(900 + i);
    const NetworkShape sh{pick(rng, 1, 3), pick(rng, 2, 10), 1};
    const auto p = testing::random_params(rng, sh);
    std::vector<std::size_t> order(sh.width);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<double> permuted;
    for (std::size_t m : order) {
      const auto a = p.neuron(m);
      permuted.insert(permuted.end(), a.begin(), a.end());
    }
    const auto data = testing::regression_data(rng, sh.input_dim, 20);
    const double r1 = empirical_risk(p, BatchRef(data), LossKind::SquaredError);
    const double r2 = empirical_risk(ParamVector(sh, permuted), BatchRef(data), LossKind::SquaredError);
    CHECK(std::abs(r1 - r2) <= 1e-12);
  }
}
