#include <catch2/catch_amalgamated.hpp>

#include "mkvlevy/parallel.hpp"
#include "mkvlevy/sde_core.hpp"

#include <cmath>
#include <sstream>

using namespace mkvlevy;
using Catch::Approx;

namespace {

Vec v1(double x) {
  Vec v(1);
  v << x;
  return v;
}

NoiseIncrements quiet(const TimeGrid& g, int d = 1) {
  Rng rng(0, 0);
  return sample_increments(LevyTriplet::deterministic(Vec::Zero(d)), g, rng);
}

}  // namespace

TEST_CASE("zero drift and zero sigma keep x0", "[sde]") {
  const TimeGrid g = uniform_grid(1.0, 20);
  Rng rng(1, 1);
  const NoiseIncrements noise = sample_increments(LevyTriplet::brownian(2), g, rng);
  Vec x0(2);
  x0 << 0.3, -1.0;
  const Path p = euler_solve(zero_drift(), constant_sigma(Mat::Zero(2, 2)), noise, x0);
  for (const auto& s : p.states) CHECK(s == x0);
}

TEST_CASE("linear ODE matches exp(-t)", "[sde]") {
  const TimeGrid g = uniform_grid(1.0, 10000);
  const Path p = euler_solve(linear_drift(1.0), identity_sigma(1), quiet(g), v1(1.0), g);
  CHECK(p.states.back()[0] == Approx(std::exp(-1.0)).margin(5e-4));
}

TEST_CASE("euler weak error halves with the step", "[sde][property]") {
  auto err = [](std::size_t steps) {
    const TimeGrid g = uniform_grid(1.0, steps);
    const Path p = euler_solve(linear_drift(1.0), identity_sigma(1), quiet(g), v1(1.0));
    return std::abs(p.states.back()[0] - std::exp(-1.0));
  };
  for (std::size_t n : {50, 100, 200}) {
    const double ratio = err(2 * n) / err(n);
    CHECK(ratio >= 0.5 * 0.75);
    CHECK(ratio <= 0.5 * 1.25);
  }
}

TEST_CASE("brownian variance at time 1", "[sde]") {
  const TimeGrid g = uniform_grid(1.0, 10);
  const NoiseModel model(LevyTriplet::brownian(1));
  const std::size_t n = 100000;
  const PathBundle b = simulate_bundle(zero_drift(), identity_sigma(1), model, v1(0.0), g, n, 21);
  double s2 = 0, s4 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = b.state(k, b.grid.size() - 1)[0];
    s2 += x * x;
    s4 += x * x * x * x;
  }
  const double var = s2 / n;
  const double se = std::sqrt((s4 / n - var * var) / (n - 1));
  CHECK(std::abs(var - 1.0) <= 4 * se);
}

TEST_CASE("sup moment trivial cases", "[sde]") {
  const TimeGrid g = uniform_grid(1.0, 10);
  const NoiseModel model(LevyTriplet::deterministic(Vec::Zero(1)));
  const PathBundle b = simulate_bundle(zero_drift(), identity_sigma(1), model, v1(-2.0), g, 50, 1);
  CHECK(sup_moment(b, 1.5) == Approx(std::pow(2.0, 1.5)));
  const PathBundle empty = simulate_bundle(zero_drift(), identity_sigma(1), model, v1(-2.0), g, 0, 1);
  CHECK(sup_moment(empty, 1.0) == 0.0);
  CHECK_THROWS(sup_moment(b, 0.5));
}

TEST_CASE("sup moment is refinement stable for OU with stable noise", "[sde][property]") {
  const TimeGrid g = uniform_grid(1.0, 100);
  const NoiseModel model(LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75)));
  BundleOptions opts;
  opts.record_stride = 100;
  const PathBundle a = simulate_bundle(linear_drift(1.0), identity_sigma(1), model, v1(0.5), g, 50000, 31, opts);
  opts.first_path = 50000;
  const PathBundle b = simulate_bundle(linear_drift(1.0), identity_sigma(1), model, v1(0.5), g, 50000, 31, opts);
  const double m1 = sup_moment(a, 1.0);
  const double m2 = 0.5 * (m1 + sup_moment(b, 1.0));
  CHECK(std::isfinite(m1));
  CHECK(std::abs(m2 - m1) / m1 < 0.05);
}

TEST_CASE("bundles are nested and thread independent", "[sde]") {
  const TimeGrid g = uniform_grid(1.0, 20);
  const NoiseModel model(LevyTriplet::subordinate(1, BernsteinSpec::gamma(1.0)));
  set_max_threads(1);
  const PathBundle big = simulate_bundle(linear_drift(1.0), identity_sigma(1), model, v1(1.0), g, 400, 5);
  set_max_threads(4);
  BundleOptions opts;
  opts.first_path = 200;
  const PathBundle tail = simulate_bundle(linear_drift(1.0), identity_sigma(1), model, v1(1.0), g, 200, 5, opts);
  set_max_threads(0);
  for (std::size_t k = 0; k < 200; ++k)
    for (std::size_t s = 0; s < g.size(); ++s) REQUIRE(tail.state(k, s) == big.state(200 + k, s));
}

TEST_CASE("synchronous contraction under one-sided lipschitz drift", "[sde][property]") {
  const TimeGrid g = uniform_grid(2.0, 200);
  const double dt = g[1];
  const NoiseModel model(LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75)));
  const DriftField b = linear_drift(1.0);  // kappa = -2
  for (std::uint64_t k = 0; k < 20; ++k) {
    Rng rng = Rng::stream(41, {tags::kPath, k});
    const NoiseIncrements noise = sample_increments(model, g, rng);
    const Path x = euler_solve(b, identity_sigma(1), noise, v1(1.0));
    const Path y = euler_solve(b, identity_sigma(1), noise, v1(-0.5));
    for (std::size_t i = 0; i < g.size(); ++i)
      REQUIRE(std::abs(x.states[i][0] - y.states[i][0]) <= 1.5 * std::exp(-g[i]) * (1 + 10 * dt));
  }
}

TEST_CASE("divergence is reported with the first bad step", "[sde]") {
  DriftField cubic = zero_drift();
  cubic.b = [](double, const Vec& x) { return Vec(x.array().cube().matrix()); };
  const TimeGrid g = uniform_grid(1.0, 100);
  try {
    euler_solve(cubic, identity_sigma(1), quiet(g), v1(10.0));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() < 100);
  }
}

TEST_CASE("grid mismatch is a precondition error", "[sde]") {
  const TimeGrid g = uniform_grid(1.0, 10);
  CHECK_THROWS_AS(euler_solve(zero_drift(), identity_sigma(1), quiet(g), v1(0.0), uniform_grid(1.0, 20)),
                  PreconditionError);
}

TEST_CASE("one-sided lipschitz spot check", "[sde]") {
  Rng rng(3, 3);
  CHECK(check_one_sided_lipschitz(linear_drift(1.0), 2, 3.0, 1.0, rng).holds);
  DriftField lie = linear_drift(1.0);
  lie.kappa = [](double) { return -5.0; };
  CHECK_FALSE(check_one_sided_lipschitz(lie, 2, 3.0, 1.0, rng).holds);
}

TEST_CASE("path csv header", "[sde]") {
  const TimeGrid g = uniform_grid(1.0, 2);
  std::ostringstream os;
  write_csv(os, euler_solve(zero_drift(), identity_sigma(2), quiet(g, 2), Vec::Zero(2)));
  CHECK(os.str().rfind("t,x_1,x_2\n", 0) == 0);
}
