#include <catch2/catch_amalgamated.hpp>

#include "mkvlevy/harnack.hpp"

#include <cmath>
#include <sstream>

using namespace mkvlevy;
using Catch::Approx;

namespace {

InitialLaw at(double x) { return InitialLaw::point_mass(Vec::Constant(1, x)); }

HarnackConfig reference_config() {
  HarnackConfig c;
  c.T = 1.0;
  c.dt = 0.01;
  c.subordinator = BernsteinSpec::stable(0.75);
  c.variant = KVariant::Derived;
  c.xi_kernel = XiKernel::AtHorizon;
  c.cost_paths = 5000;
  return c;
}

SubordinatorPath regularized_pure_drift(double T, std::size_t steps, double eps) {
  Rng rng(1, 1);
  SamplerOptions so;
  so.extension = eps;
  return regularize(sample_path(BernsteinSpec::pure_drift(1.0), uniform_grid(T, steps), rng, so), eps, T);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / v.size();
}

double se(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1) / v.size());
}

}  // namespace

TEST_CASE("K1 examples", "[harnack]") {
  CHECK(K1([](double) { return 0.7; }, 2.0) == Approx(std::exp(-1.4)));
  CHECK(K1([](double) { return 5.0; }, 0.0) == 1.0);
  CHECK(std::abs(K1([](double r) { return r; }, 2.0) - std::exp(-2.0)) <= 1e-9);
}

TEST_CASE("K variants", "[harnack]") {
  const ScalarFn zero = [](double) { return 0.0; };
  const ScalarFn one = [](double) { return 1.0; };
  const ScalarFn minus_one = [](double) { return -1.0; };
  for (auto v : {KVariant::Printed, KVariant::Derived}) CHECK(K(minus_one, zero, 1.3, 2.0, v).value == 0.0);
  for (double t : {0.5, 1.0, 2.0}) {
    CHECK(K(minus_one, one, t, 2.0, KVariant::Printed).value == Approx(std::exp(t / 2) - 1).epsilon(1e-10));
    CHECK(K(zero, one, t, 1.0, KVariant::Derived).value == Approx(std::exp(t / 2) - 1).epsilon(1e-10));
  }
  CHECK(std::string(to_string(KVariant::Derived)) == "derived");
  CHECK(k_variant_from_string("printed") == KVariant::Printed);
  CHECK_THROWS(k_variant_from_string("other"));
}

TEST_CASE("xi examples", "[harnack]") {
  const ScalarFn zero = [](double) { return 0.0; };
  const double eps = 0.1, T = 1.0;
  const SubordinatorPath reg = regularized_pure_drift(T, 100, eps);
  const Vec a = Vec::Constant(1, 0.0), b = Vec::Constant(1, 1.0), c = Vec::Constant(1, 3.0);
  CHECK(xi(0.4, a, a, 0.0, zero, zero, 1.0, reg, T) == 0.0);
  for (double t : {0.0, 0.3, 0.9}) CHECK(xi(t, a, b, 0.0, zero, zero, 1.0, reg, T) == Approx(1.0 / ((1 + eps) * T)));
  CHECK(xi(0.3, a, c, 0.0, zero, zero, 1.0, reg, T) == Approx(3.0 * xi(0.3, a, b, 0.0, zero, zero, 1.0, reg, T)));
}

TEST_CASE("test function catalog", "[harnack]") {
  for (const auto& name : test_function_names()) {
    const TestFunction f = test_function(name);
    Rng rng(2, 2);
    for (int i = 0; i < 200; ++i) {
      const double v = f.f(Vec::Constant(1, 4 * rng.normal()));
      REQUIRE(v >= f.lower_bound);
      REQUIRE(std::isfinite(v));
    }
  }
  CHECK(test_function("one_plus_gaussian").lower_bound == 1.0);
  CHECK_THROWS(test_function("nope"));
}

TEST_CASE("H5 check", "[harnack]") {
  HarnackConfig c = reference_config();
  CHECK_NOTHROW(check_h5(c));
  c.sigma = Mat::Zero(1, 1);
  CHECK_THROWS_AS(check_h5(c), PreconditionError);
  c.sigma = Mat::Identity(1, 1) * 2.0;
  c.lambda = [](double) { return 0.1; };
  CHECK_THROWS_AS(check_h5(c), PreconditionError);
}

TEST_CASE("coupled from the start", "[harnack]") {
  const HarnackConfig c = reference_config();
  const HarnackSetup s = prepare_harnack(c, drifts::meanfield_ou(1.0, 0.5), at(0.0), at(0.0), 200, 3);
  Rng rng(4, 4);
  SamplerOptions so;
  so.extension = c.eps;
  const auto reg = regularize(sample_path(c.subordinator, s.flows.mu.grid, rng, so), c.eps, c.T);
  const Vec x0 = Vec::Constant(1, 0.0);
  const CouplingRun run = coupled_solve(c, s.drift, x0, x0, 0.0, s.flows, reg, rng);
  REQUIRE(run.tau);
  CHECK(*run.tau == 0.0);
  CHECK(run.R == 1.0);
  CHECK(run.M_bracket == 0.0);
}

TEST_CASE("forced constant psi is an exponential martingale", "[harnack]") {
  HarnackConfig c = reference_config();
  c.subordinator = BernsteinSpec::pure_drift(1.0);
  const HarnackSetup s = prepare_harnack(c, drifts::ou(1.0), at(0.0), at(1.0), 200, 5);
  const double cval = 0.8, stop = 0.5;
  CouplingOptions o;
  o.forced_phi = [&](double t) { return Vec::Constant(1, t < stop - 1e-12 ? cval : 0.0); };
  const auto runs = coupling_runs(s, 20000, 6, o);
  const GirsanovCheck g = girsanov_mean_check(runs);
  CHECK(g.pass);
  CHECK(std::abs(g.mean - 1.0) <= 3 * g.se);
  // <M> = c^2 (l^eps_s - l^eps_0) = c^2 (1 + eps) s, and E[R log R] = <M>/2
  const double bracket = cval * cval * (1 + c.eps) * stop;
  std::vector<double> rlr;
  for (const auto& r : runs) {
    REQUIRE(r.M_bracket == Approx(bracket).epsilon(1e-9));
    rlr.push_back(r.R * std::log(r.R));
  }
  CHECK(std::abs(mean(rlr) - bracket / 2) <= 4 * se(rlr));

  CouplingOptions bad = o;
  bad.bracket_scale = 2.0;
  CHECK_FALSE(girsanov_mean_check(coupling_runs(s, 20000, 6, bad)).pass);
}

TEST_CASE("girsanov check edge cases", "[harnack]") {
  std::vector<CouplingRun> ones(1000);
  const GirsanovCheck g = girsanov_mean_check(ones);
  CHECK(g.pass);
  CHECK(g.mean == 1.0);
  CHECK_THROWS_AS(girsanov_mean_check(std::vector<CouplingRun>(999)), PreconditionError);
}

TEST_CASE("reference OU coupling closes with bounded bracket", "[harnack]") {
  const HarnackConfig c = reference_config();
  const HarnackSetup s = prepare_harnack(c, drifts::meanfield_ou(1.0, 0.5), at(0.0), at(1.0), 2000, 7);
  const auto runs = coupling_runs(s, 5000, 8);
  std::size_t closed = 0;
  for (const auto& r : runs) {
    if (r.tau && *r.tau <= c.T) ++closed;
    REQUIRE(r.R > 0.0);
    REQUIRE(r.M_bracket >= 0.0);
    REQUIRE(r.M_bracket <= r.bracket_bound);
  }
  CHECK(static_cast<double>(closed) / runs.size() >= 0.99);
  CHECK(girsanov_mean_check(runs).pass);
}

TEST_CASE("log-Harnack", "[harnack]") {
  HarnackConfig c = reference_config();
  const MkvDrift drift = drifts::meanfield_ou(1.0, 0.5);
  SECTION("f = 1") {
    c.f = test_function("one");
    const InequalityReport r = log_harnack_check(c, drift, at(0.0), at(1.0), 2000, 9);
    CHECK(r.lhs == 0.0);
    CHECK(r.rhs >= 0.0);
    CHECK(r.pass());
  }
  SECTION("same initial law") { CHECK(log_harnack_check(c, drift, at(0.5), at(0.5), 5000, 10).pass()); }
  SECTION("reference") {
    for (auto v : {KVariant::Printed, KVariant::Derived}) {
      c.variant = v;
      CHECK(log_harnack_check(c, drift, at(0.0), at(1.0), 10000, 11).pass());
    }
  }
  SECTION("f below one is rejected") {
    c.f = test_function("gaussian");
    CHECK_THROWS_AS(log_harnack_check(c, drift, at(0.0), at(1.0), 200, 9), PreconditionError);
  }
}

TEST_CASE("power-Harnack", "[harnack]") {
  HarnackConfig c = reference_config();
  const MkvDrift drift = drifts::meanfield_ou(1.0, 0.5);
  c.p = 2.0;
  SECTION("constant f") {
    c.f = test_function("one");
    CHECK(power_harnack_check(c, drift, at(0.0), at(1.0), 2000, 12).pass());
  }
  SECTION("same initial law") {
    c.f = test_function("gaussian");
    CHECK(power_harnack_check(c, drift, at(0.5), at(0.5), 5000, 13).pass());
  }
  SECTION("reference") {
    c.f = test_function("gaussian");
    CHECK(power_harnack_check(c, drift, at(0.0), at(1.0), 10000, 14).pass());
  }
}

TEST_CASE("entropy cost", "[harnack]") {
  const HarnackConfig c = reference_config();
  const MkvDrift drift = drifts::meanfield_ou(1.0, 0.5);
  const InequalityReport same = entropy_cost_check(c, drift, at(0.5), at(0.5), 2000, 15);
  CHECK(same.lhs == 0.0);
  CHECK(same.pass());
  CHECK(entropy_cost_check(c, drift, at(0.0), at(1.0), 5000, 16).pass());
}

TEST_CASE("regularized cost converges as eps shrinks", "[harnack][property]") {
  const ScalarFn k1 = [](double) { return -2.0; };
  const TimeGrid g = uniform_grid(1.0, 1000);
  const std::vector<double> epss{0.5, 0.1, 0.02};
  std::vector<double> gaps(epss.size(), 0.0);
  double base_sum = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    Rng rng = Rng::stream(17, {tags::kPath, k});
    const SubordinatorPath raw = sample_path(BernsteinSpec::stable(0.75), g, rng);
    const double base = stieltjes_k1(k1, raw, 1.0);
    base_sum += base;
    for (std::size_t e = 0; e < epss.size(); ++e) {
      const SubordinatorPath reg = regularize(raw, epss[e], 1.0);
      gaps[e] += std::abs(stieltjes_k1(k1, reg, 1.0) - base);
      // l^eps_t >= l_t pointwise
      for (std::size_t i = 0; i < reg.size(); ++i) REQUIRE(reg.values[i] >= raw.values[i] - 1e-12);
    }
  }
  CHECK(gaps[1] < gaps[0]);
  CHECK(gaps[2] < gaps[1]);
  CHECK(gaps[2] < 0.25 * base_sum);
}

TEST_CASE("inverse cost tails", "[harnack]") {
  const ScalarFn k1 = [](double) { return -1.0; };
  const InverseCost stable = inverse_cost(BernsteinSpec::stable(0.75), k1, 1.0, 0.01, 5000, 18);
  CHECK(stable.finite);
  CHECK(stable.upper >= stable.mean);
  const InverseCost gamma = inverse_cost(BernsteinSpec::gamma(1.0), k1, 1.0, 0.01, 20000, 19);
  CHECK_FALSE(gamma.finite);
  // Pareto with index 1.5
  Rng rng(20, 20);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = std::pow(rng.uniform(), -1.0 / 1.5);
  CHECK(hill_tail_index(xs, 1000) == Approx(1.5).epsilon(0.1));
}

TEST_CASE("gamma subordinator is reported inconclusive", "[harnack]") {
  HarnackConfig c = reference_config();
  c.subordinator = BernsteinSpec::gamma(1.0);
  c.cost_paths = 20000;
  const InequalityReport r = log_harnack_check(c, drifts::ou(1.0), at(0.0), at(1.0), 1000, 21);
  CHECK(r.verdict == Verdict::Inconclusive);
}

TEST_CASE("coupling run csv", "[harnack]") {
  const HarnackConfig c = reference_config();
  const HarnackSetup s = prepare_harnack(c, drifts::ou(1.0), at(0.0), at(1.0), 100, 22);
  CouplingOptions o;
  o.record_paths = true;
  const auto runs = coupling_runs(s, 1, 23, o);
  std::ostringstream os;
  write_csv(os, runs.front());
  CHECK(os.str().rfind("t,", 0) == 0);
  CHECK(runs.front().times.size() == s.flows.mu.grid.size());
}
