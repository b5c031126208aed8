#include <catch2/catch_amalgamated.hpp>

#include "mkvlevy/parallel.hpp"
#include "mkvlevy/subordinator.hpp"

#include <cmath>
#include <sstream>

using namespace mkvlevy;
using Catch::Approx;

namespace {

// MC mean and SE of exp(-r S_t)
std::pair<double, double> laplace_mc(const BernsteinSpec& spec, double t, double r, std::size_t n, std::uint64_t seed) {
  const SubordinatorIncrementSampler sampler(spec);
  double s1 = 0, s2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    Rng rng = Rng::stream(seed, {tags::kPath, k});
    const double v = std::exp(-r * sampler.next(t, rng));
    s1 += v;
    s2 += v * v;
  }
  const double m = s1 / n;
  return {m, std::sqrt(std::max(0.0, s2 / n - m * m) / (n - 1))};
}

}  // namespace

TEST_CASE("laplace exponent catalog values", "[subordinator]") {
  CHECK(laplace_exponent(BernsteinSpec::stable(0.5), 4.0) == Approx(2.0).epsilon(1e-14));
  CHECK(laplace_exponent(BernsteinSpec::relativistic_stable(0.5, 1.0), 3.0) == Approx(1.0).epsilon(1e-14));
  CHECK(laplace_exponent(BernsteinSpec::gamma(1.0), 1e-12) < 1e-11);
  CHECK(laplace_exponent(BernsteinSpec::gamma(2.0), 2.0) == Approx(std::log(2.0)));
  CHECK(laplace_exponent(BernsteinSpec::log_type(1.0), 1.0) == Approx(std::log(2.0)));
  CHECK(laplace_exponent(BernsteinSpec::pure_drift(1.5), 2.0) == Approx(3.0));
  CHECK_THROWS_AS(laplace_exponent(BernsteinSpec::stable(0.5), 0.0), DomainError);
  CHECK_THROWS_AS(laplace_exponent(BernsteinSpec::stable(0.5), -1.0), DomainError);
}

TEST_CASE("every Bernstein function vanishes at 0+", "[subordinator]") {
  for (const auto& s : {BernsteinSpec::stable(0.7), BernsteinSpec::gamma(1.0), BernsteinSpec::relativistic_stable(0.6, 1.0),
                        BernsteinSpec::log_type(2.0), BernsteinSpec::pure_drift(1.0), BernsteinSpec::shifted_pareto(2.0)})
    CHECK(laplace_exponent(s, 1e-10) < 1e-4);
}

TEST_CASE("custom shifted pareto matches its closed form", "[subordinator]") {
  // r e^r int_1^inf e^{-ry} y^{-n} dy, n = 2: r e^r E_2(r) with E_2(r) = e^{-r} - r E_1(r)
  const double r = 1.3;
  const double e1 = -std::expint(-r);  // E_1(r) = -Ei(-r)
  const double e2 = std::exp(-r) - r * e1;
  const LaplaceValue v = laplace_exponent_report(BernsteinSpec::shifted_pareto(2.0), r);
  CHECK(v.value == Approx(r * std::exp(r) * e2).epsilon(1e-8));
  CHECK(v.abs_error <= 1e-10);
}

TEST_CASE("H1' catalog answers", "[subordinator]") {
  CHECK(check_h1prime(BernsteinSpec::stable(0.7), 1.0).holds);
  CHECK(check_h1prime(BernsteinSpec::gamma(2.0), 8.0).holds);
  CHECK_FALSE(check_h1prime(BernsteinSpec::stable(0.6), 1.5).holds);
  CHECK(check_h1prime(BernsteinSpec::relativistic_stable(0.6, 1.0), 10.0).holds);
  CHECK(check_h1prime(BernsteinSpec::pure_drift(1.0), 5.0).holds);
  // nu ~ x^{-3}: x^{theta/2} integrable iff theta < 4
  CHECK(check_h1prime(BernsteinSpec::shifted_pareto(2.0), 3.0).holds);
  CHECK_FALSE(check_h1prime(BernsteinSpec::shifted_pareto(2.0), 5.0).holds);
}

TEST_CASE("pure drift paths equal the grid", "[subordinator]") {
  Rng rng(1, 1);
  const TimeGrid g = uniform_grid(1.0, 10);
  const SubordinatorPath p = sample_path(BernsteinSpec::pure_drift(1.0), g, rng);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(p.values[i] == Approx(g[i]).margin(1e-14));
  CHECK(p.grid.back() >= 2.0 - 1e-12);
}

TEST_CASE("sampled paths are nondecreasing and start at 0", "[subordinator][property]") {
  const TimeGrid g = uniform_grid(1.0, 100);
  for (const auto& s : {BernsteinSpec::stable(0.7), BernsteinSpec::gamma(1.0), BernsteinSpec::relativistic_stable(0.6, 1.0),
                        BernsteinSpec::log_type(2.0), BernsteinSpec::shifted_pareto(2.0)}) {
    for (std::uint64_t k = 0; k < 20; ++k) {
      Rng rng = Rng::stream(5, {tags::kPath, k});
      const SubordinatorPath p = sample_path(s, g, rng);
      REQUIRE(p.values.front() == 0.0);
      for (std::size_t i = 1; i < p.size(); ++i) REQUIRE(p.values[i] >= p.values[i - 1]);
    }
  }
}

TEST_CASE("laplace transform law check on the catalog", "[subordinator][property]") {
  const std::size_t n = 30000;
  std::uint64_t seed = 100;
  for (const auto& s : {BernsteinSpec::stable(0.7), BernsteinSpec::gamma(1.0), BernsteinSpec::relativistic_stable(0.6, 1.0),
                        BernsteinSpec::log_type(2.0), BernsteinSpec::shifted_pareto(3.0)}) {
    for (double t : {0.5, 1.0}) {
      for (double r : {0.5, 1.0, 2.0}) {
        const auto [m, se] = laplace_mc(s, t, r, n, ++seed);
        const double exact = std::exp(-t * laplace_exponent(s, r));
        INFO(s.kind_name() << " t=" << t << " r=" << r << " mc=" << m << " exact=" << exact << " se=" << se);
        CHECK(std::abs(m - exact) <= 4 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("regularization examples", "[subordinator]") {
  SubordinatorPath c;
  c.grid = uniform_grid(3.0, 300);
  c.values.assign(c.grid.size(), 2.0);
  c.values[0] = 2.0;
  const double eps = 0.1;
  const SubordinatorPath rc = regularize(c, eps, 1.0);
  for (std::size_t i = 0; i < rc.size(); ++i) CHECK(rc.values[i] == Approx(2.0 + eps * rc.grid[i]).margin(1e-12));
  REQUIRE(rc.eps_applied);
  CHECK(*rc.eps_applied == eps);

  // l_t = t on a fine grid; left-constant interpolation costs O(dt)
  SubordinatorPath lin;
  lin.grid = uniform_grid(3.0, 300000);
  lin.values = lin.grid;
  const SubordinatorPath rl = regularize(lin, eps, 1.0);
  for (std::size_t i = 0; i < rl.size(); i += 997)
    CHECK(rl.values[i] == Approx(rl.grid[i] + eps / 2 + eps * rl.grid[i]).margin(2e-5));
}

TEST_CASE("regularization sandwich and monotone convergence", "[subordinator][property]") {
  const TimeGrid g = uniform_grid(1.0, 1000);
  for (std::uint64_t k = 0; k < 10; ++k) {
    Rng rng = Rng::stream(8, {tags::kPath, k});
    const SubordinatorPath p = sample_path(BernsteinSpec::stable(0.6), g, rng);
    const SubordinatorPath r5 = regularize(p, 0.5, 1.0);
    const SubordinatorPath r1 = regularize(p, 0.1, 1.0);
    const SubordinatorPath r02 = regularize(p, 0.02, 1.0);
    for (std::size_t i = 0; i < r02.size(); ++i) {
      const double t = r02.grid[i];
      REQUIRE(p.values[i] <= r02.values[i] - 0.02 * t + 1e-12);
      REQUIRE(r02.values[i] - 0.02 * t <= p.at(t + 0.02) + 1e-12);
      REQUIRE(r02.values[i] <= r1.values[i] + 1e-12);
      REQUIRE(r1.values[i] <= r5.values[i] + 1e-12);
      if (i > 0) REQUIRE(r02.values[i] > r02.values[i - 1]);
    }
  }
}

TEST_CASE("regularize rejects short paths and bad eps", "[subordinator]") {
  SubordinatorPath p;
  p.grid = uniform_grid(1.0, 10);
  p.values.assign(p.grid.size(), 0.0);
  CHECK_THROWS_AS(regularize(p, 0.5, 1.0), PreconditionError);
  CHECK_THROWS(regularize(p, 1.5));
}

TEST_CASE("inverse time", "[subordinator]") {
  Rng rng(4, 4);
  const TimeGrid g = uniform_grid(1.0, 200);
  const SubordinatorPath r = regularize(sample_path(BernsteinSpec::gamma(1.0), g, rng), 0.1, 1.0);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(inverse_time(r, r.values[i]) == Approx(r.grid[i]).epsilon(1e-9).margin(1e-12));
  double prev = -1.0;
  for (int k = 0; k <= 50; ++k) {
    const double s = r.values.front() + (r.values.back() - r.values.front()) * k / 50.0;
    const double t = inverse_time(r, s);
    CHECK(t > prev);
    prev = t;
  }
  CHECK_THROWS_AS(inverse_time(r, r.values.back() + 1.0), DomainError);

  // pure drift: l^eps_t - l^eps_0 = (1 + eps) t
  Rng r2(1, 1);
  const SubordinatorPath pd = regularize(sample_path(BernsteinSpec::pure_drift(1.0), g, r2), 0.1, 1.0);
  CHECK(inverse_time(pd, pd.values.front() + 1.1 * 0.37) == Approx(0.37).epsilon(1e-9));
}

TEST_CASE("bernstein json round trip", "[subordinator]") {
  for (const auto& s : {BernsteinSpec::stable(0.7), BernsteinSpec::gamma(1.0), BernsteinSpec::relativistic_stable(0.6, 1.0),
                        BernsteinSpec::log_type(2.0), BernsteinSpec::pure_drift(1.0), BernsteinSpec::shifted_pareto(2.0)}) {
    const auto j = to_json(s);
    const BernsteinSpec back = bernstein_from_json(j);
    CHECK(back.kind_name() == s.kind_name());
    CHECK(laplace_exponent(back, 1.7) == Approx(laplace_exponent(s, 1.7)));
  }
  CHECK_THROWS(bernstein_from_json(nlohmann::json{{"kind", "stable"}, {"alpha", 1.5}}));
  CHECK_THROWS(bernstein_from_json(nlohmann::json{{"kind", "nope"}}));
}

TEST_CASE("path csv", "[subordinator]") {
  Rng rng(1, 1);
  const SubordinatorPath p = sample_path(BernsteinSpec::stable(0.5), uniform_grid(1.0, 4), rng);
  std::ostringstream os;
  write_csv(os, p);
  CHECK(os.str().rfind("t,value\n", 0) == 0);
}
