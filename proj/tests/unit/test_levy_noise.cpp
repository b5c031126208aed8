#include <catch2/catch_amalgamated.hpp>

#include "mkvlevy/levy_noise.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace mkvlevy;
using Catch::Approx;

namespace {

struct Stat {
  double mean = 0, se = 0;
};

template <class F>
Stat mc(std::size_t n, F&& f) {
  double s1 = 0, s2 = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double v = f(k);
    s1 += v;
    s2 += v * v;
  }
  const double m = s1 / n;
  return {m, std::sqrt(std::max(0.0, s2 / n - m * m) / (n - 1))};
}

Vec terminal(const NoiseModel& model, const TimeGrid& g, std::uint64_t seed, std::size_t k) {
  Rng rng = Rng::stream(seed, {tags::kPath, k});
  const NoiseIncrements inc = sample_increments(model, g, rng);
  Vec z = Vec::Zero(model.dim());
  for (const auto& d : inc.dZ) z += d;
  return z;
}

}  // namespace

TEST_CASE("deterministic triplets", "[levy]") {
  Rng rng(1, 1);
  const TimeGrid g = uniform_grid(1.0, 10);
  const NoiseIncrements zero = sample_increments(LevyTriplet::deterministic(Vec::Zero(2)), g, rng);
  REQUIRE(zero.dZ.size() == g.size() - 1);
  for (const auto& d : zero.dZ) CHECK(d.norm() == 0.0);
  Vec v(2);
  v << 1.5, -2.0;
  const NoiseIncrements drift = sample_increments(LevyTriplet::deterministic(v), g, rng);
  for (const auto& d : drift.dZ) CHECK((d - v * 0.1).norm() < 1e-15);
}

TEST_CASE("non-uniform grids are rejected", "[levy]") {
  Rng rng(1, 1);
  CHECK_THROWS_AS(sample_increments(LevyTriplet::brownian(1), TimeGrid{0.0, 0.1, 0.3}, rng), PreconditionError);
}

TEST_CASE("brownian covariance of Z_1", "[levy]") {
  const NoiseModel model(LevyTriplet::brownian(2));
  const TimeGrid g = uniform_grid(1.0, 4);
  const std::size_t n = 100000;
  std::vector<Vec> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = terminal(model, g, 3, k);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const Stat s = mc(n, [&](std::size_t k) { return z[k][a] * z[k][b]; });
      CHECK(std::abs(s.mean - (a == b ? 1.0 : 0.0)) <= 4 * s.se);
    }
  }
}

TEST_CASE("pure-drift subordination is brownian motion", "[levy]") {
  Rng rng(2, 2);
  const TimeGrid g = uniform_grid(1.0, 50);
  const SubordinateIncrements si = subordinate_bm_increments(BernsteinSpec::pure_drift(1.0), g, rng);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(si.path.values[i] == Approx(g[i]).margin(1e-14));
  CHECK(si.increments.dZ.size() == g.size() - 1);
}

TEST_CASE("characteristic function of subordinate stable noise", "[levy][property]") {
  const double alpha = 0.75;
  const NoiseModel model(LevyTriplet::subordinate(2, BernsteinSpec::stable(alpha)));
  const TimeGrid g = uniform_grid(1.0, 10);
  const std::size_t n = 100000;
  std::vector<Vec> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = terminal(model, g, 4, k);
  std::vector<Vec> probes(3, Vec::Zero(2));
  probes[0] << 1.0, 0.0;
  probes[1] << 0.5, 0.5;
  probes[2] << 0.0, 2.0;
  for (const Vec& u : probes) {
    const double exact = std::exp(-std::pow(0.5 * u.squaredNorm(), alpha));
    const Stat s = mc(n, [&](std::size_t k) { return std::cos(u.dot(z[k])); });
    INFO("u=" << u.transpose() << " mc=" << s.mean << " exact=" << exact);
    CHECK(std::abs(s.mean - exact) <= 4 * s.se);
    CHECK(std::real(characteristic_exponent(model.triplet(), u)) == Approx(std::pow(0.5 * u.squaredNorm(), alpha)));
  }
}

TEST_CASE("characteristic function of the gaussian triplet", "[levy][property]") {
  LevyTriplet t = LevyTriplet::brownian(1);
  t.drift[0] = 0.3;
  t.covariance(0, 0) = 2.0;
  const NoiseModel model(validated(t));
  const TimeGrid g = uniform_grid(1.0, 5);
  const std::size_t n = 100000;
  std::vector<Vec> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = terminal(model, g, 5, k);
  for (double u : {0.3, 0.8, 1.5}) {
    Vec uv(1);
    uv << u;
    const std::complex<double> psi = characteristic_exponent(model.triplet(), uv);
    const std::complex<double> phi = std::exp(-psi);
    const Stat re = mc(n, [&](std::size_t k) { return std::cos(u * z[k][0]); });
    const Stat im = mc(n, [&](std::size_t k) { return std::sin(u * z[k][0]); });
    CHECK(std::abs(re.mean - phi.real()) <= 4 * re.se);
    CHECK(std::abs(im.mean - phi.imag()) <= 4 * im.se);
    // psi = -i l u + q u^2 / 2
    CHECK(psi.real() == Approx(u * u));
    CHECK(psi.imag() == Approx(-0.3 * u));
  }
}

TEST_CASE("compound jumps with a power-law density", "[levy][property]") {
  // nu(dx) = c/2 |x|^{-1-beta} per side; psi(u) = -c Gamma(-beta) cos(pi beta/2) |u|^beta
  const double c = 1.0, beta = 0.5;
  LevyTriplet t = LevyTriplet::deterministic(Vec::Zero(1));
  t.jumps = jumps::isotropic_power_law(1, c, beta, 1e-2);
  const NoiseModel model(validated(t));
  const TimeGrid g = uniform_grid(1.0, 10);
  const std::size_t n = 60000;
  std::vector<double> z(n);
  for (std::size_t k = 0; k < n; ++k) z[k] = terminal(model, g, 6, k)[0];
  for (double u : {0.25, 0.5, 1.0}) {
    const double psi = -c * std::tgamma(-beta) * std::cos(std::numbers::pi * beta / 2) * std::pow(u, beta);
    const Stat s = mc(n, [&](std::size_t k) { return std::cos(u * z[k]); });
    INFO("u=" << u << " mc=" << s.mean << " exact=" << std::exp(-psi));
    CHECK(std::abs(s.mean - std::exp(-psi)) <= 4 * s.se);
  }
}

TEST_CASE("large jumps are logged", "[levy]") {
  LevyTriplet t = LevyTriplet::deterministic(Vec::Zero(1));
  t.jumps = jumps::isotropic_power_law(1, 1.0, 0.5, 1e-2);
  Rng rng(7, 7);
  const NoiseIncrements inc = sample_increments(validated(t), uniform_grid(20.0, 200), rng);
  CHECK_FALSE(inc.large_jumps.empty());
  for (const auto& j : inc.large_jumps) CHECK(j.jump.norm() >= 1.0);
}

TEST_CASE("same seed gives identical increments", "[levy]") {
  const NoiseModel model(LevyTriplet::subordinate(2, BernsteinSpec::gamma(1.0)));
  const TimeGrid g = uniform_grid(1.0, 20);
  Rng a(11, 3), b(11, 3);
  const NoiseIncrements x = sample_increments(model, g, a);
  const NoiseIncrements y = sample_increments(model, g, b);
  for (std::size_t i = 0; i < x.dZ.size(); ++i) CHECK(x.dZ[i] == y.dZ[i]);
}

TEST_CASE("successive increments are uncorrelated", "[levy][property]") {
  const NoiseModel model(LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75)));
  const TimeGrid g = uniform_grid(0.2, 2);
  const std::size_t n = 100000;
  // bounded transform keeps the second moment finite
  const Stat s = mc(n, [&](std::size_t k) {
    Rng rng = Rng::stream(12, {tags::kPath, k});
    const NoiseIncrements inc = sample_increments(model, g, rng);
    return std::tanh(inc.dZ[0][0]) * std::tanh(inc.dZ[1][0]);
  });
  CHECK(std::abs(s.mean) <= 4 * s.se);
}

TEST_CASE("first absolute moment is refinement stable", "[levy][property]") {
  const NoiseModel model(LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75)));
  const TimeGrid g = uniform_grid(1.0, 1);
  auto moment = [&](std::size_t n) {
    double s = 0;
    for (std::size_t k = 0; k < n; ++k) s += std::abs(terminal(model, g, 13, k)[0]);
    return s / n;
  };
  const double m1 = moment(50000);
  const double m2 = moment(100000);
  CHECK(std::isfinite(m1));
  CHECK(std::abs(m2 - m1) / m1 < 0.05);
}

TEST_CASE("triplet validation", "[levy]") {
  LevyTriplet t = LevyTriplet::brownian(2);
  t.covariance(0, 1) = 0.1;
  t.covariance(1, 0) = 0.3;
  CHECK_THROWS_AS(validated(t), PreconditionError);
  t = LevyTriplet::brownian(1);
  t.covariance(0, 0) = -5e-13;
  CHECK(validated(t).covariance(0, 0) == 0.0);
  t.covariance(0, 0) = -1.0;
  CHECK_THROWS_AS(validated(t), PreconditionError);
}

TEST_CASE("triplet json and csv", "[levy]") {
  const LevyTriplet t = LevyTriplet::subordinate(2, BernsteinSpec::stable(0.6));
  const LevyTriplet back = triplet_from_json(to_json(t));
  CHECK(back.dim() == 2);
  Vec u(2);
  u << 0.4, 0.1;
  CHECK(std::real(characteristic_exponent(back, u)) == Approx(std::real(characteristic_exponent(t, u))));
  Rng rng(1, 1);
  std::ostringstream os;
  write_csv(os, sample_increments(t, uniform_grid(1.0, 3), rng));
  CHECK(os.str().rfind("t,dZ_1,dZ_2\n", 0) == 0);
}
