#include <catch2/catch_amalgamated.hpp>

#include "../support/oracles.hpp"
#include "mkvlevy/fpke.hpp"
#include "mkvlevy/metrics.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace mkvlevy;
using Catch::Approx;

namespace {

InitialLaw gaussian(double m, double s) { return InitialLaw::gaussian(Vec::Constant(1, m), s); }

double mean_of(const Grid1D& g, const DensityField& u) {
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t j = 0; j < g.n; ++j) {
    m0 += u.values[j];
    m1 += g.x(j) * u.values[j];
  }
  return m1 / m0;
}

}  // namespace

TEST_CASE("stencil symbol matches the operator symbol", "[fpke]") {
  for (double alpha : {0.6, 0.75, 0.9}) {
    const FractionalStencil st(alpha, 0.05, 800);
    for (double xi : {0.5, 1.0, 2.0, 4.0}) {
      const double exact = -std::pow(xi * xi / 2.0, alpha);
      INFO("alpha " << alpha << " xi " << xi);
      CHECK(st.symbol(xi) == Approx(exact).epsilon(0.01));
    }
  }
}

TEST_CASE("singular integral constant", "[fpke]") {
  for (double alpha : {0.55, 0.7, 0.9}) {
    const double fourier = oracle::frac_laplacian_gaussian_fourier(0.0, alpha);
    CHECK(fourier == Approx(-std::tgamma(alpha + 0.5) / std::sqrt(std::numbers::pi)).epsilon(1e-8));
    for (double x : {0.0, 0.7, 2.0}) {
      INFO("alpha " << alpha << " x " << x);
      CHECK(oracle::frac_laplacian_gaussian_integral(x, alpha, frac_constant(alpha)) ==
            Approx(oracle::frac_laplacian_gaussian_fourier(x, alpha)).epsilon(1e-6).margin(1e-9));
    }
  }
}

TEST_CASE("discrete operator on a gaussian", "[fpke]") {
  for (double alpha : {0.6, 0.9}) {
    const Grid1D g = make_grid(20.0, 0.05, alpha);
    std::vector<double> u;
    for (double x : g.nodes()) u.push_back(std::exp(-x * x / 2.0));
    const auto out = frac_laplacian_apply(g, u);
    const std::size_t c = g.n / 2;
    const double centre = oracle::frac_laplacian_gaussian_fourier(g.x(c), alpha);
    CHECK(out[c] == Approx(centre).epsilon(0.01));
    for (std::size_t j : {c + 20, c + 40, c + 80}) {
      INFO("alpha " << alpha << " x " << g.x(j));
      CHECK(std::abs(out[j] - oracle::frac_laplacian_gaussian_fourier(g.x(j), alpha)) <= 0.01 * std::abs(centre));
    }
  }
}

TEST_CASE("stencil structure", "[fpke]") {
  const Grid1D g = make_grid(5.0, 0.05, 0.8);
  std::vector<double> delta(g.n, 0.0);
  const std::size_t c = g.n / 2;
  delta[c] = 1.0;
  const auto out = frac_laplacian_apply(g, delta);
  for (std::size_t m = 1; m < 50; ++m) CHECK(std::abs(out[c + m] - out[c - m]) <= 1e-12 * std::abs(out[c]));
  CHECK(out[c] < 0.0);
  for (std::size_t m = 1; m < 50; ++m) CHECK(out[c + m] > 0.0);

  const auto zero = frac_laplacian_apply(g, std::vector<double>(g.n, 0.0));
  for (double v : zero) CHECK(v == 0.0);
  for (double r : FractionalStencil(0.8, 0.05, g.n).exit_rates()) CHECK(r >= 0.0);
}

TEST_CASE("alpha outside (1/2, 1) is rejected", "[fpke]") {
  for (double a : {0.5, 0.3, 1.0, 1.2}) {
    CHECK_THROWS_AS(frac_constant(a), DomainError);
    CHECK_THROWS_AS(make_grid(10.0, 0.1, a), DomainError);
  }
}

TEST_CASE("zero step", "[fpke]") {
  const Grid1D g = make_grid(10.0, 0.1, 0.8);
  const FpkeSolver s(g);
  DensityField u = density_from_law(g, gaussian(0.0, 1.0));
  const auto before = u.values;
  s.step(u, drifts::ou(1.0), 0.0);
  CHECK(u.values == before);
  CHECK(u.time == 0.0);
  CHECK(fpke_solve(s, drifts::ou(1.0), u, 0.0).snapshots.back().values == before);
}

TEST_CASE("free evolution matches the stable density", "[fpke]") {
  const double alpha = 0.9, t0 = 0.2, T = 1.2;
  const Grid1D g = make_grid(20.0, 0.05, alpha);
  const FpkeSolver s(g);
  DensityField u;
  u.time = t0;
  for (double x : g.nodes()) u.values.push_back(oracle::stable_density(x, t0, alpha));
  const DensityField uT = fpke_solve(s, drifts::zero(), u, T).snapshots.back();
  double l1 = 0.0;
  for (std::size_t j = 0; j < g.n; ++j) l1 += std::abs(uT.values[j] - oracle::stable_density(g.x(j), T, alpha)) * g.dx;
  CHECK(l1 <= 2e-2);
}

TEST_CASE("transport moves the mean", "[fpke]") {
  const Grid1D g = make_grid(10.0, 0.05, 0.8);
  const FpkeSolver s(g, false);
  const DensityField u0 = density_from_law(g, gaussian(0.0, 1.0));
  const double v = 0.7, T = 2.0;
  const DensityField uT = fpke_solve(s, drifts::constant(Vec::Constant(1, v)), u0, T).snapshots.back();
  CHECK(mean_of(g, uT) - mean_of(g, u0) == Approx(v * T).margin(1e-3));
  CHECK(uT.mass(g.dx) == Approx(1.0).margin(1e-9));
}

TEST_CASE("density W1 agrees with sorted samples", "[fpke]") {
  const Grid1D g = make_grid(15.0, 0.05, 0.8);
  const DensityField u = density_from_law(g, gaussian(0.0, 1.0));
  const DensityField v = density_from_law(g, gaussian(1.0, 1.5));
  const auto a = inverse_cdf_points(g, u, 20000);
  const auto b = inverse_cdf_points(g, v, 20000);
  const double grid_w1 = w1_density(g, u, v);
  CHECK(std::abs(grid_w1 - wasserstein_1d(a, b, 1.0).value) <= 2e-3);
  CHECK(std::abs(w1_density_sample(g, u, b) - grid_w1) <= 2e-3);
  CHECK(w1_density(g, u, u) == 0.0);
  CHECK(w1_density(g, u, v) == Approx(w1_density(g, v, u)).epsilon(1e-12));
}

TEST_CASE("mass plus leak is conserved, clipping stays negligible", "[fpke][property]") {
  for (double alpha : {0.6, 0.9}) {
    const Grid1D g = make_grid(10.0, 0.05, alpha);
    const FpkeSolver s(g);
    const DensityField u0 = density_from_law(g, gaussian(0.5, 0.3));
    for (const auto& d : {drifts::zero(), drifts::ou(1.0), drifts::meanfield_ou(1.0, 0.5)}) {
      const auto tr = fpke_solve(s, d, u0, 1.0, {0.25, 0.5, 0.75});
      for (const auto& u : tr.snapshots) {
        INFO(d.name << " alpha " << alpha << " t " << u.time);
        CHECK(u.mass(g.dx) + u.leaked == Approx(1.0).margin(1e-10));
        CHECK(u.clipped <= 1e-6);
        for (double v : u.values) REQUIRE(v >= 0.0);
      }
      CHECK(tr.snapshots.size() == 5);
    }
  }
}

TEST_CASE("drift CFL violation throws", "[fpke]") {
  const Grid1D g = make_grid(10.0, 0.1, 0.8);
  const FpkeSolver s(g, false);
  DensityField u = density_from_law(g, gaussian(0.0, 1.0));
  CHECK_THROWS_AS(s.step(u, drifts::constant(Vec::Constant(1, 100.0)), 0.01), PreconditionError);
  const FpkeSolver sj(g);
  CHECK_THROWS_AS(sj.step(u, drifts::zero(), 2.0 * g.dt), PreconditionError);
}

TEST_CASE("stability of the grid flow", "[fpke]") {
  const Grid1D g = make_grid(15.0, 0.05, 0.8);
  const FpkeSolver s(g);
  SECTION("equal initial laws") {
    const auto r = fpke_stability_check(s, drifts::meanfield_ou(1.0, 0.5), gaussian(1.0, 0.5), gaussian(1.0, 0.5), 1.0);
    for (double d : r.distances) CHECK(d == 0.0);
    CHECK(r.pass);
  }
  SECTION("translates under OU") {
    std::vector<double> err;
    for (double dx : {0.05, 0.025}) {
      const FpkeSolver sd(make_grid(15.0, dx, 0.8));
      const auto r = fpke_stability_check(sd, drifts::ou(1.0), gaussian(1.0, 0.5), gaussian(-1.0, 0.5), 2.0);
      CHECK(r.pass);
      CHECK(r.violations == 0);
      double worst = 0.0;
      for (std::size_t k = 0; k < r.times.size(); ++k)
        worst = std::max(worst, std::abs(r.distances[k] / (2.0 * std::exp(-r.times[k])) - 1.0));
      err.push_back(worst);
    }
    // first-order upwind transport
    CHECK(err[0] <= 0.06);
    CHECK(err[1] < 0.6 * err[0]);
  }
}

TEST_CASE("correspondence over a short horizon", "[fpke]") {
  CorrespondenceConfig c;
  c.replicates = 8;
  const auto r = correspondence_check(c, drifts::meanfield_ou(1.0, 0.5), gaussian(0.0, 1.0), 0.05, 1);
  REQUIRE(r.rows.size() == 3);
  for (const auto& row : r.rows) {
    CHECK(row.distance <= c.tolerance);
    CHECK(row.mass_error <= 1e-9);
    CHECK(row.leaked < 1e-3);
  }
}

TEST_CASE("fpke export", "[fpke]") {
  const Grid1D g = make_grid(2.0, 0.5, 0.8);
  const DensityField u = density_from_law(g, gaussian(0.0, 1.0));
  std::ostringstream os;
  write_csv(os, g, u);
  CHECK(os.str().rfind("x,u\n", 0) == 0);
  CHECK(to_json(g)["n"] == 8);
}
