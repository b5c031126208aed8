#include <catch2/catch_amalgamated.hpp>

#include "mkvlevy/ergodicity.hpp"

#include <cmath>
#include <sstream>

using namespace mkvlevy;
using Catch::Approx;

namespace {

InitialLaw at(double x) { return InitialLaw::point_mass(Vec::Constant(1, x)); }
InitialLaw gauss(double m, double s) { return InitialLaw::gaussian(Vec::Constant(1, m), s); }

const NoiseModel kBrownian(LevyTriplet::brownian(1));
const NoiseModel kStable(LevyTriplet::subordinate(1, BernsteinSpec::stable(0.75)));

}  // namespace

TEST_CASE("contraction factor", "[ergodicity]") {
  CHECK(contraction_factor(drifts::meanfield_ou(1.0, 0.5), 2.0) == Approx(std::exp(-1.0)));
  CHECK(contraction_factor(drifts::ou(1.0), 1.0) == Approx(std::exp(-1.0)));
  CHECK(contraction_factor(drifts::zero(), 3.0) == Approx(1.0));
}

TEST_CASE("identical systems stay together", "[ergodicity]") {
  const ContractionReport r = contraction_experiment(drifts::meanfield_ou(1.0, 0.5), identity_sigma(1), kStable,
                                                     gauss(0, 1), gauss(0, 1), uniform_grid(1.0, 100), 500, 3);
  for (double d : r.distances) CHECK(d == 0.0);
  CHECK(r.bound_violations == 0);
}

TEST_CASE("mean-field OU contracts at rate 1/2", "[ergodicity]") {
  const ContractionReport r = contraction_experiment(drifts::meanfield_ou(1.0, 0.5), identity_sigma(1), kBrownian,
                                                     at(0.0), at(2.0), uniform_grid(4.0, 400), 5000, 5);
  CHECK(r.bound_violations == 0);
  CHECK(r.theory_rate == Approx(0.5));
  CHECK(r.fitted_rate >= 0.45);
  CHECK(r.fitted_rate <= 0.55);
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    const double exact = 2.0 * std::exp(-0.5 * r.times[i]);
    CHECK(std::abs(r.distances[i] - exact) <= std::max(0.05 * exact, 3 * r.ses[i]));
  }
}

TEST_CASE("law-free contraction bound", "[ergodicity]") {
  const ContractionReport r = contraction_experiment(drifts::ou(1.0), identity_sigma(1), kStable, gauss(1, 0.5),
                                                     gauss(-1, 1.0), uniform_grid(3.0, 300), 2000, 6);
  CHECK(r.bound_violations == 0);
  for (std::size_t i = 0; i < r.times.size(); ++i) CHECK(r.bounds[i] == Approx(std::exp(-r.times[i]) * r.initial_distance));
}

TEST_CASE("no violations across master seeds", "[ergodicity][property]") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const ContractionReport r = contraction_experiment(drifts::meanfield_ou(1.0, 0.5), identity_sigma(1), kStable,
                                                       gauss(2, 0.5), gauss(-2, 0.5), uniform_grid(4.0, 200), 1000, seed);
    CHECK(r.bound_violations == 0);
  }
}

TEST_CASE("rate fit on exact exponentials", "[ergodicity]") {
  std::vector<double> t, d, se;
  for (int i = 0; i <= 10; ++i) {
    t.push_back(0.4 * i);
    d.push_back(3.0 * std::exp(-0.7 * t.back()));
    se.push_back(1e-6);
  }
  std::size_t used = 0;
  CHECK(fit_decay_rate(t, d, se, &used) == Approx(0.7));
  CHECK(used == 11);
  se.assign(se.size(), 1.0);  // nothing above 5 SE
  CHECK(std::isnan(fit_decay_rate(t, d, se)));
}

TEST_CASE("OU invariant measure", "[ergodicity]") {
  const Mat sigma = Mat::Identity(1, 1);
  const InvariantResult inv = invariant_measure(drifts::ou(1.0), sigma, kBrownian, at(3.0), 10.0, 0.01, 10000, 7);
  const auto x = inv.ensemble.coordinate(0);
  double m = 0, v = 0;
  for (double a : x) m += a / x.size();
  for (double a : x) v += (a - m) * (a - m) / (x.size() - 1);
  CHECK(v >= 0.45);
  CHECK(v <= 0.55);
  CHECK_FALSE(inv.log.empty());
  const FixedPointCheck fp = fixed_point_check(drifts::ou(1.0), sigma, kBrownian, inv.ensemble, 1.0, 0.01, 8);
  CHECK(fp.distance <= 3 * fp.se);
  CHECK(fp.pass);
  const AttractionReport at_rep = attraction_check(drifts::ou(1.0), sigma, kBrownian, gauss(2.0, 0.3), inv.ensemble,
                                                   2.0, 0.01, 9);
  CHECK(at_rep.bound_violations == 0);
}

TEST_CASE("invariant measure preconditions", "[ergodicity]") {
  const Mat sigma = Mat::Identity(1, 1);
  CHECK_THROWS_AS(invariant_measure(drifts::zero(), sigma, kBrownian, at(0), 1.0, 0.1, 10, 1), PreconditionError);
  MkvDrift moving = drifts::ou(1.0);
  moving.time_homogeneous = false;
  CHECK_THROWS_AS(invariant_measure(moving, sigma, kBrownian, at(0), 1.0, 0.1, 10, 1), PreconditionError);
}

TEST_CASE("contraction report export", "[ergodicity]") {
  const ContractionReport r = contraction_experiment(drifts::ou(1.0), identity_sigma(1), kBrownian, at(0), at(1),
                                                     uniform_grid(1.0, 10), 200, 1, ContractionOptions{5, 100});
  std::ostringstream os;
  write_csv(os, r);
  CHECK(os.str().rfind("t,distance,se,bound\n", 0) == 0);
  CHECK(to_json(r).contains("fitted_rate"));
}
