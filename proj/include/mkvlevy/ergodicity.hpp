#pragma once

#include "mkvlevy/drifts.hpp"
#include "mkvlevy/ensemble.hpp"
#include "mkvlevy/levy_noise.hpp"
#include "mkvlevy/mkv.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mkvlevy {

struct ContractionReport {
  std::vector<double> times;
  std::vector<double> distances;
  std::vector<double> ses;
  std::vector<double> bounds;
  double initial_distance = 0.0;
  double fitted_rate = 0.0;  ///< NaN when fewer than 3 usable checkpoints
  std::size_t fit_points = 0;
  double theory_rate = 0.0;  ///< -(1/2T) int_0^T (kappa1 + kappa2)
  int bound_violations = 0;
};

/// exp(1/2 int_0^t (kappa1 + kappa2))
double contraction_factor(const MkvDrift& drift, double t);

struct ContractionOptions {
  std::size_t checkpoints = 20;
  int bootstrap = 200;
};

/// Two particle systems from mu0 and nu0 driven by identical noise (and identical initial uniforms).
ContractionReport contraction_experiment(const MkvDrift& drift, const SigmaFn& sigma, const NoiseModel& noise,
                                         const InitialLaw& mu0, const InitialLaw& nu0, const TimeGrid& grid,
                                         std::size_t n, std::uint64_t seed, const ContractionOptions& options = {});

/// Least-squares slope of log(distance) against time, negated, over checkpoints with distance > 5 SE.
double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& distances,
                      const std::vector<double>& ses, std::size_t* used = nullptr);

struct InvariantLogEntry {
  double t = 0.0;  ///< compares mu_t with mu_{2t}
  double distance = 0.0;
  double se = 0.0;
};

struct InvariantResult {
  ParticleEnsemble ensemble;
  std::vector<InvariantLogEntry> log;
  bool converged = false;
};

/// Time-homogeneous drift and constant sigma; requires kappa = -(kappa1 + kappa2)/2 > 0.
InvariantResult invariant_measure(const MkvDrift& drift, const Mat& sigma, const NoiseModel& noise,
                                  const InitialLaw& start, double burn_in, double dt, std::size_t n,
                                  std::uint64_t seed, int bootstrap = 200);

struct FixedPointCheck {
  double distance = 0.0;
  double se = 0.0;
  bool pass = false;  ///< distance <= 3 SE
};

/// Re-evolves mu_hat for time t with fresh noise and compares.
FixedPointCheck fixed_point_check(const MkvDrift& drift, const Mat& sigma, const NoiseModel& noise,
                                  const ParticleEnsemble& mu_hat, double t, double dt, std::uint64_t seed,
                                  int bootstrap = 200);

struct AttractionReport {
  std::vector<double> times;
  std::vector<double> distances;
  std::vector<double> ses;
  std::vector<double> bounds;
  int bound_violations = 0;
};

/// W(P_t nu0, mu_hat) against exp(-kappa t) W(nu0, mu_hat).
AttractionReport attraction_check(const MkvDrift& drift, const Mat& sigma, const NoiseModel& noise,
                                  const InitialLaw& nu0, const ParticleEnsemble& mu_hat, double horizon, double dt,
                                  std::uint64_t seed, std::size_t checkpoints = 10, int bootstrap = 200);

void write_csv(std::ostream& out, const ContractionReport& report);
nlohmann::json to_json(const ContractionReport& report);

}  // namespace mkvlevy
