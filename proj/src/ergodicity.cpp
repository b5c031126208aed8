#include "mkvlevy/ergodicity.hpp"

#include "mkvlevy/metrics.hpp"
#include "mkvlevy/quadrature.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace mkvlevy {

double contraction_factor(const MkvDrift& drift, double t) {
  if (t <= 0.0) return 1.0;
  return std::exp(0.5 * simpson([&](double s) { return drift.kappa1(s) + drift.kappa2(s); }, 0.0, t));
}

double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& distances,
                      const std::vector<double>& ses, std::size_t* used) {
  std::vector<double> ts, ls;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (distances[i] > 5.0 * ses[i] && distances[i] > 0.0) {
      ts.push_back(times[i]);
      ls.push_back(std::log(distances[i]));
    }
  }
  if (used) *used = ts.size();
  if (ts.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(ts.size());
  double mt = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i];
    ml += ls[i];
  }
  mt /= n;
  ml /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    sxy += (ts[i] - mt) * (ls[i] - ml);
    sxx += (ts[i] - mt) * (ts[i] - mt);
  }
  return -sxy / sxx;
}

namespace {

bool violates(double distance, double se, double bound) {
  const double rel = distance > 0.0 ? se / distance : 0.0;
  return distance > bound * (1.0 + 3.0 * rel);
}

TimeGrid grid_to(double horizon, double dt) {
  const auto steps = static_cast<std::size_t>(std::llround(horizon / dt));
  return uniform_grid(horizon, std::max<std::size_t>(1, steps));
}

}  // namespace

ContractionReport contraction_experiment(const MkvDrift& drift, const SigmaFn& sigma, const NoiseModel& noise,
                                         const InitialLaw& mu0, const InitialLaw& nu0, const TimeGrid& grid,
                                         std::size_t n, std::uint64_t seed, const ContractionOptions& options) {
  require_valid_grid(grid);
  if (n == 0) throw PreconditionError("contraction_experiment: N must be positive");
  Rng ra = Rng::stream(seed, {tags::kInitial});
  Rng rb = Rng::stream(seed, {tags::kInitial});
  const ParticleEnsemble a0 = mu0.sample(n, ra);
  const ParticleEnsemble b0 = nu0.sample(n, rb);

  ContractionReport rep;
  rep.times.push_back(0.0);
  for (double t : thinned_checkpoints(grid, options.checkpoints)) rep.times.push_back(t);
  PropagateOptions popts;
  popts.snapshot_stride = 0;
  popts.checkpoint_times = rep.times;
  const LawFlow fa = propagate_particles(drift, sigma, a0, noise, grid, seed, popts);
  const LawFlow fb = propagate_particles(drift, sigma, b0, noise, grid, seed, popts);

  rep.initial_distance = wasserstein(a0, b0, drift.theta, seed).value;
  for (double t : rep.times) {
    const auto& ea = law_at(fa, t);
    const auto& eb = law_at(fb, t);
    rep.distances.push_back(wasserstein(ea, eb, drift.theta, seed).value);
    rep.ses.push_back(bootstrap_se(ea, eb, drift.theta, options.bootstrap, seed));
    rep.bounds.push_back(rep.initial_distance * contraction_factor(drift, t));
    if (violates(rep.distances.back(), rep.ses.back(), rep.bounds.back())) ++rep.bound_violations;
  }
  rep.fitted_rate = fit_decay_rate(rep.times, rep.distances, rep.ses, &rep.fit_points);
  const double horizon = grid.back();
  rep.theory_rate = -std::log(contraction_factor(drift, horizon)) / horizon;
  return rep;
}

InvariantResult invariant_measure(const MkvDrift& drift, const Mat& sigma, const NoiseModel& noise,
                                  const InitialLaw& start, double burn_in, double dt, std::size_t n,
                                  std::uint64_t seed, int bootstrap) {
  if (!drift.time_homogeneous) throw PreconditionError("invariant_measure: drift must be time-homogeneous");
  const double kappa = -0.5 * (drift.kappa1(0.0) + drift.kappa2(0.0));
  if (!(kappa > 0.0)) throw PreconditionError("invariant_measure: needs kappa = -(kappa1 + kappa2)/2 > 0");
  if (!(burn_in > 0.0) || !(dt > 0.0) || dt > burn_in) throw PreconditionError("invariant_measure: bad burn-in or step");
  if (n == 0) throw PreconditionError("invariant_measure: N must be positive");

  const TimeGrid grid = grid_to(burn_in, dt);
  std::vector<double> cps;
  for (double t = burn_in; t >= std::max(4.0 * dt, 1e-12); t *= 0.5) cps.insert(cps.begin(), t);
  Rng r0 = Rng::stream(seed, {tags::kInitial});
  const ParticleEnsemble e0 = start.sample(n, r0);
  PropagateOptions opts;
  opts.snapshot_stride = 0;
  opts.checkpoint_times = cps;
  const LawFlow flow = propagate_particles(drift, constant_sigma(sigma), e0, noise, grid, seed, opts);

  InvariantResult res;
  int calm = 0;
  for (std::size_t j = 0; j + 1 < cps.size(); ++j) {
    const auto& x = law_at(flow, cps[j]);
    const auto& y = law_at(flow, cps[j + 1]);
    InvariantLogEntry e{cps[j], wasserstein(x, y, drift.theta, seed).value, bootstrap_se(x, y, drift.theta, bootstrap, seed)};
    res.log.push_back(e);
    calm = e.distance < std::max(1e-3, 3.0 * e.se) ? calm + 1 : 0;
    if (calm >= 2) res.converged = true;
  }
  res.ensemble = flow.terminal();
  return res;
}

FixedPointCheck fixed_point_check(const MkvDrift& drift, const Mat& sigma, const NoiseModel& noise,
                                  const ParticleEnsemble& mu_hat, double t, double dt, std::uint64_t seed,
                                  int bootstrap) {
  const TimeGrid grid = grid_to(t, dt);
  PropagateOptions opts;
  opts.snapshot_stride = 0;
  const LawFlow flow = propagate_particles(drift, constant_sigma(sigma), mu_hat, noise, grid, seed, opts);
  FixedPointCheck out;
  out.distance = wasserstein(mu_hat, flow.terminal(), drift.theta, seed).value;
  out.se = bootstrap_se(mu_hat, flow.terminal(), drift.theta, bootstrap, seed);
  out.pass = out.distance <= 3.0 * out.se;
  return out;
}

AttractionReport attraction_check(const MkvDrift& drift, const Mat& sigma, const NoiseModel& noise,
                                  const InitialLaw& nu0, const ParticleEnsemble& mu_hat, double horizon, double dt,
                                  std::uint64_t seed, std::size_t checkpoints, int bootstrap) {
  const double kappa = -0.5 * (drift.kappa1(0.0) + drift.kappa2(0.0));
  const TimeGrid grid = grid_to(horizon, dt);
  Rng r0 = Rng::stream(seed, {tags::kInitial});
  const ParticleEnsemble e0 = nu0.sample(mu_hat.size(), r0);
  AttractionReport rep;
  rep.times = thinned_checkpoints(grid, checkpoints);
  PropagateOptions opts;
  opts.snapshot_stride = 0;
  opts.checkpoint_times = rep.times;
  const LawFlow flow = propagate_particles(drift, constant_sigma(sigma), e0, noise, grid, seed, opts);
  const double w0 = wasserstein(e0, mu_hat, drift.theta, seed).value;
  for (double t : rep.times) {
    const auto& e = law_at(flow, t);
    rep.distances.push_back(wasserstein(e, mu_hat, drift.theta, seed).value);
    rep.ses.push_back(bootstrap_se(e, mu_hat, drift.theta, bootstrap, seed));
    rep.bounds.push_back(std::exp(-kappa * t) * w0);
    if (violates(rep.distances.back(), rep.ses.back(), rep.bounds.back())) ++rep.bound_violations;
  }
  return rep;
}

void write_csv(std::ostream& out, const ContractionReport& r) {
  out << "t,distance,se,bound\n";
  out.precision(17);
  for (std::size_t i = 0; i < r.times.size(); ++i)
    out << r.times[i] << ',' << r.distances[i] << ',' << r.ses[i] << ',' << r.bounds[i] << '\n';
}

nlohmann::json to_json(const ContractionReport& r) {
  nlohmann::json j;
  j["times"] = r.times;
  j["distances"] = r.distances;
  j["ses"] = r.ses;
  j["bounds"] = r.bounds;
  j["initial_distance"] = r.initial_distance;
  j["fitted_rate"] = std::isfinite(r.fitted_rate) ? nlohmann::json(r.fitted_rate) : nlohmann::json(nullptr);
  j["fit_points"] = r.fit_points;
  j["theory_rate"] = r.theory_rate;
  j["bound_violations"] = r.bound_violations;
  return j;
}

}  // namespace mkvlevy
