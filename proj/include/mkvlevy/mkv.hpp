#pragma once

#include "mkvlevy/drifts.hpp"
#include "mkvlevy/ensemble.hpp"
#include "mkvlevy/levy_noise.hpp"
#include "mkvlevy/sde_core.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mkvlevy {

/// t -> mu_t. Moments exist on every grid step; full ensembles only at snapshot steps.
struct LawFlow {
  TimeGrid grid;
  int dim = 1;
  double theta = 1.0;
  std::vector<LawMoments> moments;
  std::vector<std::size_t> snapshot_steps;  ///< increasing
  std::vector<ParticleEnsemble> snapshots;

  const ParticleEnsemble& terminal() const;
};

/// Grid step holding time t (left neighbour between nodes). t < 0 throws DomainError.
std::size_t step_at(const TimeGrid& grid, double t);

/// Ensemble at t: the latest snapshot at or before step_at(grid, t).
const ParticleEnsemble& law_at(const LawFlow& flow, double t);

struct PropagateOptions {
  /// Every k-th step is kept as a snapshot; 0 keeps only the first, last and checkpoint steps.
  std::size_t snapshot_stride = 1;
  std::vector<double> checkpoint_times;
};

/// Stream family for particle i; particle i is driven by open_stream(model, particle_rng(seed, i)).
Rng particle_rng(std::uint64_t seed, std::size_t i);

/// Interacting Euler system: X^i += b(t_k, X^i, mu_k) dt + sigma(t_k) dZ^i with mu_k the current ensemble.
LawFlow propagate_particles(const MkvDrift& drift, const SigmaFn& sigma, const ParticleEnsemble& mu0,
                            const NoiseModel& noise, const TimeGrid& grid, std::uint64_t seed,
                            const PropagateOptions& options = {});

/// Flow that stays at mu0 for all times (the Picard starting point).
LawFlow constant_flow(const ParticleEnsemble& mu0, const TimeGrid& grid, double theta);

/// One Picard step: N independent particles with the drift frozen along `frozen`. Same seed means
/// the same noise on every iterate.
LawFlow picard_iterate(const MkvDrift& drift, const SigmaFn& sigma, const LawFlow& frozen, const ParticleEnsemble& mu0,
                       const NoiseModel& noise, const TimeGrid& grid, std::uint64_t seed,
                       const PropagateOptions& options = {});

struct PicardLog {
  std::vector<double> checkpoint_times;
  std::vector<double> sup_distances;  ///< entry n: sup_t W_theta(mu^(n+1)_t, mu^(n)_t)
};

struct PicardResult {
  LawFlow flow;
  PicardLog log;
  bool converged = false;
};

/// Shape of the Picard decay sequence.
struct PicardDecay {
  std::size_t decreasing_prefix = 0;  ///< length of the strictly decreasing initial run of sup_distances
  std::size_t fit_points = 0;
  double slope = 0.0;  ///< least squares of log d_n against n over the positive entries of that run
  double r2 = 0.0;
};

PicardDecay picard_decay(const PicardLog& log);

/// Up to `count` checkpoint times spread evenly over the grid, always including the horizon.
std::vector<double> thinned_checkpoints(const TimeGrid& grid, std::size_t count = 20);

PicardResult picard_solve(const MkvDrift& drift, const SigmaFn& sigma, const ParticleEnsemble& mu0,
                          const NoiseModel& noise, const TimeGrid& grid, std::uint64_t seed, double tol, int max_iter,
                          std::size_t checkpoints = 20);

/// CSV per snapshot: step,t,particle,x_1..x_d
void write_csv(std::ostream& out, const LawFlow& flow);
nlohmann::json summary_json(const LawFlow& flow);

}  // namespace mkvlevy
