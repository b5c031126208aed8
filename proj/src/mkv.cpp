#include "mkvlevy/mkv.hpp"

#include "mkvlevy/metrics.hpp"
#include "mkvlevy/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mkvlevy {

const ParticleEnsemble& LawFlow::terminal() const {
  if (snapshots.empty()) throw PreconditionError("law flow holds no snapshots");
  return snapshots.back();
}

std::size_t step_at(const TimeGrid& grid, double t) {
  if (t < 0.0) throw DomainError("law lookup at negative time");
  if (grid.empty()) throw PreconditionError("empty grid");
  const double slack = 1e-12 * std::max(1.0, std::abs(grid.back()));
  const auto it = std::upper_bound(grid.begin(), grid.end(), t + slack);
  return static_cast<std::size_t>(std::distance(grid.begin(), it)) - 1;
}

const ParticleEnsemble& law_at(const LawFlow& flow, double t) {
  const std::size_t k = step_at(flow.grid, t);
  const auto it = std::upper_bound(flow.snapshot_steps.begin(), flow.snapshot_steps.end(), k);
  if (it == flow.snapshot_steps.begin()) throw PreconditionError("law flow holds no snapshot at or before t");
  return flow.snapshots[std::distance(flow.snapshot_steps.begin(), it) - 1];
}

Rng particle_rng(std::uint64_t seed, std::size_t i) {
  return Rng::stream(seed, {tags::kParticle, static_cast<std::uint64_t>(i)});
}

namespace {

std::vector<char> snapshot_mask(const TimeGrid& grid, const PropagateOptions& options) {
  const std::size_t steps = grid.size() - 1;
  std::vector<char> keep(grid.size(), 0);
  keep.front() = keep.back() = 1;
  if (options.snapshot_stride > 0)
    for (std::size_t k = 0; k <= steps; k += options.snapshot_stride) keep[k] = 1;
  for (double t : options.checkpoint_times) keep[step_at(grid, t)] = 1;
  return keep;
}

std::vector<IncrementStream> open_streams(const NoiseModel& noise, std::size_t n, std::uint64_t seed) {
  std::vector<IncrementStream> streams;
  streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng r = particle_rng(seed, i);
    streams.push_back(open_stream(noise, r));
  }
  return streams;
}

void check_inputs(const MkvDrift& drift, const ParticleEnsemble& mu0, const NoiseModel& noise, const TimeGrid& grid) {
  require_valid_grid(grid);
  require_valid(mu0);
  if (noise.dim() != mu0.dim) throw PreconditionError("noise dimension differs from the ensemble dimension");
  if (!drift.b) throw PreconditionError("drift has no coefficient function");
}

// Shared stepping loop. `law_for_step` returns the view the drift sees at step k.
template <class LawForStep>
LawFlow evolve(const MkvDrift& drift, const SigmaFn& sigma, const ParticleEnsemble& mu0, const NoiseModel& noise,
               const TimeGrid& grid, std::uint64_t seed, const PropagateOptions& options, LawForStep&& law_for_step) {
  check_inputs(drift, mu0, noise, grid);
  const std::size_t n = mu0.size();
  const auto keep = snapshot_mask(grid, options);
  auto streams = open_streams(noise, n, seed);

  LawFlow flow;
  flow.grid = grid;
  flow.dim = mu0.dim;
  flow.theta = drift.theta;
  flow.moments.reserve(grid.size());

  ParticleEnsemble cur = mu0;
  ParticleEnsemble next = mu0;
  for (std::size_t k = 0;; ++k) {
    flow.moments.push_back(moments_of(cur, drift.theta));
    if (keep[k]) {
      flow.snapshot_steps.push_back(k);
      flow.snapshots.push_back(cur);
    }
    if (k + 1 == grid.size()) break;
    const double t = grid[k];
    const double dt = grid[k + 1] - t;
    const Mat s = sigma(t);
    const LawView view = law_for_step(k, cur, flow.moments.back());
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const Vec& x = cur.points[i];
        next.points[i] = euler_update(x, drift.b(t, x, view), dt, s, streams[i].next(t, dt), k);
      }
    });
    std::swap(cur.points, next.points);
  }
  return flow;
}

}  // namespace

LawFlow propagate_particles(const MkvDrift& drift, const SigmaFn& sigma, const ParticleEnsemble& mu0,
                            const NoiseModel& noise, const TimeGrid& grid, std::uint64_t seed,
                            const PropagateOptions& options) {
  return evolve(drift, sigma, mu0, noise, grid, seed, options,
                [](std::size_t, const ParticleEnsemble& cur, const LawMoments& m) { return LawView{&m, cur.points}; });
}

LawFlow constant_flow(const ParticleEnsemble& mu0, const TimeGrid& grid, double theta) {
  require_valid_grid(grid);
  LawFlow flow;
  flow.grid = grid;
  flow.dim = mu0.dim;
  flow.theta = theta;
  flow.moments.assign(grid.size(), moments_of(mu0, theta));
  flow.snapshot_steps = {0};
  flow.snapshots = {mu0};
  return flow;
}

LawFlow picard_iterate(const MkvDrift& drift, const SigmaFn& sigma, const LawFlow& frozen, const ParticleEnsemble& mu0,
                       const NoiseModel& noise, const TimeGrid& grid, std::uint64_t seed,
                       const PropagateOptions& options) {
  if (frozen.grid.size() != grid.size() || frozen.moments.size() != grid.size()) {
    throw PreconditionError("frozen flow is not defined on the requested grid");
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(frozen.grid[k] - grid[k]) > 1e-12 * (1.0 + std::abs(grid[k]))) {
      throw PreconditionError("frozen flow is not defined on the requested grid");
    }
  }
  return evolve(drift, sigma, mu0, noise, grid, seed, options,
                [&frozen](std::size_t k, const ParticleEnsemble&, const LawMoments&) {
                  const auto it = std::find(frozen.snapshot_steps.begin(), frozen.snapshot_steps.end(), k);
                  std::span<const Vec> pts;
                  if (it != frozen.snapshot_steps.end()) pts = frozen.snapshots[std::distance(frozen.snapshot_steps.begin(), it)].points;
                  return LawView{&frozen.moments[k], pts};
                });
}

std::vector<double> thinned_checkpoints(const TimeGrid& grid, std::size_t count) {
  require_valid_grid(grid);
  const std::size_t steps = grid.size() - 1;
  count = std::max<std::size_t>(1, std::min(count, steps));
  std::vector<double> out;
  for (std::size_t j = 1; j <= count; ++j) out.push_back(grid[(j * steps) / count]);
  return out;
}

PicardResult picard_solve(const MkvDrift& drift, const SigmaFn& sigma, const ParticleEnsemble& mu0,
                          const NoiseModel& noise, const TimeGrid& grid, std::uint64_t seed, double tol, int max_iter,
                          std::size_t checkpoints) {
  if (!(tol > 0.0)) throw PreconditionError("picard_solve: tol must be positive");
  if (max_iter < 1) throw PreconditionError("picard_solve: max_iter must be at least 1");
  PicardResult res;
  res.log.checkpoint_times = thinned_checkpoints(grid, checkpoints);
  PropagateOptions opts;
  opts.snapshot_stride = 0;
  opts.checkpoint_times = res.log.checkpoint_times;

  LawFlow prev = constant_flow(mu0, grid, drift.theta);
  for (int n = 1; n <= max_iter; ++n) {
    LawFlow cur = picard_iterate(drift, sigma, prev, mu0, noise, grid, seed, opts);
    double sup = 0.0;
    for (double t : res.log.checkpoint_times) {
      sup = std::max(sup, wasserstein(law_at(cur, t), law_at(prev, t), drift.theta, seed).value);
    }
    res.log.sup_distances.push_back(sup);
    prev = std::move(cur);
    if (sup < tol) {
      res.converged = true;
      break;
    }
  }
  res.flow = std::move(prev);
  return res;
}

PicardDecay picard_decay(const PicardLog& log) {
  PicardDecay d;
  const auto& v = log.sup_distances;
  if (v.empty()) return d;
  d.decreasing_prefix = 1;
  while (d.decreasing_prefix < v.size() && v[d.decreasing_prefix] < v[d.decreasing_prefix - 1]) ++d.decreasing_prefix;
  std::vector<double> xs, ys;
  for (std::size_t n = 0; n < d.decreasing_prefix; ++n) {
    if (!(v[n] > 0.0)) break;
    xs.push_back(static_cast<double>(n + 1));
    ys.push_back(std::log(v[n]));
  }
  d.fit_points = xs.size();
  if (xs.size() < 2) return d;
  const double k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / k;
    my += ys[i] / k;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  d.slope = sxy / sxx;
  d.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return d;
}

void write_csv(std::ostream& out, const LawFlow& flow) {
  out << "step,t,particle";
  for (int k = 0; k < flow.dim; ++k) out << ",x_" << (k + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t s = 0; s < flow.snapshots.size(); ++s) {
    const std::size_t step = flow.snapshot_steps[s];
    for (std::size_t i = 0; i < flow.snapshots[s].size(); ++i) {
      out << step << ',' << flow.grid[step] << ',' << i;
      for (int k = 0; k < flow.dim; ++k) out << ',' << flow.snapshots[s].points[i][k];
      out << '\n';
    }
  }
}

nlohmann::json summary_json(const LawFlow& flow) {
  nlohmann::json j;
  j["dim"] = flow.dim;
  j["theta"] = flow.theta;
  j["steps"] = flow.grid.size() - 1;
  nlohmann::json cps = nlohmann::json::array();
  for (std::size_t s = 0; s < flow.snapshots.size(); ++s) {
    const auto& m = flow.moments[flow.snapshot_steps[s]];
    cps.push_back({{"t", flow.grid[flow.snapshot_steps[s]]},
                   {"mean", std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size())},
                   {"theta_moment", m.theta_moment},
                   {"second_moment", m.second_moment}});
  }
  j["checkpoints"] = cps;
  return j;
}

}  // namespace mkvlevy
