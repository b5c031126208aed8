#include "mkvlevy/sde_core.hpp"

#include "mkvlevy/parallel.hpp"

#include <cmath>
#include <ostream>

namespace mkvlevy {

DriftField zero_drift() {
  return {[](double, const Vec& x) { return Vec(Vec::Zero(x.size())); }, [](double) { return 0.0; },
          [](double) { return 0.0; }, "zero"};
}

DriftField linear_drift(double beta) {
  return {[beta](double, const Vec& x) { return Vec(-beta * x); }, [beta](double) { return -2.0 * beta; },
          [](double) { return 0.0; }, "linear"};
}

SigmaFn constant_sigma(Mat sigma) {
  return [s = std::move(sigma)](double) { return s; };
}

SigmaFn identity_sigma(int dim) { return constant_sigma(Mat::Identity(dim, dim)); }

Vec euler_update(const Vec& x, const Vec& bx, double dt, const Mat& sigma, const Vec& dz, std::size_t step) {
  Vec next = x + bx * dt + sigma * dz;
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kOverflowGuard) {
    throw DivergenceError("Euler state left the finite range at step " + std::to_string(step), step);
  }
  return next;
}

Path euler_solve(const DriftField& drift, const SigmaFn& sigma, const NoiseIncrements& noise, const Vec& x0) {
  if (noise.dZ.size() + 1 != noise.grid.size()) throw PreconditionError("noise increments do not match their grid");
  if (noise.dim != x0.size()) throw PreconditionError("noise dimension differs from the state dimension");
  Path out;
  out.grid = noise.grid;
  out.states.reserve(noise.grid.size());
  out.states.push_back(x0);
  for (std::size_t k = 0; k + 1 < noise.grid.size(); ++k) {
    const double t = noise.grid[k];
    const Vec& x = out.states.back();
    out.states.push_back(euler_update(x, drift.b(t, x), noise.grid[k + 1] - t, sigma(t), noise.dZ[k], k));
  }
  return out;
}

Path euler_solve(const DriftField& drift, const SigmaFn& sigma, const NoiseIncrements& noise, const Vec& x0,
                 const TimeGrid& grid) {
  if (grid.size() != noise.grid.size()) throw PreconditionError("noise grid differs from the requested grid");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(grid[k] - noise.grid[k]) > 1e-12 * (1.0 + std::abs(grid[k]))) {
      throw PreconditionError("noise grid differs from the requested grid");
    }
  }
  return euler_solve(drift, sigma, noise, x0);
}

Vec PathBundle::state(std::size_t path, std::size_t step) const {
  const std::size_t off = (path * grid.size() + step) * static_cast<std::size_t>(dim);
  return Eigen::Map<const Eigen::VectorXd>(states.data() + off, dim);
}

Rng path_rng(std::uint64_t seed, std::size_t p) { return Rng::stream(seed, {tags::kPath, static_cast<std::uint64_t>(p)}); }

PathBundle simulate_bundle(const DriftField& drift, const SigmaFn& sigma, const NoiseModel& model, const Vec& x0,
                           const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed, const BundleOptions& options) {
  require_valid_grid(grid);
  if (model.dim() != x0.size()) throw PreconditionError("noise dimension differs from the state dimension");
  if (options.record_stride == 0) throw PreconditionError("record_stride must be positive");
  const std::size_t steps = grid.size() - 1;
  PathBundle out;
  out.dim = static_cast<int>(x0.size());
  out.n_paths = n_paths;
  out.seed = seed;
  std::vector<std::size_t> recorded;
  for (std::size_t k = 0; k <= steps; k += options.record_stride) recorded.push_back(k);
  if (recorded.back() != steps) recorded.push_back(steps);
  for (auto k : recorded) out.grid.push_back(grid[k]);
  const std::size_t row = recorded.size() * out.dim;
  out.states.assign(n_paths * row, 0.0);
  out.sup_norm.assign(n_paths, 0.0);

  parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng r = path_rng(seed, options.first_path + p);
      IncrementStream noise = open_stream(model, r);
      Vec x = x0;
      double sup = x.norm();
      double* dst = out.states.data() + p * row;
      std::size_t next_rec = 0;
      for (std::size_t k = 0; k <= steps; ++k) {
        if (next_rec < recorded.size() && recorded[next_rec] == k) {
          for (int j = 0; j < out.dim; ++j) dst[next_rec * out.dim + j] = x[j];
          ++next_rec;
        }
        if (k == steps) break;
        const double t = grid[k];
        const double dt = grid[k + 1] - t;
        const Vec dz = noise.next(t, dt);
        x = euler_update(x, drift.b(t, x), dt, sigma(t), dz, k);
        sup = std::max(sup, x.norm());
      }
      out.sup_norm[p] = sup;
    }
  }, 16);
  return out;
}

double sup_moment(const PathBundle& bundle, double theta) {
  if (!(theta >= 1.0)) throw PreconditionError("sup_moment: theta must be >= 1");
  if (bundle.n_paths == 0) return 0.0;
  double s = 0.0;
  for (std::size_t p = 0; p < bundle.n_paths; ++p) {
    double sup;
    if (!bundle.sup_norm.empty()) {
      sup = bundle.sup_norm[p];
    } else {
      sup = 0.0;
      for (std::size_t k = 0; k < bundle.grid.size(); ++k) sup = std::max(sup, bundle.state(p, k).norm());
    }
    s += std::pow(sup, theta);
  }
  return s / static_cast<double>(bundle.n_paths);
}

SpotCheck check_one_sided_lipschitz(const DriftField& drift, int dim, double box, double horizon, Rng& rng, int samples) {
  SpotCheck out;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const double t = horizon * rng.uniform();
    Vec x(dim), y(dim);
    for (int k = 0; k < dim; ++k) {
      x[k] = box * (2.0 * rng.uniform() - 1.0);
      y[k] = box * (2.0 * rng.uniform() - 1.0);
    }
    const double lhs = 2.0 * (drift.b(t, x) - drift.b(t, y)).dot(x - y);
    const double rhs = drift.kappa(t) * (x - y).squaredNorm();
    out.worst_excess = std::max(out.worst_excess, lhs - rhs);
    if (lhs > rhs + 1e-9) out.holds = false;
    ++out.samples;
  }
  return out;
}

void write_csv(std::ostream& out, const Path& path) {
  const int d = path.states.empty() ? 0 : static_cast<int>(path.states.front().size());
  out << "t";
  for (int k = 0; k < d; ++k) out << ",x_" << (k + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < path.states.size(); ++i) {
    out << path.grid[i];
    for (int k = 0; k < d; ++k) out << ',' << path.states[i][k];
    out << '\n';
  }
}

void write_csv(std::ostream& out, const PathBundle& bundle) {
  out << "path,t";
  for (int k = 0; k < bundle.dim; ++k) out << ",x_" << (k + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t p = 0; p < bundle.n_paths; ++p) {
    for (std::size_t i = 0; i < bundle.grid.size(); ++i) {
      out << p << ',' << bundle.grid[i];
      const Vec x = bundle.state(p, i);
      for (int k = 0; k < bundle.dim; ++k) out << ',' << x[k];
      out << '\n';
    }
  }
}

}  // namespace mkvlevy
