#pragma once

#include "mkvlevy/levy_noise.hpp"
#include "mkvlevy/rng.hpp"
#include "mkvlevy/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mkvlevy {

inline constexpr double kOverflowGuard = 1e12;

/// Distribution-free drift b(t, x) with its one-sided Lipschitz modulus and a bound on |b(t,0)|.
struct DriftField {
  std::function<Vec(double, const Vec&)> b;
  std::function<double(double)> kappa;
  std::function<double(double)> b0_bound;
  std::string name;
};

DriftField zero_drift();
/// b(t,x) = -beta x; kappa = -2 beta.
DriftField linear_drift(double beta);

using SigmaFn = std::function<Mat(double)>;
SigmaFn constant_sigma(Mat sigma);
SigmaFn identity_sigma(int dim);

struct Path {
  TimeGrid grid;
  std::vector<Vec> states;
};

/// One explicit Euler step x + b dt + sigma dz; throws DivergenceError(step) on overflow.
Vec euler_update(const Vec& x, const Vec& bx, double dt, const Mat& sigma, const Vec& dz, std::size_t step);

Path euler_solve(const DriftField& drift, const SigmaFn& sigma, const NoiseIncrements& noise, const Vec& x0);
/// Same, after checking that the noise was generated on `grid`.
Path euler_solve(const DriftField& drift, const SigmaFn& sigma, const NoiseIncrements& noise, const Vec& x0,
                 const TimeGrid& grid);

/// paths x recorded steps x d, flattened; sup_norm holds max_k |X_k| over every step, recorded or not.
struct PathBundle {
  TimeGrid grid;  ///< recorded times
  int dim = 1;
  std::size_t n_paths = 0;
  std::vector<double> states;
  std::vector<double> sup_norm;
  std::uint64_t seed = 0;

  Vec state(std::size_t path, std::size_t step) const;
};

struct BundleOptions {
  std::size_t record_stride = 1;
  /// Paths [first_path, first_path + n) of the seed's stream family; lets a larger run reuse a smaller one.
  std::size_t first_path = 0;
};

/// Path p is driven by open_stream(model, path_rng(seed, p)).
Rng path_rng(std::uint64_t seed, std::size_t p);

PathBundle simulate_bundle(const DriftField& drift, const SigmaFn& sigma, const NoiseModel& model, const Vec& x0,
                           const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed,
                           const BundleOptions& options = {});

/// Monte Carlo E sup_{s<=T} |X_s|^theta. theta >= 1.
double sup_moment(const PathBundle& bundle, double theta);

struct SpotCheck {
  bool holds = true;
  int samples = 0;
  double worst_excess = 0.0;  ///< max of lhs - rhs over samples
};

/// 2<b(t,x)-b(t,y), x-y> <= kappa(t)|x-y|^2 + 1e-9 on random triples in [0,T] x box^2.
SpotCheck check_one_sided_lipschitz(const DriftField& drift, int dim, double box, double horizon, Rng& rng,
                                    int samples = 200);

void write_csv(std::ostream& out, const Path& path);
void write_csv(std::ostream& out, const PathBundle& bundle);

}  // namespace mkvlevy
