#pragma once

#include "mkvlevy/rng.hpp"
#include "mkvlevy/subordinator.hpp"
#include "mkvlevy/types.hpp"

#include <json.hpp>

#include <complex>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace mkvlevy {

namespace jumps {

struct None {};

/// Z_t = W_{S_t}: Brownian motion time-changed by an independent subordinator.
struct SubordinateGaussian {
  BernsteinSpec subordinator;
};

/// Jumps described by a Levy density. Jumps of size >= cutoff are drawn exactly from a compound
/// Poisson scheme, the compensated sum of the smaller ones is replaced by a Gaussian with the
/// same covariance.
struct CompoundWithDensity {
  std::function<double(const Vec&)> levy_density;
  double small_jump_cutoff = 1e-2;
  /// nu({|x| >= cutoff})
  double large_jump_rate = 0.0;
  /// Draws from nu restricted to {|x| >= cutoff}, normalized.
  std::function<Vec(Rng&)> large_jump_sampler;
  /// int_{|x| < cutoff} |x|^2 nu(dx); split evenly over the coordinates.
  double small_jump_second_moment = 0.0;
  /// int_{cutoff <= |x| < 1} x nu(dx), removed as drift to honour the 1_{(0,1)}(|x|) compensation.
  Vec mid_jump_compensator;
  /// Value of int (1 ^ |x|^2) nu(dx); must be finite.
  double integrability_witness = 0.0;
  std::string name;
  nlohmann::json params;
};

/// Isotropic nu(dx) with radial part c r^{-1-beta} dr, beta in (0,2) and uniform direction.
CompoundWithDensity isotropic_power_law(int dim, double c, double beta, double cutoff);

}  // namespace jumps

struct LevyTriplet {
  Vec drift;
  Mat covariance;
  std::variant<jumps::None, jumps::SubordinateGaussian, jumps::CompoundWithDensity> jumps;

  int dim() const noexcept { return static_cast<int>(drift.size()); }

  static LevyTriplet brownian(int dim);
  static LevyTriplet deterministic(const Vec& drift);
  static LevyTriplet subordinate(int dim, BernsteinSpec subordinator);
};

/// Checks shapes, symmetrizes Q, clamps eigenvalues in [-1e-12, 0) to zero and verifies the
/// integrability witness. Throws PreconditionError.
LevyTriplet validated(LevyTriplet triplet);

/// Characteristic exponent psi(u) with E exp(i<u, Z_t>) = exp(-t psi(u)). Not available in closed
/// form for CompoundWithDensity.
std::complex<double> characteristic_exponent(const LevyTriplet& triplet, const Vec& u);

struct LargeJump {
  double time;
  Vec jump;
};

struct NoiseIncrements {
  TimeGrid grid;
  std::vector<Vec> dZ;  ///< one per interval
  std::vector<LargeJump> large_jumps;
  int dim = 0;
};

/// Per-path increment generator. Brownian, subordinator, jump and covariance parts draw from
/// distinct child streams of the supplied generator.
class IncrementStream {
 public:
  IncrementStream(std::shared_ptr<const LevyTriplet> triplet, std::shared_ptr<const SubordinatorIncrementSampler> sub,
                  const Rng& base);

  /// Increment over [t, t + dt]. Jumps with |x| >= 1 are appended to `large` when given.
  Vec next(double t, double dt, std::vector<LargeJump>* large = nullptr);

  /// Subordinator increment drawn by the most recent call (SubordinateGaussian only).
  double last_time_change() const noexcept { return last_dl_; }

 private:
  std::shared_ptr<const LevyTriplet> triplet_;
  std::shared_ptr<const SubordinatorIncrementSampler> sub_;
  Mat sqrt_cov_;
  bool has_cov_;
  Rng brownian_;
  Rng subordinator_;
  Rng jumps_;
  Rng covariance_;
  double last_dl_ = 0.0;
};

/// Shared, immutable noise description from which per-path streams are spawned.
class NoiseModel {
 public:
  explicit NoiseModel(LevyTriplet triplet, SamplerOptions sampler_options = {});
  IncrementStream stream(const Rng& base) const;
  const LevyTriplet& triplet() const noexcept { return *triplet_; }
  int dim() const noexcept { return triplet_->dim(); }

 private:
  std::shared_ptr<const LevyTriplet> triplet_;
  std::shared_ptr<const SubordinatorIncrementSampler> sub_;
};

/// Levy-Ito increments on a uniform grid.
/// Opens the per-path stream used by sample_increments; consumes one draw from `rng`.
IncrementStream open_stream(const NoiseModel& model, Rng& rng);

NoiseIncrements sample_increments(const LevyTriplet& triplet, const TimeGrid& grid, Rng& rng);
NoiseIncrements sample_increments(const NoiseModel& model, const TimeGrid& grid, Rng& rng);

struct SubordinateIncrements {
  NoiseIncrements increments;
  SubordinatorPath path;  ///< the realized time change on the same grid
};

/// dZ_i ~ N(0, (l_{t_{i+1}} - l_{t_i}) I) given a sampled subordinator path l.
SubordinateIncrements subordinate_bm_increments(const BernsteinSpec& spec, const TimeGrid& grid, Rng& rng, int dim = 1,
                                                const SamplerOptions& options = {});

/// Brownian increments run on a given clock: dW_i ~ N(0, dclock_i I).
std::vector<Vec> time_changed_brownian(const std::vector<double>& clock_increments, int dim, Rng& rng);

nlohmann::json to_json(const LevyTriplet& triplet);
LevyTriplet triplet_from_json(const nlohmann::json& j);

void write_csv(std::ostream& out, const NoiseIncrements& noise);

}  // namespace mkvlevy
