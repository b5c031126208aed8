#pragma once

#include "mkvlevy/drifts.hpp"
#include "mkvlevy/ensemble.hpp"
#include "mkvlevy/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace mkvlevy {

/// Cell-centred grid on [-L, L]: x_j = -L + (j + 1/2) dx, n dx = 2L. alpha in (1/2, 1) is the
/// stable index of the jump part -(-Delta/2)^alpha.
struct Grid1D {
  double L = 20.0;
  std::size_t n = 800;
  double dx = 0.05;
  double dt = 0.0;
  double alpha = 0.9;

  double x(std::size_t j) const noexcept { return -L + (static_cast<double>(j) + 0.5) * dx; }
  std::vector<double> nodes() const;
};

/// Constant in front of the singular integral so that the operator has symbol -(|xi|^2/2)^alpha.
double frac_constant(double alpha);

/// Largest explicit step for the jump part: 0.5 / |diagonal of the discrete operator|.
double stability_cap(double alpha, double dx, std::size_t n);

/// n = round(2L/dx); dt = stability_cap unless a positive dt is given (then it must respect the cap).
Grid1D make_grid(double L, double dx, double alpha, double dt = 0.0);

/// Throws DomainError for alpha outside (1/2, 1), PreconditionError for inconsistent sizes or a dt
/// above the cap.
void require_valid(const Grid1D& grid);

/// Toeplitz stencil of the discretized operator with zero exterior:
///   (A u)_j = w_0 u_j + sum_{m>=1} w_m (u_{j+m} + u_{j-m}).
/// Near field |z| < dx by the second-order Taylor term, far field by exact integration of the
/// piecewise-linear interpolant against c |z|^{-1-2alpha}, exterior tail in closed form.
class FractionalStencil {
 public:
  FractionalStencil(double alpha, double dx, std::size_t n);

  double alpha() const noexcept { return alpha_; }
  double dx() const noexcept { return dx_; }
  std::size_t size() const noexcept { return w_.size(); }
  const std::vector<double>& weights() const noexcept { return w_; }
  double diagonal() const noexcept { return w_[0]; }

  /// Multiplier of the stencil on exp(i xi x) over the lattice; the oscillating part of the tail
  /// beyond n dx is dropped.
  double symbol(double xi) const;

  void apply(std::span<const double> u, std::span<double> out) const;

  /// Rate at which mass in cell j jumps outside the domain (minus the row sum).
  std::vector<double> exit_rates() const;

 private:
  double alpha_;
  double dx_;
  std::vector<double> w_;
};

std::vector<double> frac_laplacian_apply(const Grid1D& grid, std::span<const double> u);

struct DensityField {
  std::vector<double> values;
  double time = 0.0;
  double leaked = 0.0;       ///< cumulative mass that left [-L, L]
  double clipped = 0.0;      ///< cumulative mass removed by positivity clipping
  double max_clipped = 0.0;  ///< largest clipped mass in one step

  double mass(double dx) const;
};

DensityField density_from_law(const Grid1D& grid, const InitialLaw& law);

/// Moments of the normalized density, in the same record particle drifts read.
LawMoments density_moments(const Grid1D& grid, const DensityField& u, double theta);

/// Explicit Euler for d u/dt = A u - d/dx(b(t, x, mu_u) u), upwind fluxes, zero exterior.
class FpkeSolver {
 public:
  FpkeSolver(Grid1D grid, bool jumps = true);

  const Grid1D& grid() const noexcept { return grid_; }
  const FractionalStencil& stencil() const noexcept { return stencil_; }

  /// One step of size dt (dt = 0 leaves u unchanged). Drift CFL dt max|b| <= dx/2 else PreconditionError.
  void step(DensityField& u, const MkvDrift& drift, double dt) const;

  /// Largest |b| over cell faces for the current density.
  double max_drift(const DensityField& u, const MkvDrift& drift, double t) const;

 private:
  Grid1D grid_;
  bool jumps_;
  FractionalStencil stencil_;
  std::vector<double> exit_;
};

DensityField fpke_step(const Grid1D& grid, const DensityField& u, const MkvDrift& drift, double t);

struct FpkeTrajectory {
  std::vector<double> times;
  std::vector<DensityField> snapshots;
  double dt = 0.0;
  std::size_t steps = 0;
};

/// Uniform steps from u0.time to T with dt <= grid.dt and the drift CFL at 0.4 dx / max|b| of u0.
/// Snapshots at every checkpoint (clamped to the nearest step) and at T.
FpkeTrajectory fpke_solve(const FpkeSolver& solver, const MkvDrift& drift, const DensityField& u0, double T,
                          const std::vector<double>& checkpoints = {});

/// Mid-quantile points F^{-1}((i + 1/2)/N) of the normalized density.
std::vector<double> inverse_cdf_points(const Grid1D& grid, const DensityField& u, std::size_t n);

/// W_1 between normalized densities on the same grid: integral of |F_u - F_v|, F piecewise linear.
double w1_density(const Grid1D& grid, const DensityField& u, const DensityField& v);

/// Same, against an empirical sample.
double w1_density_sample(const Grid1D& grid, const DensityField& u, std::span<const double> sample);

struct CorrespondenceRow {
  std::size_t particles = 0;
  std::size_t cells = 0;
  double dx = 0.0;
  double distance = 0.0;  ///< median over replicate ensembles
  double mean = 0.0;
  double se = 0.0;        ///< of the mean
  double mass_error = 0.0;  ///< |mass + leaked - 1| at T
  double leaked = 0.0;
};

struct CorrespondenceReport {
  std::vector<CorrespondenceRow> rows;
  double tolerance = 5e-2;
  std::size_t replicates = 1;
  bool decreasing = false;
  bool pass = false;
};

struct CorrespondenceConfig {
  double L = 20.0;
  double alpha = 0.9;
  std::vector<double> dx = {0.1, 0.05, 0.05};
  std::vector<std::size_t> particles = {1000, 4000, 16000};
  double particle_dt = 0.01;
  double tolerance = 5e-2;
  /// Independent particle ensembles per level. A single ensemble's W_1 has infinite variance under
  /// 2alpha-stable tails, so levels are ranked by the replicate median.
  std::size_t replicates = 32;
};

/// Grid density versus interacting particles driven by subordinate Brownian motion with Stable(alpha).
CorrespondenceReport correspondence_check(const CorrespondenceConfig& config, const MkvDrift& drift,
                                          const InitialLaw& mu0, double T, std::uint64_t seed);

struct StabilityReport {
  std::vector<double> times;
  std::vector<double> distances;
  std::vector<double> bounds;
  double slack = 0.1;
  std::size_t violations = 0;
  bool pass = false;
};

/// W_1(mu_t, nu_t) <= exp(1/2 int_0^t (kappa1 + kappa2)) W_1(mu_0, nu_0) (1 + slack) on checkpoints.
StabilityReport fpke_stability_check(const FpkeSolver& solver, const MkvDrift& drift, const InitialLaw& mu0,
                                     const InitialLaw& nu0, double T, std::size_t checkpoints = 10,
                                     double slack = 0.1);

/// CSV: x,u
void write_csv(std::ostream& out, const Grid1D& grid, const DensityField& u);
nlohmann::json to_json(const Grid1D& grid);
nlohmann::json to_json(const CorrespondenceReport& r);
nlohmann::json to_json(const StabilityReport& r);

}  // namespace mkvlevy
