#include "mkvlevy/fpke.hpp"

#include "mkvlevy/levy_noise.hpp"
#include "mkvlevy/metrics.hpp"
#include "mkvlevy/mkv.hpp"
#include "mkvlevy/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace mkvlevy {

namespace {

void require_alpha(double alpha) {
  if (!(alpha > 0.5 && alpha < 1.0)) {
    std::ostringstream os;
    os << "fractional Laplacian: alpha must lie in (1/2, 1), got " << alpha;
    throw DomainError(os.str());
  }
}

// Cumulative mass at the n+1 faces, normalized to end at 1.
std::vector<double> face_cdf(const DensityField& u, double dx) {
  std::vector<double> F(u.values.size() + 1, 0.0);
  for (std::size_t j = 0; j < u.values.size(); ++j) F[j + 1] = F[j] + u.values[j] * dx;
  const double total = F.back();
  if (!(total > 0.0)) throw NumericError("density has no mass");
  for (double& f : F) f /= total;
  return F;
}

// integral over an interval of length h of |D| with D linear from d0 to d1
double abs_linear(double d0, double d1, double h) {
  if ((d0 >= 0.0) == (d1 >= 0.0)) return 0.5 * h * std::abs(d0 + d1);
  const double a = std::abs(d0), b = std::abs(d1);
  return 0.5 * h * (a * a + b * b) / (a + b);
}

}  // namespace

std::vector<double> Grid1D::nodes() const {
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = x(j);
  return out;
}

double frac_constant(double alpha) {
  require_alpha(alpha);
  // (-Delta)^alpha constant in d = 1, times 2^{-alpha} for the |xi|^2/2 normalization
  const double c = std::pow(4.0, alpha) * std::tgamma(0.5 + alpha) /
                   (std::sqrt(std::numbers::pi) * std::abs(std::tgamma(-alpha)));
  return std::pow(2.0, -alpha) * c;
}

FractionalStencil::FractionalStencil(double alpha, double dx, std::size_t n) : alpha_(alpha), dx_(dx), w_(n, 0.0) {
  require_alpha(alpha);
  if (!(dx > 0.0) || n < 2) throw PreconditionError("FractionalStencil: need dx > 0 and n >= 2");
  const double s = 2.0 * alpha;
  const double h = dx;
  const double c = frac_constant(alpha);

  const double near = c * std::pow(h, -s) / (2.0 - s);
  w_[1] += near;
  w_[0] -= 2.0 * near;

  // far field: g(z) = u(x+z) + u(x-z) - 2u(x) linear on [kh, (k+1)h]
  double bend = 0.0;  // sum_k int (z-a)(b-z) z^{-1-s}, the interpolation defect for g ~ z^2
  for (std::size_t k = 1; k < n; ++k) {
    const double a = static_cast<double>(k) * h, b = a + h;
    const double I0 = (std::pow(a, -s) - std::pow(b, -s)) / s;
    const double I1 = (std::pow(b, 1.0 - s) - std::pow(a, 1.0 - s)) / (1.0 - s);
    const double I2 = (std::pow(b, 2.0 - s) - std::pow(a, 2.0 - s)) / (2.0 - s);
    bend += -I2 + (a + b) * I1 - a * b * I0;
    const double left = (b * I0 - I1) / h;
    const double right = (I1 - a * I0) / h;
    w_[k] += c * left;
    w_[0] -= 2.0 * c * left;
    if (k + 1 < n) w_[k + 1] += c * right;
    w_[0] -= 2.0 * c * right;
  }
  // chords of g ~ u''(x) z^2 overshoot by u''(x)(z-a)(b-z); take that back
  const double fix = c * bend / (h * h);
  w_[1] -= fix;
  w_[0] += 2.0 * fix;
  // beyond n h both neighbours sit in the zero exterior
  w_[0] -= 2.0 * c * std::pow(static_cast<double>(n) * h, -s) / s;
}

double FractionalStencil::symbol(double xi) const {
  double s = w_[0];
  for (std::size_t m = 1; m < w_.size(); ++m) s += 2.0 * w_[m] * std::cos(static_cast<double>(m) * xi * dx_);
  return s;
}

void FractionalStencil::apply(std::span<const double> u, std::span<double> out) const {
  const std::size_t n = u.size();
  if (out.size() != n || n > w_.size()) throw PreconditionError("FractionalStencil::apply: size mismatch");
  parallel_for(
      n,
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
          double acc = w_[0] * u[j];
          for (std::size_t m = 1; m <= j; ++m) acc += w_[m] * u[j - m];
          for (std::size_t m = 1; j + m < n; ++m) acc += w_[m] * u[j + m];
          out[j] = acc;
        }
      },
      128);
}

std::vector<double> FractionalStencil::exit_rates() const {
  const std::size_t n = w_.size();
  std::vector<double> inner(n, 0.0);  // inner[m] = sum_{k=1..m} w_k
  for (std::size_t m = 1; m < n; ++m) inner[m] = inner[m - 1] + w_[m];
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = -(w_[0] + inner[j] + inner[n - 1 - j]);
  return out;
}

double stability_cap(double alpha, double dx, std::size_t n) {
  const FractionalStencil st(alpha, dx, n);
  return 0.5 / std::abs(st.diagonal());
}

Grid1D make_grid(double L, double dx, double alpha, double dt) {
  require_alpha(alpha);
  if (!(L > 0.0) || !(dx > 0.0) || dx > L) throw PreconditionError("make_grid: need L > 0 and 0 < dx <= L");
  Grid1D g;
  g.L = L;
  g.alpha = alpha;
  g.n = static_cast<std::size_t>(std::llround(2.0 * L / dx));
  g.dx = 2.0 * L / static_cast<double>(g.n);
  const double cap = stability_cap(alpha, g.dx, g.n);
  g.dt = dt > 0.0 ? dt : cap;
  require_valid(g);
  return g;
}

void require_valid(const Grid1D& grid) {
  require_alpha(grid.alpha);
  if (grid.n < 2 || !(grid.dx > 0.0) || std::abs(grid.n * grid.dx - 2.0 * grid.L) > 1e-9 * grid.L)
    throw PreconditionError("Grid1D: need n >= 2 and n dx = 2L");
  const double cap = stability_cap(grid.alpha, grid.dx, grid.n);
  if (!(grid.dt > 0.0) || grid.dt > cap * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "Grid1D: dt = " << grid.dt << " exceeds the explicit stability cap " << cap;
    throw PreconditionError(os.str());
  }
}

std::vector<double> frac_laplacian_apply(const Grid1D& grid, std::span<const double> u) {
  require_alpha(grid.alpha);
  if (u.size() != grid.n) throw PreconditionError("frac_laplacian_apply: u must cover the grid");
  const FractionalStencil st(grid.alpha, grid.dx, grid.n);
  std::vector<double> out(grid.n);
  st.apply(u, out);
  return out;
}

double DensityField::mass(double dx) const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * dx;
}

DensityField density_from_law(const Grid1D& grid, const InitialLaw& law) {
  DensityField u;
  u.values = law.density_1d(grid.nodes(), 3.0 * grid.dx);
  const double m = u.mass(grid.dx);
  if (!(m > 0.0)) throw PreconditionError("initial law puts no mass on the grid");
  for (double& v : u.values) v /= m;
  return u;
}

LawMoments density_moments(const Grid1D& grid, const DensityField& u, double theta) {
  double m0 = 0.0, m1 = 0.0, m2 = 0.0, mt = 0.0;
  for (std::size_t j = 0; j < grid.n; ++j) {
    const double x = grid.x(j), w = u.values[j];
    m0 += w;
    m1 += w * x;
    m2 += w * x * x;
    mt += w * std::pow(std::abs(x), theta);
  }
  if (!(m0 > 0.0)) throw NumericError("density has no mass");
  LawMoments out;
  out.mean = Vec::Constant(1, m1 / m0);
  out.theta = theta;
  out.theta_moment = mt / m0;
  out.second_moment = m2 / m0;
  return out;
}

// ---------------------------------------------------------------------------------------------

FpkeSolver::FpkeSolver(Grid1D grid, bool jumps)
    : grid_(grid), jumps_(jumps), stencil_(grid.alpha, grid.dx, grid.n), exit_(stencil_.exit_rates()) {
  require_valid(grid_);
}

double FpkeSolver::max_drift(const DensityField& u, const MkvDrift& drift, double t) const {
  const LawMoments m = density_moments(grid_, u, drift.theta);
  const LawView view{&m, {}};
  double top = 0.0;
  Vec x(1);
  for (std::size_t f = 0; f <= grid_.n; ++f) {
    x[0] = -grid_.L + static_cast<double>(f) * grid_.dx;
    top = std::max(top, std::abs(drift.b(t, x, view)[0]));
  }
  return top;
}

void FpkeSolver::step(DensityField& u, const MkvDrift& drift, double dt) const {
  const std::size_t n = grid_.n;
  if (u.values.size() != n) throw PreconditionError("fpke step: density does not match the grid");
  if (dt == 0.0) return;
  if (!(dt > 0.0)) throw PreconditionError("fpke step: dt must be nonnegative");
  if (jumps_ && dt > grid_.dt * (1.0 + 1e-12)) throw PreconditionError("fpke step: dt above the stability cap");

  const double dx = grid_.dx;
  const double t = u.time;
  std::vector<double> rhs(n, 0.0);
  double leak = 0.0;
  if (jumps_) {
    stencil_.apply(u.values, rhs);
    for (std::size_t j = 0; j < n; ++j) leak += exit_[j] * u.values[j];
    leak *= dt * dx;
  }

  const LawMoments m = density_moments(grid_, u, drift.theta);
  const LawView view{&m, {}};
  std::vector<double> flux(n + 1);
  double bmax = 0.0;
  Vec x(1);
  for (std::size_t f = 0; f <= n; ++f) {
    x[0] = -grid_.L + static_cast<double>(f) * dx;
    const double b = drift.b(t, x, view)[0];
    if (!std::isfinite(b)) throw NumericError("fpke step: drift is not finite");
    bmax = std::max(bmax, std::abs(b));
    const double left = f > 0 ? u.values[f - 1] : 0.0;
    const double right = f < n ? u.values[f] : 0.0;
    flux[f] = std::max(b, 0.0) * left + std::min(b, 0.0) * right;
  }
  if (dt * bmax > 0.5 * dx * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "fpke step: drift CFL violated (dt max|b| = " << dt * bmax << " > dx/2 = " << 0.5 * dx << ")";
    throw PreconditionError(os.str());
  }
  leak += dt * (flux[n] - flux[0]);

  double negative = 0.0, positive = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double v = u.values[j] + dt * (rhs[j] - (flux[j + 1] - flux[j]) / dx);
    if (v < 0.0) {
      negative -= v;
      v = 0.0;
    } else {
      positive += v;
    }
    u.values[j] = v;
  }
  if (negative > 0.0 && positive > 0.0) {
    const double scale = (positive - negative) / positive;
    for (double& v : u.values) v *= scale;
  }
  u.clipped += negative * dx;
  u.max_clipped = std::max(u.max_clipped, negative * dx);
  u.leaked += leak;
  u.time = t + dt;
}

DensityField fpke_step(const Grid1D& grid, const DensityField& u, const MkvDrift& drift, double t) {
  const FpkeSolver solver(grid);
  DensityField out = u;
  out.time = t;
  solver.step(out, drift, grid.dt);
  return out;
}

FpkeTrajectory fpke_solve(const FpkeSolver& solver, const MkvDrift& drift, const DensityField& u0, double T,
                          const std::vector<double>& checkpoints) {
  const double t0 = u0.time;
  if (!(T >= t0)) throw PreconditionError("fpke_solve: horizon before the initial time");
  FpkeTrajectory out;
  out.times.push_back(t0);
  out.snapshots.push_back(u0);
  if (T == t0) return out;

  const double bmax = solver.max_drift(u0, drift, t0);
  double dt_max = solver.grid().dt;
  if (bmax > 0.0) dt_max = std::min(dt_max, 0.4 * solver.grid().dx / bmax);
  out.steps = static_cast<std::size_t>(std::ceil((T - t0) / dt_max - 1e-9));
  out.dt = (T - t0) / static_cast<double>(out.steps);

  std::vector<std::size_t> marks;
  for (double c : checkpoints) {
    if (c <= t0 || c > T) continue;
    marks.push_back(static_cast<std::size_t>(std::llround((c - t0) / out.dt)));
  }
  marks.push_back(out.steps);
  std::sort(marks.begin(), marks.end());
  marks.erase(std::unique(marks.begin(), marks.end()), marks.end());

  DensityField u = u0;
  std::size_t next = 0;
  for (std::size_t k = 1; k <= out.steps; ++k) {
    solver.step(u, drift, out.dt);
    if (k == out.steps) u.time = T;
    if (next < marks.size() && marks[next] == k) {
      out.times.push_back(u.time);
      out.snapshots.push_back(u);
      ++next;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

std::vector<double> inverse_cdf_points(const Grid1D& grid, const DensityField& u, std::size_t n) {
  const std::vector<double> F = face_cdf(u, grid.dx);
  std::vector<double> out(n);
  std::size_t cell = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    while (cell + 1 < grid.n && F[cell + 1] < q) ++cell;
    const double lo = F[cell], hi = F[cell + 1];
    const double frac = hi > lo ? std::clamp((q - lo) / (hi - lo), 0.0, 1.0) : 0.5;
    out[i] = -grid.L + (static_cast<double>(cell) + frac) * grid.dx;
  }
  return out;
}

double w1_density(const Grid1D& grid, const DensityField& u, const DensityField& v) {
  const std::vector<double> Fu = face_cdf(u, grid.dx), Fv = face_cdf(v, grid.dx);
  double s = 0.0;
  for (std::size_t j = 0; j < grid.n; ++j) s += abs_linear(Fu[j] - Fv[j], Fu[j + 1] - Fv[j + 1], grid.dx);
  return s;
}

double w1_density_sample(const Grid1D& grid, const DensityField& u, std::span<const double> sample) {
  if (sample.empty()) throw PreconditionError("w1_density_sample: empty sample");
  const std::vector<double> F = face_cdf(u, grid.dx);
  std::vector<double> xs(sample.begin(), sample.end());
  std::sort(xs.begin(), xs.end());
  const double N = static_cast<double>(xs.size());
  const auto Fu = [&](double x) {
    if (x <= -grid.L) return 0.0;
    if (x >= grid.L) return 1.0;
    const double r = (x + grid.L) / grid.dx;
    const std::size_t j = std::min(grid.n - 1, static_cast<std::size_t>(r));
    return F[j] + (r - static_cast<double>(j)) * (F[j + 1] - F[j]);
  };
  std::vector<double> breaks = xs;
  for (std::size_t f = 0; f <= grid.n; ++f) breaks.push_back(-grid.L + static_cast<double>(f) * grid.dx);
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0;
  std::size_t below = 0;  // samples <= left end
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k], b = breaks[k + 1];
    while (below < xs.size() && xs[below] <= a) ++below;
    if (b <= a) continue;
    const double c = static_cast<double>(below) / N;
    s += abs_linear(Fu(a) - c, Fu(b) - c, b - a);
  }
  return s;
}

// ---------------------------------------------------------------------------------------------

CorrespondenceReport correspondence_check(const CorrespondenceConfig& config, const MkvDrift& drift,
                                          const InitialLaw& mu0, double T, std::uint64_t seed) {
  if (config.dx.size() != config.particles.size() || config.dx.empty())
    throw PreconditionError("correspondence_check: need one grid spacing per particle count");
  if (mu0.dim() != 1) throw PreconditionError("correspondence_check: one-dimensional laws only");
  require_alpha(config.alpha);

  CorrespondenceReport rep;
  rep.tolerance = config.tolerance;
  rep.replicates = config.replicates;
  std::map<double, DensityField> solved;
  const NoiseModel noise(LevyTriplet::subordinate(1, BernsteinSpec::stable(config.alpha)));
  const std::size_t steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(T / config.particle_dt)));
  const TimeGrid pgrid = uniform_grid(T, steps);

  for (std::size_t i = 0; i < config.dx.size(); ++i) {
    const Grid1D grid = make_grid(config.L, config.dx[i], config.alpha);
    auto it = solved.find(grid.dx);
    if (it == solved.end()) {
      const FpkeSolver solver(grid);
      const DensityField u0 = density_from_law(grid, mu0);
      it = solved.emplace(grid.dx, fpke_solve(solver, drift, u0, T).snapshots.back()).first;
    }
    const DensityField& uT = it->second;

    const std::vector<double> qs = inverse_cdf_points(grid, uT, config.particles[i]);
    PropagateOptions opts;
    opts.snapshot_stride = 0;
    double sum = 0.0, sum2 = 0.0;
    std::vector<double> ds;
    const std::size_t R = std::max<std::size_t>(1, config.replicates);
    for (std::size_t r = 0; r < R; ++r) {
      Rng init = Rng::stream(seed, {tags::kInitial, i, r});
      const ParticleEnsemble e0 = mu0.sample(config.particles[i], init);
      const std::uint64_t run_seed = Rng::stream(seed, {tags::kParticle, i, r})();
      const LawFlow flow = propagate_particles(drift, identity_sigma(1), e0, noise, pgrid, run_seed, opts);
      const std::vector<double> xs = flow.terminal().coordinate(0);
      const double d = wasserstein_1d(qs, xs, 1.0).value;
      ds.push_back(d);
      sum += d;
      sum2 += d * d;
    }
    std::sort(ds.begin(), ds.end());

    CorrespondenceRow row;
    row.particles = config.particles[i];
    row.cells = grid.n;
    row.dx = grid.dx;
    row.distance = 0.5 * (ds[(R - 1) / 2] + ds[R / 2]);
    row.mean = sum / static_cast<double>(R);
    row.se = R > 1 ? std::sqrt(std::max(0.0, sum2 / R - row.mean * row.mean) / static_cast<double>(R - 1)) : 0.0;
    row.leaked = uT.leaked;
    row.mass_error = std::abs(uT.mass(grid.dx) + uT.leaked - 1.0);
    rep.rows.push_back(row);
  }
  rep.decreasing = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].distance < rep.rows[i - 1].distance)) rep.decreasing = false;
  rep.pass = rep.decreasing && rep.rows.back().distance <= rep.tolerance;
  return rep;
}

StabilityReport fpke_stability_check(const FpkeSolver& solver, const MkvDrift& drift, const InitialLaw& mu0,
                                     const InitialLaw& nu0, double T, std::size_t checkpoints, double slack) {
  const Grid1D& grid = solver.grid();
  const DensityField u0 = density_from_law(grid, mu0);
  const DensityField v0 = density_from_law(grid, nu0);
  std::vector<double> marks;
  for (std::size_t k = 1; k <= checkpoints; ++k) marks.push_back(T * static_cast<double>(k) / static_cast<double>(checkpoints));

  // one common step size so both snapshots line up
  const double bu = solver.max_drift(u0, drift, 0.0), bv = solver.max_drift(v0, drift, 0.0);
  const double bmax = std::max(bu, bv);
  double dt_max = grid.dt;
  if (bmax > 0.0) dt_max = std::min(dt_max, 0.4 * grid.dx / bmax);
  const std::size_t steps = static_cast<std::size_t>(std::ceil(T / dt_max - 1e-9));
  const double dt = T / static_cast<double>(steps);

  StabilityReport rep;
  rep.slack = slack;
  const double d0 = w1_density(grid, u0, v0);
  rep.times.push_back(0.0);
  rep.distances.push_back(d0);
  rep.bounds.push_back(d0 * (1.0 + slack));

  DensityField u = u0, v = v0;
  double exponent = 0.0;  // int_0^t (kappa1 + kappa2), trapezoid per step
  std::size_t next = 0;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t = u.time;
    solver.step(u, drift, dt);
    solver.step(v, drift, dt);
    exponent += 0.5 * dt * (drift.kappa1(t) + drift.kappa2(t) + drift.kappa1(t + dt) + drift.kappa2(t + dt));
    while (next < marks.size() && std::llround(marks[next] / dt) <= static_cast<long long>(k)) {
      const double d = w1_density(grid, u, v);
      const double bound = std::exp(0.5 * exponent) * d0 * (1.0 + slack);
      rep.times.push_back(u.time);
      rep.distances.push_back(d);
      rep.bounds.push_back(bound);
      if (d > bound) ++rep.violations;
      ++next;
    }
  }
  rep.pass = rep.violations == 0;
  return rep;
}

// ---------------------------------------------------------------------------------------------

void write_csv(std::ostream& out, const Grid1D& grid, const DensityField& u) {
  out << "x,u\n";
  out.precision(17);
  for (std::size_t j = 0; j < grid.n; ++j) out << grid.x(j) << ',' << u.values[j] << '\n';
}

nlohmann::json to_json(const Grid1D& grid) {
  return {{"L", grid.L}, {"n", grid.n}, {"dx", grid.dx}, {"dt", grid.dt}, {"alpha", grid.alpha}};
}

nlohmann::json to_json(const CorrespondenceReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"particles", row.particles},
                    {"cells", row.cells},
                    {"dx", row.dx},
                    {"w1_median", row.distance},
                    {"w1_mean", row.mean},
                    {"w1_mean_se", row.se},
                    {"leaked", row.leaked},
                    {"mass_error", row.mass_error}});
  return {{"rows", rows}, {"tolerance", r.tolerance}, {"replicates", r.replicates}, {"decreasing", r.decreasing}, {"pass", r.pass}};
}

nlohmann::json to_json(const StabilityReport& r) {
  return {{"times", r.times},     {"w1", r.distances},           {"bounds", r.bounds},
          {"slack", r.slack},     {"violations", r.violations},  {"pass", r.pass}};
}

}  // namespace mkvlevy
