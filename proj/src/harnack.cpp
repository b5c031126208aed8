#include "mkvlevy/harnack.hpp"

#include "mkvlevy/metrics.hpp"
#include "mkvlevy/parallel.hpp"
#include "mkvlevy/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace mkvlevy {

double K1(const ScalarFn& kappa1, double t, std::size_t panels) {
  if (t < 0.0) throw PreconditionError("K1: t must be >= 0");
  if (t == 0.0) return 1.0;
  return std::exp(-simpson(kappa1, 0.0, t, panels));
}

const char* to_string(KVariant v) { return v == KVariant::Printed ? "printed" : "derived"; }

KVariant k_variant_from_string(const std::string& s) {
  if (s == "printed") return KVariant::Printed;
  if (s == "derived") return KVariant::Derived;
  throw PreconditionError("unknown K variant \"" + s + "\"");
}

namespace {

// cumulative int_0^{s_j} g on the nodes s_j = j h, one Simpson cell per interval
std::vector<double> cumulative(const ScalarFn& g, double h, std::size_t n) {
  std::vector<double> out(n + 1, 0.0);
  double left = g(0.0);
  for (std::size_t j = 1; j <= n; ++j) {
    const double a = h * static_cast<double>(j - 1);
    const double right = g(a + h);
    out[j] = out[j - 1] + h / 6.0 * (left + 4.0 * g(a + 0.5 * h) + right);
    left = right;
  }
  return out;
}

double k_rule(const ScalarFn& kappa1, const ScalarFn& kappa2, double t, double theta, KVariant variant, std::size_t n) {
  const double h = t / static_cast<double>(n);
  const auto inner = cumulative(variant == KVariant::Printed ? kappa1 : kappa2, h, n);
  double s = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    const double x = h * static_cast<double>(j);
    const double k2 = kappa2(x);
    const double g = variant == KVariant::Printed ? std::exp(0.5 * theta * (kappa1(x) + k2) - 0.5 * inner[j]) * k2
                                                  : k2 * std::exp(0.5 * inner[j]);
    const double w = (j == 0 || j == n) ? 1.0 : (j % 2 ? 4.0 : 2.0);
    s += w * g;
  }
  return 0.5 * s * h / 3.0;
}

}  // namespace

KValue K(const ScalarFn& kappa1, const ScalarFn& kappa2, double t, double theta, KVariant variant, std::size_t panels) {
  if (t < 0.0) throw PreconditionError("K: t must be >= 0");
  if (!(theta >= 1.0)) throw PreconditionError("K: theta must be >= 1");
  if (t == 0.0) return {0.0, 0.0};
  panels = std::max<std::size_t>(4, (panels + 3) / 4 * 4);
  const double fine = k_rule(kappa1, kappa2, t, theta, variant, panels);
  const double coarse = k_rule(kappa1, kappa2, t, theta, variant, panels / 2);
  return {fine, std::abs(fine - coarse)};
}

KernelTable kernel_table(const MkvDrift& drift, const TimeGrid& grid, KVariant variant) {
  KernelTable tab;
  tab.grid = grid;
  for (double t : grid) {
    tab.k1.push_back(K1(drift.kappa1, t));
    tab.k.push_back(K(drift.kappa1, drift.kappa2, t, drift.theta, variant).value);
  }
  return tab;
}

double stieltjes_k1(const ScalarFn& kappa1, const SubordinatorPath& path, double T) {
  const auto& g = path.grid;
  const double tol = 1e-12 * std::max(1.0, T);
  double s = 0.0;
  double a = 0.0;  // int_0^{g_i} kappa1
  for (std::size_t i = 0; i + 1 < g.size() && g[i + 1] <= T + tol; ++i) {
    s += std::exp(-a) * (path.values[i + 1] - path.values[i]);
    const double h = g[i + 1] - g[i];
    a += h / 6.0 * (kappa1(g[i]) + 4.0 * kappa1(g[i] + 0.5 * h) + kappa1(g[i + 1]));
  }
  return s;
}

double xi(double t, const Vec& x0, const Vec& y0, double w_init, const ScalarFn& kappa1, const ScalarFn& kappa2,
          double theta, const SubordinatorPath& reg_path, double T, KVariant variant, XiKernel kernel) {
  const double denom = stieltjes_k1(kappa1, reg_path, T);
  if (!(denom > 0.0) || !std::isfinite(denom)) throw NumericError("xi: int K1 dl^eps vanishes on a degenerate path");
  const double k = K(kappa1, kappa2, kernel == XiKernel::AtT ? t : T, theta, variant).value;
  return ((x0 - y0).norm() + k * w_init) * std::sqrt(K1(kappa1, t)) / denom;
}

// ---------------------------------------------------------------------------------------------

TestFunction test_function(const std::string& name) {
  const auto bump = [](const Vec& x) {
    const double r2 = x.squaredNorm();
    return r2 < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r2)) : 0.0;
  };
  if (name == "one_plus_gaussian") return {name, [](const Vec& x) { return 1.0 + std::exp(-x.squaredNorm()); }, 1.0};
  if (name == "one_plus_cauchy") return {name, [](const Vec& x) { return 1.0 + 1.0 / (1.0 + x.squaredNorm()); }, 1.0};
  if (name == "one_plus_bump") return {name, [bump](const Vec& x) { return 1.0 + bump(x); }, 1.0};
  if (name == "gaussian") return {name, [](const Vec& x) { return std::exp(-x.squaredNorm()); }, 0.0};
  if (name == "cauchy") return {name, [](const Vec& x) { return 1.0 / (1.0 + x.squaredNorm()); }, 0.0};
  if (name == "bump") return {name, bump, 0.0};
  if (name == "one") return {name, [](const Vec&) { return 1.0; }, 1.0};
  throw PreconditionError("unknown test function \"" + name + "\"");
}

std::vector<std::string> test_function_names() {
  return {"one_plus_gaussian", "one_plus_cauchy", "one_plus_bump", "gaussian", "cauchy", "bump", "one"};
}

double lambda_at(const HarnackConfig& config, double t) {
  if (config.lambda) return config.lambda(t);
  Eigen::JacobiSVD<Mat> svd(config.sigma);
  const double smin = svd.singularValues().minCoeff();
  return smin > 0.0 ? 1.0 / smin : std::numeric_limits<double>::infinity();
}

void check_h5(const HarnackConfig& config) {
  if (config.sigma.rows() != config.sigma.cols() || config.sigma.rows() < 1) throw PreconditionError("sigma must be square");
  Eigen::JacobiSVD<Mat> svd(config.sigma);
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 1e-12)) throw PreconditionError("sigma must be invertible");
  const double inv_norm = 1.0 / smin;
  double prev = 0.0;
  const auto grid = uniform_grid(config.T, std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(config.T / config.dt))));
  for (double t : grid) {
    const double l = lambda_at(config, t);
    if (l + 1e-12 < inv_norm) throw PreconditionError("lambda(t) is below ||sigma^{-1}||");
    if (l + 1e-12 < prev) throw PreconditionError("lambda must be non-decreasing");
    prev = l;
  }
}

namespace {

TimeGrid physical_grid(const HarnackConfig& c) {
  if (!(c.T > 0.0) || !(c.dt > 0.0) || c.dt > c.T) throw PreconditionError("harnack: need 0 < dt <= T");
  return uniform_grid(c.T, std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(c.T / c.dt))));
}

struct Stats {
  double mean = 0.0;
  double se = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return s;
}

}  // namespace

ReferenceFlows reference_flows(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                               const InitialLaw& nu0, std::size_t n, std::uint64_t seed, bool common_noise) {
  const TimeGrid grid = physical_grid(config);
  const int d = mu0.dim();
  if (nu0.dim() != d || config.sigma.rows() != d) throw PreconditionError("harnack: dimension mismatch");
  NoiseModel noise(LevyTriplet::subordinate(d, config.subordinator));
  Rng ra = Rng::stream(seed, {tags::kInitial, 0});
  Rng rb = Rng::stream(seed, {tags::kInitial, common_noise ? 0u : 1u});
  PropagateOptions opts;
  opts.snapshot_stride = 0;
  ReferenceFlows f;
  f.mu = propagate_particles(drift, constant_sigma(config.sigma), mu0.sample(n, ra), noise, grid, mix64(seed + 1), opts);
  f.nu = propagate_particles(drift, constant_sigma(config.sigma), nu0.sample(n, rb), noise, grid, mix64(seed + (common_noise ? 1 : 2)), opts);
  return f;
}

CouplingRun coupled_solve(const HarnackConfig& config, const MkvDrift& drift, const Vec& x0, const Vec& y0,
                          double w_init, const ReferenceFlows& flows, const SubordinatorPath& reg_path, Rng& rng,
                          const CouplingOptions& options) {
  const TimeGrid& grid = flows.mu.grid;
  if (flows.nu.grid.size() != grid.size() || reg_path.size() != grid.size()) {
    throw PreconditionError("coupled_solve: flows and regularized path must share the grid");
  }
  KernelTable local;
  const KernelTable* tab = options.kernels;
  if (!tab) {
    local = kernel_table(drift, grid, config.variant);
    tab = &local;
  }
  const std::size_t steps = grid.size() - 1;
  const int d = static_cast<int>(x0.size());
  const Mat& sigma = config.sigma;
  const Mat sigma_inv = sigma.inverse();

  double I = 0.0;
  for (std::size_t i = 0; i < steps; ++i) I += tab->k1[i] * (reg_path.values[i + 1] - reg_path.values[i]);
  if (!(I > 0.0)) throw NumericError("coupled_solve: int K1 dl^eps vanishes");
  const double gap0 = (x0 - y0).norm();
  const double k_T = tab->k.back();
  const double lam = lambda_at(config, config.T);
  const double threshold = config.contact_threshold * (1.0 + gap0);

  CouplingRun run;
  run.bracket_bound = 2.0 * lam * lam * (gap0 * gap0 + k_T * k_T * w_init * w_init) / I + 1e-8;
  Rng wr = rng.split(tags::kBrownian);
  Vec x = x0;
  Vec y = y0;
  bool coupled = !options.forced_phi && gap0 <= threshold;
  if (coupled) {
    run.tau = 0.0;
    y = x;
  }
  const auto record = [&](std::size_t i, double xi_val) {
    if (!options.record_paths) return;
    run.times.push_back(grid[i]);
    run.X_path.push_back(x);
    run.Y_path.push_back(y);
    run.gap_trace.push_back((x - y).norm());
    run.xi_trace.push_back(xi_val);
    run.bracket_trace.push_back(run.M_bracket);
  };

  for (std::size_t i = 0; i < steps; ++i) {
    const double t = grid[i];
    const double dt = grid[i + 1] - t;
    const double dr = reg_path.values[i + 1] - reg_path.values[i];
    Vec dw(d);
    for (int k = 0; k < d; ++k) dw[k] = wr.normal();
    dw *= std::sqrt(dr);
    const double kk = config.xi_kernel == XiKernel::AtT ? tab->k[i] : k_T;
    const double xi_i = (gap0 + kk * w_init) * std::sqrt(tab->k1[i]) / I;
    record(i, coupled ? 0.0 : xi_i);

    const LawView mu_view{&flows.mu.moments[i], {}};
    const Vec bx = drift.b(t, x, mu_view);
    const Vec x_next = euler_update(x, bx, dt, sigma, dw, i);
    if (coupled) {
      x = x_next;
      y = x;
      continue;
    }
    const LawView nu_view{&flows.nu.moments[i], {}};
    const Vec by = drift.b(t, y, nu_view);
    Vec phi = Vec::Zero(d);
    if (options.forced_phi) {
      phi = options.forced_phi(t);
    } else {
      const Vec diff = x - y;
      const Vec pred = diff + (bx - by) * dt;
      if (pred.norm() <= xi_i * dr) {
        phi = pred / dr;
      } else if (diff.norm() > 0.0) {
        phi = xi_i * diff / diff.norm();
      }
    }
    const Vec y_next = euler_update(y, by + phi * (dr / dt), dt, sigma, dw, i);
    const Vec psi = sigma_inv * phi;
    run.M -= psi.dot(dw);
    run.M_bracket += psi.squaredNorm() * dr;
    x = x_next;
    y = y_next;
    if (!options.forced_phi && (x - y).norm() <= threshold) {
      coupled = true;
      run.tau = grid[i + 1];
      y = x;
    }
  }
  record(steps, 0.0);
  run.final_gap = (x - y).norm();
  run.R = std::exp(run.M - 0.5 * options.bracket_scale * run.M_bracket);
  return run;
}

GirsanovCheck girsanov_mean_check(const std::vector<CouplingRun>& runs) {
  if (runs.size() < 1000) throw PreconditionError("girsanov_mean_check needs at least 1000 runs");
  std::vector<double> r;
  r.reserve(runs.size());
  for (const auto& run : runs) r.push_back(run.R);
  const Stats s = stats(r);
  return {s.mean, s.se, runs.size(), std::abs(s.mean - 1.0) <= 3.0 * s.se};
}

InitialPair initial_pair(const InitialLaw& mu0, const InitialLaw& nu0, double theta, std::uint64_t seed, std::size_t n) {
  if (mu0.dim() != nu0.dim()) throw PreconditionError("initial laws differ in dimension");
  n = std::min(n, kExactAssignmentBudget);
  if (mu0.is_point_mass() && nu0.is_point_mass()) n = 1;
  Rng ra = Rng::stream(seed, {tags::kInitial, 2});
  Rng rb = Rng::stream(seed, {tags::kInitial, 3});
  InitialPair p;
  p.mu0 = mu0.sample(n, ra);
  p.nu0 = nu0.sample(n, rb);
  const auto m = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = (p.mu0.points[i] - p.nu0.points[j]).squaredNorm();
  p.assignment = optimal_assignment(c);
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) s2 += c(i, p.assignment[i]);
  p.w2 = std::sqrt(s2 / static_cast<double>(n));
  p.w_theta = theta == 2.0 ? p.w2 : wasserstein_exact(p.mu0.points, p.nu0.points, theta).value;
  return p;
}

double hill_tail_index(std::vector<double> v, std::size_t k) {
  if (v.size() < 2) return std::numeric_limits<double>::infinity();
  k = std::clamp<std::size_t>(k, 1, v.size() - 1);
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k + 1), v.end(), std::greater<>());
  const double base = v[k];
  if (!(base > 0.0)) return 0.0;
  double h = 0.0;
  for (std::size_t i = 0; i < k; ++i) h += std::log(v[i] / base);
  h /= static_cast<double>(k);
  return h > 0.0 ? 1.0 / h : std::numeric_limits<double>::infinity();
}

InverseCost inverse_cost(const BernsteinSpec& spec, const ScalarFn& kappa1, double T, double dt, std::size_t n_paths,
                         std::uint64_t seed) {
  if (n_paths < 2) throw PreconditionError("inverse_cost needs at least two paths");
  const TimeGrid grid = uniform_grid(T, std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(T / dt))));
  std::vector<double> k1_mid;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) k1_mid.push_back(K1(kappa1, 0.5 * (grid[i] + grid[i + 1])));
  SamplerOptions so;
  so.extension = 0.0;
  const SubordinatorIncrementSampler sampler(spec, so);
  InverseCost out;
  out.samples.assign(n_paths, 0.0);
  parallel_for(n_paths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      Rng r = Rng::stream(seed, {tags::kCost, static_cast<std::uint64_t>(p)});
      double s = 0.0;
      for (std::size_t i = 0; i + 1 < grid.size(); ++i) s += k1_mid[i] * sampler.next(grid[i + 1] - grid[i], r);
      out.samples[p] = s > 0.0 ? 1.0 / s : std::numeric_limits<double>::infinity();
    }
  });
  const Stats st = stats(out.samples);
  out.mean = st.mean;
  out.se = st.se;
  out.upper = st.mean + 1.96 * st.se;
  out.tail_index = hill_tail_index(out.samples, std::max<std::size_t>(10, n_paths / 100));
  out.finite = std::isfinite(out.mean) && out.tail_index >= 2.0;
  return out;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    default: return "inconclusive";
  }
}

HarnackSetup prepare_harnack(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                             const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed) {
  check_h5(config);
  const auto h1 = check_h1prime(config.subordinator, drift.theta);
  if (!h1.holds) throw PreconditionError("subordinator fails (H1'): " + h1.detail);
  if (!(config.p > 1.0)) throw PreconditionError("power exponent p must exceed 1");
  if (!(config.eps > 0.0 && config.eps < 1.0)) throw PreconditionError("eps must lie in (0,1)");
  HarnackSetup s{config, drift, {}, {}, {}, {}, {}};
  s.pair = initial_pair(mu0, nu0, drift.theta, seed, kExactAssignmentBudget);
  s.flows = reference_flows(config, drift, mu0, nu0, n_runs, seed, true);
  s.samples = reference_flows(config, drift, mu0, nu0, n_runs, mix64(seed + 4), false);
  s.cost = inverse_cost(config.subordinator, drift.kappa1, config.T, config.dt, config.cost_paths, mix64(seed + 3));
  s.kernels = kernel_table(drift, s.flows.mu.grid, config.variant);
  return s;
}

namespace {

double k_at_horizon(const HarnackSetup& s) { return s.kernels.k.back(); }

void attach_common(InequalityReport& r, const HarnackSetup& s) {
  r.detail["w2"] = s.pair.w2;
  r.detail["w_theta"] = s.pair.w_theta;
  r.detail["K_T"] = k_at_horizon(s);
  r.detail["K_variant"] = to_string(s.config.variant);
  r.detail["lambda_T"] = lambda_at(s.config, s.config.T);
  r.detail["inverse_cost_mean"] = s.cost.mean;
  r.detail["inverse_cost_se"] = s.cost.se;
  r.detail["inverse_cost_upper"] = s.cost.upper;
  r.detail["inverse_cost_tail_index"] = std::isfinite(s.cost.tail_index) ? nlohmann::json(s.cost.tail_index) : nlohmann::json("inf");
}

}  // namespace

InequalityReport log_harnack_check(const HarnackSetup& s) {
  if (s.config.f.lower_bound < 1.0) throw PreconditionError("log-Harnack needs f >= 1");
  InequalityReport r;
  r.check = "log_harnack";
  std::vector<double> lhs, rhs;
  for (const auto& x : s.samples.nu.terminal().points) {
    const double v = s.config.f.f(x);
    if (v < 1.0) throw PreconditionError("f < 1 on a sample");
    lhs.push_back(std::log(v));
  }
  for (const auto& x : s.samples.mu.terminal().points) {
    const double v = s.config.f.f(x);
    if (v < 1.0) throw PreconditionError("f < 1 on a sample");
    rhs.push_back(v);
  }
  const Stats a = stats(lhs);
  const Stats b = stats(rhs);
  const double lam = lambda_at(s.config, s.config.T);
  const double kT = k_at_horizon(s);
  const double weight = lam * lam * (s.pair.w2 * s.pair.w2 + kT * kT * s.pair.w_theta * s.pair.w_theta);
  r.lhs = a.mean;
  r.lhs_se = a.se;
  r.rhs = std::log(b.mean) + weight * s.cost.mean;
  r.rhs_se = std::hypot(b.se / b.mean, weight * s.cost.se);
  attach_common(r, s);
  r.detail["log_Pf_mu"] = std::log(b.mean);
  r.detail["cost_term"] = weight * s.cost.mean;
  if (!s.cost.finite) {
    r.verdict = Verdict::Inconclusive;
  } else {
    r.verdict = r.lhs <= r.rhs + 3.0 * std::hypot(r.lhs_se, r.rhs_se) ? Verdict::Pass : Verdict::Fail;
  }
  return r;
}

InequalityReport power_harnack_check(const HarnackSetup& s, std::uint64_t seed) {
  const double p = s.config.p;
  InequalityReport r;
  r.check = "power_harnack";
  std::vector<double> fn, fm;
  for (const auto& x : s.samples.nu.terminal().points) fn.push_back(s.config.f.f(x));
  for (const auto& x : s.samples.mu.terminal().points) fm.push_back(std::pow(s.config.f.f(x), p));
  for (double v : fn)
    if (v < 0.0) throw PreconditionError("power-Harnack needs f >= 0");
  const Stats a = stats(fn);
  const Stats b = stats(fm);
  const double lam = lambda_at(s.config, s.config.T);
  const double kT = k_at_horizon(s);
  const double c = p * lam * lam / ((p - 1.0) * (p - 1.0));
  const std::size_t npairs = s.pair.mu0.size();
  std::vector<double> ex;
  ex.reserve(s.cost.samples.size());
  Rng pick = Rng::stream(seed, {tags::kCoupling, 0xE0});
  for (double inv : s.cost.samples) {
    const std::size_t j = pick.below(npairs);
    const double gap = (s.pair.mu0.points[j] - s.pair.nu0.points[s.pair.assignment[j]]).norm();
    ex.push_back(std::exp(c * (gap * gap + kT * kT * s.pair.w_theta * s.pair.w_theta) * inv));
  }
  const Stats e = stats(ex);
  const double tail = hill_tail_index(ex, std::max<std::size_t>(10, ex.size() / 100));
  r.lhs = std::pow(a.mean, p);
  r.lhs_se = p * std::pow(a.mean, p - 1.0) * a.se;
  const double factor = std::pow(e.mean, p - 1.0);
  r.rhs = b.mean * factor;
  r.rhs_se = std::hypot(factor * b.se, b.mean * (p - 1.0) * std::pow(e.mean, p - 2.0) * e.se);
  attach_common(r, s);
  r.detail["P_fp_mu"] = b.mean;
  r.detail["exp_moment"] = e.mean;
  r.detail["exp_moment_se"] = e.se;
  r.detail["exp_moment_tail_index"] = std::isfinite(tail) ? nlohmann::json(tail) : nlohmann::json("inf");
  if (!std::isfinite(e.mean) || !std::isfinite(r.rhs) || !s.cost.finite) {
    r.verdict = Verdict::Inconclusive;
  } else {
    r.verdict = r.lhs <= r.rhs + 3.0 * std::hypot(r.lhs_se, r.rhs_se) ? Verdict::Pass : Verdict::Fail;
  }
  return r;
}

std::vector<CouplingRun> coupling_runs(const HarnackSetup& s, std::size_t n_runs, std::uint64_t seed,
                                       const CouplingOptions& options) {
  SamplerOptions so;
  so.extension = s.config.eps;
  const SubordinatorIncrementSampler sampler(s.config.subordinator, so);
  const TimeGrid& grid = s.flows.mu.grid;
  CouplingOptions opts = options;
  if (!opts.kernels) opts.kernels = &s.kernels;
  std::vector<CouplingRun> runs(n_runs);
  const std::size_t npairs = s.pair.mu0.size();
  parallel_for(n_runs, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng r = Rng::stream(seed, {tags::kCoupling, static_cast<std::uint64_t>(i)});
      Rng rs = r.split(tags::kSubordinator);
      const auto path = sample_path(sampler, grid, rs);
      const auto reg = regularize(path, s.config.eps, s.config.T);
      const std::size_t j = i % npairs;
      runs[i] = coupled_solve(s.config, s.drift, s.pair.mu0.points[j], s.pair.nu0.points[s.pair.assignment[j]],
                              s.pair.w_theta, s.flows, reg, r, opts);
    }
  }, 16);
  return runs;
}

InequalityReport entropy_cost_check(const HarnackSetup& s, std::size_t n_runs, std::uint64_t seed) {
  InequalityReport r;
  r.check = "entropy_cost";
  const auto runs = coupling_runs(s, n_runs, seed);
  std::vector<double> rlr, rs;
  std::size_t bracket_violations = 0, closed = 0;
  for (const auto& run : runs) {
    rlr.push_back(run.R * std::log(run.R));
    rs.push_back(run.R);
    if (run.M_bracket > run.bracket_bound) ++bracket_violations;
    if (run.tau) ++closed;
  }
  const Stats a = stats(rlr);
  const Stats m = stats(rs);
  const double lam = lambda_at(s.config, s.config.T);
  const double kT = k_at_horizon(s);
  const double weight = lam * lam * (s.pair.w2 * s.pair.w2 + kT * kT * s.pair.w_theta * s.pair.w_theta);
  r.lhs = a.mean;
  r.lhs_se = a.se;
  r.rhs = weight * s.cost.mean;
  r.rhs_se = weight * s.cost.se;
  attach_common(r, s);
  r.detail["mean_R"] = m.mean;
  r.detail["mean_R_se"] = m.se;
  r.detail["bracket_violations"] = bracket_violations;
  r.detail["coupled_fraction"] = static_cast<double>(closed) / static_cast<double>(runs.size());
  if (!s.cost.finite) {
    r.verdict = Verdict::Inconclusive;
  } else {
    r.verdict = r.lhs <= r.rhs + 3.0 * std::hypot(r.lhs_se, r.rhs_se) ? Verdict::Pass : Verdict::Fail;
  }
  return r;
}

InequalityReport log_harnack_check(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                                   const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed) {
  return log_harnack_check(prepare_harnack(config, drift, mu0, nu0, n_runs, seed));
}

InequalityReport power_harnack_check(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                                     const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed) {
  return power_harnack_check(prepare_harnack(config, drift, mu0, nu0, n_runs, seed), seed);
}

InequalityReport entropy_cost_check(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                                    const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed) {
  return entropy_cost_check(prepare_harnack(config, drift, mu0, nu0, n_runs, seed), n_runs, seed);
}

nlohmann::json to_json(const InequalityReport& r) {
  return {{"check", r.check}, {"lhs", r.lhs},       {"lhs_se", r.lhs_se},
          {"rhs", r.rhs},     {"rhs_se", r.rhs_se}, {"pass", r.pass()},
          {"verdict", to_string(r.verdict)},        {"detail", r.detail}};
}

void write_csv(std::ostream& out, const CouplingRun& run) {
  out << "t,gap,xi,bracket\n";
  out.precision(17);
  for (std::size_t i = 0; i < run.times.size(); ++i)
    out << run.times[i] << ',' << run.gap_trace[i] << ',' << run.xi_trace[i] << ',' << run.bracket_trace[i] << '\n';
}

}  // namespace mkvlevy
