#include "mkvlevy/subordinator.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace mkvlevy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& msg) {
  if (!ok) throw PreconditionError(msg);
}

// One-sided positive stable variate with E exp(-rY) = exp(-r^alpha) (Kanter's representation).
double positive_stable(double alpha, Rng& rng) {
  const double u = std::numbers::pi * rng.uniform();
  const double e = rng.exponential();
  const double log_y = std::log(std::sin(alpha * u)) - std::log(std::sin(u)) / alpha +
                       (1.0 - alpha) / alpha * (std::log(std::sin((1.0 - alpha) * u)) - std::log(e));
  return std::exp(log_y);
}

// x^{-2}(1 - e^{-ax}(1 + ax)) without cancellation near 0.
double log_type_density(double a, double x) {
  const double y = a * x;
  double g;
  if (y < 1e-3) {
    g = y * y / 2.0 - y * y * y / 3.0 + y * y * y * y / 8.0;
  } else {
    g = -std::expm1(-y) - y * std::exp(-y);
  }
  return g / (x * x);
}

double integrate_zero_one(const std::function<double(double)>& f, double* err = nullptr) {
  boost::math::quadrature::tanh_sinh<double> ts;
  double e = 0.0;
  const double v = ts.integrate(f, 0.0, 1.0, std::sqrt(std::numeric_limits<double>::epsilon()) * 1e-3, &e);
  if (err) *err = e;
  return v;
}

double integrate_one_inf(const std::function<double(double)>& f, double* err = nullptr) {
  boost::math::quadrature::exp_sinh<double> es;
  double e = 0.0;
  const double v = es.integrate([&](double s) { return f(1.0 + s); }, 0.0, kInf,
                                std::sqrt(std::numeric_limits<double>::epsilon()) * 1e-3, &e);
  if (err) *err = e;
  return v;
}

void validate_custom(const bernstein::Custom& c) {
  require(static_cast<bool>(c.levy_density), "custom Bernstein spec needs a Levy density");
  require(c.drift >= 0.0, "custom Bernstein drift must be nonnegative");
  require(c.witness_c > 0.0 && c.witness_gamma < 1.0,
          "custom small-jump witness needs C > 0 and gamma < 1 (x*nu(x) <= C x^{-gamma} near 0)");
  for (int k = 0; k <= 64; ++k) {
    const double x = std::pow(10.0, -8.0 + 8.0 * k / 64.0);
    const double v = c.levy_density(x);
    require(std::isfinite(v) && v >= 0.0, "custom Levy density must be finite and nonnegative");
    require(x * v <= c.witness_c * std::pow(x, -c.witness_gamma) * (1.0 + 1e-9) + 1e-300,
            "custom Levy density violates its small-jump witness at x = " + std::to_string(x));
  }
  const double tail = integrate_one_inf(c.levy_density);
  require(std::isfinite(tail), "custom Levy measure has infinite mass on (1, inf)");
}

}  // namespace

// ---------------------------------------------------------------------------------------------

BernsteinSpec::BernsteinSpec(Kind k) : kind_(std::move(k)) {}

BernsteinSpec BernsteinSpec::stable(double alpha) {
  require(alpha > 0.0 && alpha < 1.0, "stable subordinator needs alpha in (0,1)");
  return BernsteinSpec(bernstein::Stable{alpha});
}

BernsteinSpec BernsteinSpec::relativistic_stable(double alpha, double m) {
  require(alpha > 0.0 && alpha < 1.0 && m > 0.0, "relativistic stable subordinator needs alpha in (0,1), m > 0");
  return BernsteinSpec(bernstein::RelativisticStable{alpha, m});
}

BernsteinSpec BernsteinSpec::gamma(double a) {
  require(a > 0.0, "gamma subordinator needs a > 0");
  return BernsteinSpec(bernstein::Gamma{a});
}

BernsteinSpec BernsteinSpec::log_type(double a) {
  require(a > 0.0, "log-type subordinator needs a > 0");
  return BernsteinSpec(bernstein::LogType{a});
}

BernsteinSpec BernsteinSpec::pure_drift(double drift) {
  require(drift >= 0.0, "pure-drift subordinator needs a nonnegative drift");
  return BernsteinSpec(bernstein::PureDrift{drift});
}

BernsteinSpec BernsteinSpec::custom(bernstein::Custom c) {
  validate_custom(c);
  return BernsteinSpec(std::move(c));
}

BernsteinSpec BernsteinSpec::shifted_pareto(double n) {
  require(n > 0.0, "shifted Pareto density needs n > 0");
  bernstein::Custom c;
  c.levy_density = [n](double x) { return n * std::pow(1.0 + x, -n - 1.0); };
  // x * nu(x) <= n x on (0,1], i.e. C = n with gamma = -1.
  c.witness_c = n;
  c.witness_gamma = -1.0;
  c.density_name = "shifted_pareto";
  c.density_params = {{"n", n}};
  return custom(std::move(c));
}

std::string BernsteinSpec::kind_name() const {
  return std::visit(overloaded{[](const bernstein::Stable&) { return std::string("stable"); },
                               [](const bernstein::RelativisticStable&) { return std::string("relativistic_stable"); },
                               [](const bernstein::Gamma&) { return std::string("gamma"); },
                               [](const bernstein::LogType&) { return std::string("log_type"); },
                               [](const bernstein::PureDrift&) { return std::string("pure_drift"); },
                               [](const bernstein::Custom&) { return std::string("custom"); }},
                    kind_);
}

double BernsteinSpec::drift() const noexcept {
  if (auto* p = std::get_if<bernstein::PureDrift>(&kind_)) return p->drift;
  if (auto* c = std::get_if<bernstein::Custom>(&kind_)) return c->drift;
  return 0.0;
}

double BernsteinSpec::levy_density(double x) const {
  if (!(x > 0.0)) return 0.0;
  return std::visit(
      overloaded{[x](const bernstein::Stable& s) { return s.alpha / std::tgamma(1.0 - s.alpha) * std::pow(x, -1.0 - s.alpha); },
                 [x](const bernstein::RelativisticStable& s) {
                   return s.alpha / std::tgamma(1.0 - s.alpha) * std::exp(-std::pow(s.m, 1.0 / s.alpha) * x) *
                          std::pow(x, -1.0 - s.alpha);
                 },
                 [x](const bernstein::Gamma& g) { return std::exp(-g.a * x) / x; },
                 [x](const bernstein::LogType& l) { return log_type_density(l.a, x); },
                 [](const bernstein::PureDrift&) { return 0.0; },
                 [x](const bernstein::Custom& c) { return c.levy_density(x); }},
      kind_);
}

// ---------------------------------------------------------------------------------------------

LaplaceValue laplace_exponent_report(const BernsteinSpec& spec, double r) {
  if (!(r > 0.0)) throw DomainError("laplace_exponent: r must be positive");
  return std::visit(
      overloaded{
          [r](const bernstein::Stable& s) { return LaplaceValue{std::pow(r, s.alpha), 0.0}; },
          [r](const bernstein::RelativisticStable& s) {
            return LaplaceValue{std::pow(r + std::pow(s.m, 1.0 / s.alpha), s.alpha) - s.m, 0.0};
          },
          [r](const bernstein::Gamma& g) { return LaplaceValue{std::log1p(r / g.a), 0.0}; },
          [r](const bernstein::LogType& l) { return LaplaceValue{r * std::log1p(l.a / r), 0.0}; },
          [r](const bernstein::PureDrift& p) { return LaplaceValue{p.drift * r, 0.0}; },
          [r](const bernstein::Custom& c) {
            auto integrand = [&](double x) { return -std::expm1(-r * x) * c.levy_density(x); };
            double e0 = 0.0, e1 = 0.0;
            const double near = integrate_zero_one(integrand, &e0);
            const double far = integrate_one_inf(integrand, &e1);
            return LaplaceValue{c.drift * r + near + far, e0 + e1};
          }},
      spec.kind());
}

double laplace_exponent(const BernsteinSpec& spec, double r) { return laplace_exponent_report(spec, r).value; }

H1PrimeCheck check_h1prime(const BernsteinSpec& spec, double theta) {
  if (!(theta >= 1.0)) throw DomainError("check_h1prime: theta must be >= 1");
  auto moment = [&]() {
    return integrate_one_inf([&](double x) {
      const double nu = spec.levy_density(x);
      return nu > 0.0 ? std::pow(x, theta / 2.0) * nu : 0.0;
    });
  };
  return std::visit(
      overloaded{
          [&](const bernstein::Stable& s) {
            if (theta < 2.0 * s.alpha) return H1PrimeCheck{true, moment(), "stable: holds since theta < 2 alpha"};
            return H1PrimeCheck{false, s.alpha, "stable: fails since theta >= 2 alpha (tail index alpha)"};
          },
          [&](const bernstein::RelativisticStable&) {
            return H1PrimeCheck{true, moment(), "relativistic stable: exponential tail, holds for all theta"};
          },
          [&](const bernstein::Gamma&) { return H1PrimeCheck{true, moment(), "gamma: exponential tail, holds for all theta"}; },
          [&](const bernstein::LogType&) {
            if (theta < 2.0) return H1PrimeCheck{true, moment(), "log type: holds since theta < 2"};
            return H1PrimeCheck{false, 1.0, "log type: fails since theta >= 2 (tail index 1)"};
          },
          [&](const bernstein::PureDrift&) { return H1PrimeCheck{true, 0.0, "pure drift: no jumps"}; },
          [&](const bernstein::Custom& c) {
            // Least-squares slope of log nu against log x over [1e2, 1e5].
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            int n = 0;
            bool underflow = false;
            for (int k = 0; k <= 30; ++k) {
              const double x = std::pow(10.0, 2.0 + 3.0 * k / 30.0);
              const double v = c.levy_density(x);
              if (!(v > 0.0)) {
                underflow = true;
                break;
              }
              const double lx = std::log(x), ly = std::log(v);
              sx += lx;
              sy += ly;
              sxx += lx * lx;
              sxy += lx * ly;
              ++n;
            }
            double beta = kInf;
            if (!underflow && n > 2) {
              const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
              beta = -slope - 1.0;
            }
            // Steep tails (beta large) are reported as effectively infinite.
            if (beta > 1e3) beta = kInf;
            if (theta / 2.0 < beta) {
              std::ostringstream os;
              os << "custom: fitted tail index " << beta << " exceeds theta/2";
              return H1PrimeCheck{true, moment(), os.str()};
            }
            std::ostringstream os;
            os << "custom: fitted tail index " << beta << " <= theta/2";
            return H1PrimeCheck{false, beta, os.str()};
          }},
      spec.kind());
}

// ---------------------------------------------------------------------------------------------

struct SubordinatorIncrementSampler::JumpTable {
  std::vector<double> log_x;       // nodes in log scale, from log(delta)
  std::vector<double> cumulative;  // int_delta^{x_k} nu
  double rate = 0.0;               // total mass above delta (up to the last node)
  double compensation = 0.0;       // int_0^delta x nu(dx)
};

SubordinatorIncrementSampler::SubordinatorIncrementSampler(BernsteinSpec spec, SamplerOptions options)
    : spec_(std::move(spec)), options_(options) {
  if (!(options_.small_jump_cutoff > 0.0)) throw PreconditionError("small_jump_cutoff must be positive");
  if (const auto* c = std::get_if<bernstein::Custom>(&spec_.kind())) {
    auto table = std::make_shared<JumpTable>();
    const double delta = options_.small_jump_cutoff;
    const double log_lo = std::log(delta);
    const double log_hi = std::log(1e8);
    const int nodes = static_cast<int>(std::ceil((log_hi - log_lo) / std::log(10.0) * 40.0));
    table->log_x.resize(nodes + 1);
    table->cumulative.assign(nodes + 1, 0.0);
    for (int k = 0; k <= nodes; ++k) table->log_x[k] = log_lo + (log_hi - log_lo) * k / nodes;
    auto in_log = [&](double u) {
      const double x = std::exp(u);
      return c->levy_density(x) * x;
    };
    for (int k = 0; k < nodes; ++k) {
      const double seg =
          boost::math::quadrature::gauss_kronrod<double, 15>::integrate(in_log, table->log_x[k], table->log_x[k + 1], 5, 1e-12);
      table->cumulative[k + 1] = table->cumulative[k] + seg;
    }
    table->rate = table->cumulative.back();
    boost::math::quadrature::tanh_sinh<double> ts;
    table->compensation = ts.integrate([&](double x) { return x * c->levy_density(x); }, 0.0, delta);
    table_ = std::move(table);
  }
}

SubordinatorIncrementSampler::~SubordinatorIncrementSampler() = default;
SubordinatorIncrementSampler::SubordinatorIncrementSampler(const SubordinatorIncrementSampler&) = default;
SubordinatorIncrementSampler& SubordinatorIncrementSampler::operator=(const SubordinatorIncrementSampler&) = default;

double SubordinatorIncrementSampler::small_jump_compensation() const noexcept {
  return table_ ? table_->compensation : 0.0;
}

double SubordinatorIncrementSampler::next(double dt, Rng& rng) const {
  return std::visit(
      overloaded{
          [&](const bernstein::Stable& s) { return std::pow(dt, 1.0 / s.alpha) * positive_stable(s.alpha, rng); },
          [&](const bernstein::RelativisticStable& s) {
            // Exponential tilting of the stable increment by e^{-lambda x}; acceptance rate e^{-m dt}.
            const double lambda = std::pow(s.m, 1.0 / s.alpha);
            const double scale = std::pow(dt, 1.0 / s.alpha);
            for (std::size_t attempt = 0; attempt < options_.max_rejections; ++attempt) {
              const double y = scale * positive_stable(s.alpha, rng);
              if (rng.uniform() < std::exp(-lambda * y)) return y;
            }
            std::ostringstream os;
            os << "relativistic stable rejection sampler exceeded " << options_.max_rejections
               << " attempts (dt = " << dt << ", m = " << s.m << ", expected acceptance " << std::exp(-s.m * dt) << ")";
            throw SamplerError(os.str(), options_.max_rejections);
          },
          [&](const bernstein::Gamma& g) { return std::exp(rng.log_gamma_variate(dt)) / g.a; },
          [&](const bernstein::LogType& l) {
            // Compound Poisson with rate a; a jump is (Y/a)/U with Y ~ Exp(1), U ~ U(0,1).
            const std::uint64_t n = rng.poisson(l.a * dt);
            double sum = 0.0;
            for (std::uint64_t k = 0; k < n; ++k) {
              const double y = rng.exponential();
              sum += (y / l.a) / rng.uniform();
            }
            return sum;
          },
          [&](const bernstein::PureDrift& p) { return p.drift * dt; },
          [&](const bernstein::Custom& c) {
            const JumpTable& t = *table_;
            double sum = (c.drift + t.compensation) * dt;
            const std::uint64_t n = rng.poisson(t.rate * dt);
            for (std::uint64_t k = 0; k < n; ++k) {
              const double target = rng.uniform() * t.rate;
              const auto it = std::upper_bound(t.cumulative.begin(), t.cumulative.end(), target);
              const std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - t.cumulative.begin()),
                                                           t.cumulative.size() - 1);
              const std::size_t lo = hi - 1;
              const double span = t.cumulative[hi] - t.cumulative[lo];
              const double w = span > 0.0 ? (target - t.cumulative[lo]) / span : 0.0;
              sum += std::exp(t.log_x[lo] + w * (t.log_x[hi] - t.log_x[lo]));
            }
            return sum;
          }},
      spec_.kind());
}

// ---------------------------------------------------------------------------------------------

double SubordinatorPath::at(double t) const {
  if (t < grid.front() || t > grid.back()) throw DomainError("SubordinatorPath::at: time outside path grid");
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  return values[static_cast<std::size_t>(it - grid.begin()) - 1];
}

SubordinatorPath sample_path(const SubordinatorIncrementSampler& sampler, const TimeGrid& grid, Rng& rng) {
  require_valid_grid(grid);
  SubordinatorPath path;
  path.grid = grid;
  const double h = grid[grid.size() - 1] - grid[grid.size() - 2];
  const double extension = sampler.options().extension;
  if (extension > 0.0) {
    const double end = grid.back() + extension;
    const auto extra = static_cast<std::size_t>(std::ceil(extension / h - 1e-9));
    for (std::size_t j = 1; j <= extra; ++j) path.grid.push_back(std::min(grid.back() + static_cast<double>(j) * h, end));
    path.grid.back() = end;
  }
  path.values.assign(path.grid.size(), 0.0);
  for (std::size_t i = 1; i < path.grid.size(); ++i) {
    path.values[i] = path.values[i - 1] + sampler.next(path.grid[i] - path.grid[i - 1], rng);
  }
  return path;
}

SubordinatorPath sample_path(const BernsteinSpec& spec, const TimeGrid& grid, Rng& rng, const SamplerOptions& options) {
  return sample_path(SubordinatorIncrementSampler(spec, options), grid, rng);
}

SubordinatorPath regularize(const SubordinatorPath& path, double eps, std::optional<double> horizon) {
  if (!(eps > 0.0 && eps < 1.0)) throw PreconditionError("regularize: eps must lie in (0,1)");
  const TimeGrid& g = path.grid;
  if (g.size() < 2 || path.values.size() != g.size()) throw PreconditionError("regularize: malformed path");
  const double last = g.back();
  const double tol = 1e-12 * std::max(1.0, last);
  const double h = horizon.value_or(last - eps);
  if (h + eps > last + tol || h < g.front()) {
    throw PreconditionError("regularize: path too short, it must extend at least eps beyond the horizon");
  }
  // Prefix integrals of the left-constant interpolation.
  std::vector<double> prefix(g.size(), 0.0);
  for (std::size_t k = 1; k < g.size(); ++k) prefix[k] = prefix[k - 1] + path.values[k - 1] * (g[k] - g[k - 1]);
  auto integral_to = [&](double s) {
    if (s >= last) return prefix.back();
    const auto it = std::upper_bound(g.begin(), g.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - g.begin()) - 1;
    return prefix[k] + path.values[k] * (s - g[k]);
  };
  SubordinatorPath out;
  out.eps_applied = eps;
  for (std::size_t k = 0; k < g.size() && g[k] <= h + tol; ++k) {
    const double t = g[k];
    const double upper = std::min(t + eps, last);
    out.grid.push_back(t);
    out.values.push_back((integral_to(upper) - integral_to(t)) / eps + eps * t);
  }
  return out;
}

double inverse_time(const SubordinatorPath& reg, double s) {
  const auto& v = reg.values;
  if (v.size() < 2) throw PreconditionError("inverse_time: path too short");
  const double tol = 1e-12 * std::max(1.0, std::abs(v.back()));
  if (s < v.front() - tol || s > v.back() + tol) throw DomainError("inverse_time: level outside the range of the path");
  s = std::clamp(s, v.front(), v.back());
  const auto it = std::lower_bound(v.begin(), v.end(), s);
  std::size_t hi = static_cast<std::size_t>(it - v.begin());
  if (hi == 0) return reg.grid.front();
  const std::size_t lo = hi - 1;
  const double w = (s - v[lo]) / (v[hi] - v[lo]);
  return reg.grid[lo] + w * (reg.grid[hi] - reg.grid[lo]);
}

// ---------------------------------------------------------------------------------------------

nlohmann::json to_json(const BernsteinSpec& spec) {
  return std::visit(
      overloaded{[](const bernstein::Stable& s) { return nlohmann::json{{"kind", "stable"}, {"alpha", s.alpha}}; },
                 [](const bernstein::RelativisticStable& s) {
                   return nlohmann::json{{"kind", "relativistic_stable"}, {"alpha", s.alpha}, {"m", s.m}};
                 },
                 [](const bernstein::Gamma& g) { return nlohmann::json{{"kind", "gamma"}, {"a", g.a}}; },
                 [](const bernstein::LogType& l) { return nlohmann::json{{"kind", "log_type"}, {"a", l.a}}; },
                 [](const bernstein::PureDrift& p) { return nlohmann::json{{"kind", "pure_drift"}, {"drift", p.drift}}; },
                 [](const bernstein::Custom& c) {
                   if (c.density_name.empty()) {
                     throw PreconditionError("custom Bernstein spec with a programmatic density cannot be serialized");
                   }
                   nlohmann::json j{{"kind", "custom"}, {"drift", c.drift}, {"density", c.density_name}};
                   j["params"] = c.density_params;
                   return j;
                 }},
      spec.kind());
}

BernsteinSpec bernstein_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw PreconditionError("Bernstein spec must be an object with a \"kind\"");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "stable") return BernsteinSpec::stable(j.at("alpha").get<double>());
  if (kind == "relativistic_stable") {
    return BernsteinSpec::relativistic_stable(j.at("alpha").get<double>(), j.at("m").get<double>());
  }
  if (kind == "gamma") return BernsteinSpec::gamma(j.at("a").get<double>());
  if (kind == "log_type") return BernsteinSpec::log_type(j.at("a").get<double>());
  if (kind == "pure_drift") return BernsteinSpec::pure_drift(j.at("drift").get<double>());
  if (kind == "custom") {
    const std::string density = j.at("density").get<std::string>();
    if (density != "shifted_pareto") throw PreconditionError("unknown custom density \"" + density + "\"");
    const double drift = j.value("drift", 0.0);
    auto base = BernsteinSpec::shifted_pareto(j.at("params").at("n").get<double>());
    if (drift == 0.0) return base;
    auto c = std::get<bernstein::Custom>(base.kind());
    c.drift = drift;
    return BernsteinSpec::custom(std::move(c));
  }
  throw PreconditionError("unknown Bernstein kind \"" + kind + "\"");
}

void write_csv(std::ostream& out, const SubordinatorPath& path) {
  out << "t,value\n";
  out.precision(17);
  for (std::size_t i = 0; i < path.grid.size(); ++i) out << path.grid[i] << ',' << path.values[i] << '\n';
}

}  // namespace mkvlevy
