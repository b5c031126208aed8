#include "mkvlevy/drifts.hpp"

#include "mkvlevy/metrics.hpp"

#include <cmath>
#include <limits>

namespace mkvlevy {

namespace {
auto constant_fn(double c) {
  return [c](double) { return c; };
}
}  // namespace

MkvDrift drifts::zero() {
  MkvDrift d;
  d.name = "zero";
  d.b = [](double, const Vec& x, const LawView&) { return Vec(Vec::Zero(x.size())); };
  d.kappa1 = constant_fn(0.0);
  d.kappa2 = constant_fn(0.0);
  d.Theta = constant_fn(0.0);
  d.law_dependent = false;
  return d;
}

MkvDrift drifts::constant(Vec v) {
  MkvDrift d;
  d.name = "constant";
  d.params = {{"v", std::vector<double>(v.data(), v.data() + v.size())}};
  const double norm = v.norm();
  d.b = [v = std::move(v)](double, const Vec& x, const LawView&) {
    if (x.size() != v.size()) throw PreconditionError("constant drift: dimension mismatch");
    return v;
  };
  d.kappa1 = constant_fn(0.0);
  d.kappa2 = constant_fn(0.0);
  d.Theta = constant_fn(norm);
  d.law_dependent = false;
  return d;
}

MkvDrift drifts::ou(double beta) {
  if (!std::isfinite(beta)) throw PreconditionError("ou: beta must be finite");
  MkvDrift d;
  d.name = "ou";
  d.params = {{"beta", beta}};
  d.b = [beta](double, const Vec& x, const LawView&) { return Vec(-beta * x); };
  d.kappa1 = constant_fn(-2.0 * beta);
  d.kappa2 = constant_fn(0.0);
  d.Theta = constant_fn(0.0);
  d.law_dependent = false;
  return d;
}

MkvDrift drifts::meanfield_ou(double beta, double gamma) {
  if (!std::isfinite(beta) || !(gamma >= 0.0)) throw PreconditionError("meanfield_ou: need finite beta and gamma >= 0");
  MkvDrift d;
  d.name = "meanfield_ou";
  d.params = {{"beta", beta}, {"gamma", gamma}};
  d.b = [beta, gamma](double, const Vec& x, const LawView& mu) { return Vec(-beta * x + gamma * mu.m().mean); };
  d.kappa1 = constant_fn(-2.0 * beta);
  d.kappa2 = constant_fn(2.0 * gamma);
  d.Theta = constant_fn(gamma);
  return d;
}

MkvDrift drifts::double_well_mean(double a) {
  if (!(a >= 0.0)) throw PreconditionError("double_well_mean: a must be >= 0");
  MkvDrift d;
  d.name = "double_well_mean";
  d.params = {{"a", a}};
  d.b = [a](double, const Vec& x, const LawView& mu) {
    return Vec(x - x.squaredNorm() * x + a * (mu.m().mean - x));
  };
  d.kappa1 = constant_fn(2.0 * (1.0 - a));
  d.kappa2 = constant_fn(2.0 * a);
  d.Theta = constant_fn(a);
  return d;
}

std::vector<std::string> builtin_drift_names() {
  return {"zero", "constant", "ou", "meanfield_ou", "double_well_mean"};
}

MkvDrift drift_from_json(const nlohmann::json& j, int dim) {
  const std::string name = j.at("name").get<std::string>();
  MkvDrift d;
  if (name == "zero") {
    d = drifts::zero();
  } else if (name == "constant") {
    const auto& v = j.at("v");
    Vec c(dim);
    if (v.is_number()) {
      c.setConstant(v.get<double>());
    } else {
      const auto xs = v.get<std::vector<double>>();
      if (static_cast<int>(xs.size()) != dim) throw PreconditionError("constant drift: 'v' has wrong length");
      for (int k = 0; k < dim; ++k) c[k] = xs[k];
    }
    d = drifts::constant(c);
  } else if (name == "ou") {
    d = drifts::ou(j.at("beta").get<double>());
  } else if (name == "meanfield_ou") {
    d = drifts::meanfield_ou(j.at("beta").get<double>(), j.at("gamma").get<double>());
  } else if (name == "double_well_mean") {
    d = drifts::double_well_mean(j.at("a").get<double>());
  } else {
    throw PreconditionError("unknown drift \"" + name + "\"");
  }
  if (j.contains("theta")) {
    d.theta = j.at("theta").get<double>();
    if (!(d.theta >= 1.0)) throw PreconditionError("drift theta must be >= 1");
    d.params["theta"] = d.theta;
  }
  return d;
}

nlohmann::json to_json(const MkvDrift& drift) {
  nlohmann::json j = drift.params;
  j["name"] = drift.name;
  j["theta"] = drift.theta;
  return j;
}

DriftField freeze(const MkvDrift& drift, LawMoments moments) {
  DriftField f;
  f.name = drift.name + "[frozen]";
  auto m = std::make_shared<const LawMoments>(std::move(moments));
  f.b = [b = drift.b, m](double t, const Vec& x) { return b(t, x, LawView{m.get(), {}}); };
  f.kappa = drift.kappa1;
  f.b0_bound = [b = drift.b, m](double t) { return b(t, Vec::Zero(m->mean.size()), LawView{m.get(), {}}).norm(); };
  return f;
}

namespace {

ParticleEnsemble random_cloud(int dim, double box, Rng& rng) {
  ParticleEnsemble e;
  e.dim = dim;
  Vec centre(dim);
  for (int k = 0; k < dim; ++k) centre[k] = box * (2.0 * rng.uniform() - 1.0);
  const double spread = 0.2 + 1.8 * rng.uniform();
  for (int i = 0; i < 64; ++i) {
    Vec p(dim);
    for (int k = 0; k < dim; ++k) p[k] = centre[k] + spread * rng.normal();
    e.points.push_back(p);
  }
  return e;
}

}  // namespace

AssumptionCheck check_h3(const MkvDrift& drift, int dim, double horizon, Rng& rng, int samples, double box) {
  AssumptionCheck out;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const double t = horizon * rng.uniform();
    const auto mu = random_cloud(dim, box, rng);
    const auto nu = random_cloud(dim, box, rng);
    Vec x(dim), y(dim);
    for (int k = 0; k < dim; ++k) {
      x[k] = box * (2.0 * rng.uniform() - 1.0);
      y[k] = box * (2.0 * rng.uniform() - 1.0);
    }
    const auto mm = moments_of(mu, drift.theta);
    const auto mn = moments_of(nu, drift.theta);
    const Vec bx = drift.b(t, x, LawView{&mm, mu.points});
    const Vec by = drift.b(t, y, LawView{&mn, nu.points});
    const double w = wasserstein(mu, nu, drift.theta).value;
    const double lhs = 2.0 * (bx - by).dot(x - y);
    const double rhs = drift.kappa1(t) * (x - y).squaredNorm() + drift.kappa2(t) * w * (x - y).norm();
    out.worst_excess = std::max(out.worst_excess, lhs - rhs);
    if (lhs > rhs + 1e-6) out.holds = false;
    ++out.samples;
  }
  if (!out.holds) out.detail = drift.name + " violates the declared monotonicity constants (kappa1, kappa2)";
  return out;
}

AssumptionCheck check_h4(const MkvDrift& drift, int dim, double horizon, Rng& rng, int samples, double box) {
  AssumptionCheck out;
  out.worst_excess = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    const double t = horizon * rng.uniform();
    const auto mu = random_cloud(dim, box, rng);
    const auto m = moments_of(mu, drift.theta);
    const double lhs = drift.b(t, Vec::Zero(dim), LawView{&m, mu.points}).norm();
    const double rhs = drift.Theta(t) * (1.0 + std::pow(m.theta_moment, 1.0 / drift.theta));
    out.worst_excess = std::max(out.worst_excess, lhs - rhs);
    if (lhs > rhs + 1e-6) out.holds = false;
    ++out.samples;
  }
  if (!out.holds) out.detail = drift.name + " violates the declared growth bound Theta";
  return out;
}

}  // namespace mkvlevy
