#pragma once

#include "mkvlevy/ensemble.hpp"
#include "mkvlevy/rng.hpp"
#include "mkvlevy/sde_core.hpp"
#include "mkvlevy/types.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace mkvlevy {

/// b(t, x, mu) with the monotonicity metadata:
///   2<b(t,x,mu)-b(t,y,nu), x-y> <= kappa1 |x-y|^2 + kappa2 W_theta(mu,nu) |x-y|,
///   |b(t,0,mu)| <= Theta (1 + mu(|.|^theta)^{1/theta}).
struct MkvDrift {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  std::function<Vec(double, const Vec&, const LawView&)> b;
  std::function<double(double)> kappa1;
  std::function<double(double)> kappa2;
  std::function<double(double)> Theta;
  double theta = 1.0;
  bool time_homogeneous = true;
  bool law_dependent = true;
};

namespace drifts {
MkvDrift zero();
MkvDrift constant(Vec v);
/// -beta x
MkvDrift ou(double beta);
/// -beta x + gamma mean(mu)
MkvDrift meanfield_ou(double beta, double gamma);
/// x - |x|^2 x + a (mean(mu) - x)
MkvDrift double_well_mean(double a);
}  // namespace drifts

std::vector<std::string> builtin_drift_names();
/// {"name": "meanfield_ou", "beta": 1, "gamma": 0.5, "theta": 1}
MkvDrift drift_from_json(const nlohmann::json& j, int dim);
nlohmann::json to_json(const MkvDrift& drift);

/// Distribution-free drift x -> b(t, x, mu) with mu frozen to the given moments.
DriftField freeze(const MkvDrift& drift, LawMoments moments);

struct AssumptionCheck {
  bool holds = true;
  int samples = 0;
  double worst_excess = 0.0;
  std::string detail;
};

/// Random (t, x, y, mu, nu) draws, mu and nu Gaussian clouds of 64 points.
AssumptionCheck check_h3(const MkvDrift& drift, int dim, double horizon, Rng& rng, int samples = 200, double box = 3.0);
AssumptionCheck check_h4(const MkvDrift& drift, int dim, double horizon, Rng& rng, int samples = 200, double box = 3.0);

}  // namespace mkvlevy
