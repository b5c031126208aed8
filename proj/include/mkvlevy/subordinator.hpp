#pragma once

#include "mkvlevy/rng.hpp"
#include "mkvlevy/types.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mkvlevy {

namespace bernstein {

/// phi(r) = r^alpha, Levy density alpha/Gamma(1-alpha) x^{-1-alpha}.
struct Stable {
  double alpha;
};
/// phi(r) = (r + m^{1/alpha})^alpha - m, the exponentially tempered stable law.
struct RelativisticStable {
  double alpha;
  double m;
};
/// phi(r) = log(1 + r/a), Levy density x^{-1} e^{-ax}.
struct Gamma {
  double a;
};
/// phi(r) = r log(1 + a/r), Levy density x^{-2}(1 - e^{-ax}(1 + ax)); a finite measure of mass a.
struct LogType {
  double a;
};
struct PureDrift {
  double drift;
};
/// User-described subordinator. The witness asserts x * density(x) <= witness_c * x^{-witness_gamma}
/// on (0, 1] with witness_gamma < 1, which makes the small jumps summable.
struct Custom {
  double drift = 0.0;
  std::function<double(double)> levy_density;
  double witness_c = 1.0;
  double witness_gamma = 0.0;
  /// Named density for serialization; empty for purely programmatic densities.
  std::string density_name;
  nlohmann::json density_params;
};

}  // namespace bernstein

/// A Bernstein function phi(r) = drift * r + int (1 - e^{-rx}) nu_S(dx) together with its Levy measure.
class BernsteinSpec {
 public:
  using Kind = std::variant<bernstein::Stable, bernstein::RelativisticStable, bernstein::Gamma, bernstein::LogType,
                            bernstein::PureDrift, bernstein::Custom>;

  static BernsteinSpec stable(double alpha);
  static BernsteinSpec relativistic_stable(double alpha, double m);
  static BernsteinSpec gamma(double a);
  static BernsteinSpec log_type(double a);
  static BernsteinSpec pure_drift(double drift);
  static BernsteinSpec custom(bernstein::Custom c);
  /// nu_S(dx) = n (1+x)^{-n-1} dx, whose Laplace exponent is r e^r int_1^inf e^{-ry} y^{-n} dy.
  static BernsteinSpec shifted_pareto(double n);

  const Kind& kind() const noexcept { return kind_; }
  std::string kind_name() const;
  double drift() const noexcept;
  /// Density of nu_S at x > 0 (zero for PureDrift).
  double levy_density(double x) const;

 private:
  explicit BernsteinSpec(Kind k);
  Kind kind_;
};

struct LaplaceValue {
  double value;
  double abs_error;  ///< 0 for closed forms
};

/// phi(r); closed form for catalog kinds, quadrature for Custom.
double laplace_exponent(const BernsteinSpec& spec, double r);
LaplaceValue laplace_exponent_report(const BernsteinSpec& spec, double r);

struct H1PrimeCheck {
  bool holds;
  /// int_{(1,inf)} x^{theta/2} nu_S(dx) when finite, otherwise the tail index beta of nu_S(x) ~ x^{-1-beta}.
  double diagnostic;
  std::string detail;
};

/// Moment condition on the large jumps of the subordinator: int_{(1,inf)} x^{theta/2} nu_S(dx) < inf.
H1PrimeCheck check_h1prime(const BernsteinSpec& spec, double theta);

struct SubordinatorPath {
  TimeGrid grid;
  std::vector<double> values;
  std::optional<double> eps_applied;

  std::size_t size() const noexcept { return grid.size(); }
  /// Cadlag (left-constant) evaluation.
  double at(double t) const;
};

struct SamplerOptions {
  double small_jump_cutoff = 1e-4;
  /// Paths are extended past the last requested grid time by this much.
  double extension = 1.0;
  std::size_t max_rejections = 1'000'000;
};

/// Draws increments S_{t+dt} - S_t. Holds the jump tables built for the Custom kind, so build once and share.
class SubordinatorIncrementSampler {
 public:
  explicit SubordinatorIncrementSampler(BernsteinSpec spec, SamplerOptions options = {});
  ~SubordinatorIncrementSampler();
  SubordinatorIncrementSampler(const SubordinatorIncrementSampler&);
  SubordinatorIncrementSampler& operator=(const SubordinatorIncrementSampler&);

  double next(double dt, Rng& rng) const;

  const BernsteinSpec& spec() const noexcept { return spec_; }
  const SamplerOptions& options() const noexcept { return options_; }
  /// Drift added for the truncated small jumps, int_{(0,delta]} x nu_S(dx) (Custom kind only).
  double small_jump_compensation() const noexcept;

 private:
  struct JumpTable;
  BernsteinSpec spec_;
  SamplerOptions options_;
  std::shared_ptr<const JumpTable> table_;
};

/// Sample path on `grid` extended by options.extension (same trailing step), values[0] = 0.
SubordinatorPath sample_path(const BernsteinSpec& spec, const TimeGrid& grid, Rng& rng, const SamplerOptions& options = {});
SubordinatorPath sample_path(const SubordinatorIncrementSampler& sampler, const TimeGrid& grid, Rng& rng);

/// l^eps_t = (1/eps) int_t^{t+eps} l_s ds + eps t on the grid points t <= horizon (default: last time - eps).
SubordinatorPath regularize(const SubordinatorPath& path, double eps, std::optional<double> horizon = std::nullopt);

/// gamma^eps_s: the time at which a strictly increasing path reaches level s (piecewise-linear).
double inverse_time(const SubordinatorPath& reg_path, double s);

nlohmann::json to_json(const BernsteinSpec& spec);
BernsteinSpec bernstein_from_json(const nlohmann::json& j);

void write_csv(std::ostream& out, const SubordinatorPath& path);

}  // namespace mkvlevy
