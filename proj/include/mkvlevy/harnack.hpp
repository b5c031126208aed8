#pragma once

#include "mkvlevy/drifts.hpp"
#include "mkvlevy/ensemble.hpp"
#include "mkvlevy/mkv.hpp"
#include "mkvlevy/subordinator.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mkvlevy {

using ScalarFn = std::function<double(double)>;

/// exp(-int_0^t kappa1), Simpson with `panels` panels.
double K1(const ScalarFn& kappa1, double t, std::size_t panels = 1000);

enum class KVariant {
  Printed,  ///< 1/2 int_0^t exp[theta/2 (k1(s)+k2(s)) - 1/2 int_0^s k1] k2(s) ds
  Derived,  ///< 1/2 int_0^t k2(s) exp[1/2 int_0^s k2] ds
};

const char* to_string(KVariant v);
KVariant k_variant_from_string(const std::string& s);

struct KValue {
  double value = 0.0;
  double abs_error = 0.0;  ///< difference against the half-resolution rule
};

KValue K(const ScalarFn& kappa1, const ScalarFn& kappa2, double t, double theta, KVariant variant,
         std::size_t panels = 1000);

/// K1 and K tabulated on a time grid.
struct KernelTable {
  TimeGrid grid;
  std::vector<double> k1;
  std::vector<double> k;
};

KernelTable kernel_table(const MkvDrift& drift, const TimeGrid& grid, KVariant variant);

/// int_0^T K1 dl on a path, left-point Stieltjes sum over the grid intervals inside [0, T].
double stieltjes_k1(const ScalarFn& kappa1, const SubordinatorPath& path, double T);

/// Which K enters the coupling drift xi(t).
enum class XiKernel {
  AtT,       ///< K(t, theta), as printed
  AtHorizon  ///< K(T, theta), the value the closing argument needs
};

/// {|X0-Y0| + K(t) W} sqrt(K1(t)) / int_0^T K1 dl^eps.
double xi(double t, const Vec& x0, const Vec& y0, double w_init, const ScalarFn& kappa1, const ScalarFn& kappa2,
          double theta, const SubordinatorPath& reg_path, double T, KVariant variant = KVariant::Printed,
          XiKernel kernel = XiKernel::AtT);

// ---------------------------------------------------------------------------------------------

struct TestFunction {
  std::string name;
  std::function<double(const Vec&)> f;
  double lower_bound = 0.0;  ///< 1 for the log-Harnack catalog
};

/// one_plus_gaussian, one_plus_cauchy, one_plus_bump, gaussian, cauchy, bump, one.
TestFunction test_function(const std::string& name);
std::vector<std::string> test_function_names();

struct HarnackConfig {
  double T = 1.0;
  double dt = 1e-2;
  double p = 2.0;
  double eps = 0.1;
  Mat sigma = Mat::Identity(1, 1);  ///< constant, invertible
  ScalarFn lambda;                ///< defaults to ||sigma^{-1}|| when empty
  double contact_threshold = 1e-4;  ///< relative: tau when |X-Y| <= threshold (1 + |X0-Y0|)
  KVariant variant = KVariant::Printed;
  XiKernel xi_kernel = XiKernel::AtT;
  BernsteinSpec subordinator = BernsteinSpec::stable(0.75);
  std::size_t cost_paths = 10000;
  TestFunction f = test_function("one_plus_gaussian");
};

double lambda_at(const HarnackConfig& config, double t);

/// ||sigma^{-1}|| <= lambda(t) on the grid; throws PreconditionError otherwise.
void check_h5(const HarnackConfig& config);

struct CouplingRun {
  std::optional<double> tau;  ///< empty when X and Y never met on [0, T]
  double M = 0.0;
  double M_bracket = 0.0;
  double R = 1.0;
  double bracket_bound = 0.0;
  double final_gap = 0.0;
  std::vector<double> times;  ///< filled when recording
  std::vector<Vec> X_path;
  std::vector<Vec> Y_path;
  std::vector<double> gap_trace;
  std::vector<double> xi_trace;
  std::vector<double> bracket_trace;
};

struct CouplingOptions {
  bool record_paths = false;
  /// Replaces the xi term by Phi(t) for every step with t < horizon of the forcing (tests only).
  std::function<Vec(double)> forced_phi;
  /// R = exp(M - bracket_scale/2 <M>); 1 is Girsanov, anything else is a negative control.
  double bracket_scale = 1.0;
  /// Precomputed K1/K on the flow grid; computed per call when null.
  const KernelTable* kernels = nullptr;
};

/// Mean-field law flows from mu0 and nu0 on the physical grid, used frozen by the coupling.
struct ReferenceFlows {
  LawFlow mu;
  LawFlow nu;
};

/// With common_noise both systems share initial uniforms and noise streams, so the gap between the
/// frozen laws carries no independent Monte Carlo error.
ReferenceFlows reference_flows(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                               const InitialLaw& nu0, std::size_t n, std::uint64_t seed, bool common_noise = true);

/// One coupled pair (X, Y) driven by the same Brownian motion run on l^eps.
CouplingRun coupled_solve(const HarnackConfig& config, const MkvDrift& drift, const Vec& x0, const Vec& y0,
                          double w_init, const ReferenceFlows& flows, const SubordinatorPath& reg_path, Rng& rng,
                          const CouplingOptions& options = {});

struct GirsanovCheck {
  double mean = 0.0;
  double se = 0.0;
  std::size_t runs = 0;
  bool pass = false;
};

GirsanovCheck girsanov_mean_check(const std::vector<CouplingRun>& runs);

/// Initial data shared by the inequality checks.
struct InitialPair {
  ParticleEnsemble mu0;  ///< at most kExactAssignmentBudget points
  ParticleEnsemble nu0;
  std::vector<int> assignment;  ///< optimal coupling, mu0[i] <-> nu0[assignment[i]]
  double w2 = 0.0;
  double w_theta = 0.0;
};

InitialPair initial_pair(const InitialLaw& mu0, const InitialLaw& nu0, double theta, std::uint64_t seed,
                         std::size_t n = 512);

struct InverseCost {
  double mean = 0.0;
  double se = 0.0;
  double upper = 0.0;       ///< one-sided 97.5% upper confidence value
  double tail_index = 0.0;  ///< Hill estimate over the top 1% of samples
  bool finite = true;       ///< false when the tail index is below 2
  std::vector<double> samples;
};

/// (int_0^T K1 dS)^{-1} over fresh subordinator paths; paths are nested (the first n of a larger run agree).
InverseCost inverse_cost(const BernsteinSpec& spec, const ScalarFn& kappa1, double T, double dt, std::size_t n_paths,
                         std::uint64_t seed);

/// Hill estimator of the tail index from the largest k order statistics.
double hill_tail_index(std::vector<double> samples, std::size_t k);

enum class Verdict { Pass, Fail, Inconclusive };
const char* to_string(Verdict v);

struct InequalityReport {
  std::string check;
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  double rhs_se = 0.0;
  Verdict verdict = Verdict::Fail;
  nlohmann::json detail = nlohmann::json::object();
  bool pass() const { return verdict == Verdict::Pass; }
};

/// Everything the three checks share for one (drift, mu0, nu0, subordinator) configuration.
struct HarnackSetup {
  HarnackConfig config;
  MkvDrift drift;
  InitialPair pair;
  ReferenceFlows flows;    ///< synchronous, frozen inside the coupling
  ReferenceFlows samples;  ///< independent, for the Monte Carlo sides of the inequalities
  InverseCost cost;
  KernelTable kernels;
};

HarnackSetup prepare_harnack(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                             const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed);

InequalityReport log_harnack_check(const HarnackSetup& setup);
InequalityReport power_harnack_check(const HarnackSetup& setup, std::uint64_t seed);
/// Surrogate E[R log R] over `n_runs` coupling runs against the entropy-cost bound.
InequalityReport entropy_cost_check(const HarnackSetup& setup, std::size_t n_runs, std::uint64_t seed);

InequalityReport log_harnack_check(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                                   const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed);
InequalityReport power_harnack_check(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                                     const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed);
InequalityReport entropy_cost_check(const HarnackConfig& config, const MkvDrift& drift, const InitialLaw& mu0,
                                    const InitialLaw& nu0, std::size_t n_runs, std::uint64_t seed);

/// Batch of coupling runs with pairs drawn from the optimal assignment; run i uses stream {kCoupling, i}.
std::vector<CouplingRun> coupling_runs(const HarnackSetup& setup, std::size_t n_runs, std::uint64_t seed,
                                       const CouplingOptions& options = {});

nlohmann::json to_json(const InequalityReport& r);
void write_csv(std::ostream& out, const CouplingRun& run);

}  // namespace mkvlevy
