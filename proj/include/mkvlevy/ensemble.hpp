#pragma once

#include "mkvlevy/rng.hpp"
#include "mkvlevy/types.hpp"

#include <json.hpp>

#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace mkvlevy {

/// Empirical law: N equally weighted points in R^d.
struct ParticleEnsemble {
  int dim = 1;
  std::vector<Vec> points;

  std::size_t size() const noexcept { return points.size(); }
  /// k-th coordinate of every point, in particle order.
  std::vector<double> coordinate(int k = 0) const;
};

/// Throws PreconditionError for N = 0, mixed dimensions or non-finite coordinates.
void require_valid(const ParticleEnsemble& ensemble);

/// Reductions a drift may read instead of touching every particle.
struct LawMoments {
  Vec mean;
  double theta = 1.0;
  double theta_moment = 0.0;  ///< mu(|.|^theta)
  double second_moment = 0.0;
};

LawMoments moments_of(const ParticleEnsemble& ensemble, double theta);

/// What b(t, x, mu) sees of mu. `points` may be empty when only a moment record exists
/// (frozen Picard flows, grid densities).
struct LawView {
  const LawMoments* moments = nullptr;
  std::span<const Vec> points;
  const LawMoments& m() const { return *moments; }
};

namespace initial {
struct PointMass {
  Vec at;
};
struct Gaussian {
  Vec mean;
  double stddev = 1.0;
};
struct UniformBox {
  Vec lo;
  Vec hi;
};
struct Samples {
  ParticleEnsemble ensemble;
  std::string source;
};
}  // namespace initial

class InitialLaw {
 public:
  using Kind = std::variant<initial::PointMass, initial::Gaussian, initial::UniformBox, initial::Samples>;

  static InitialLaw point_mass(Vec at);
  static InitialLaw gaussian(Vec mean, double stddev);
  static InitialLaw uniform_box(Vec lo, Vec hi);
  static InitialLaw from_samples(ParticleEnsemble ensemble, std::string source = "inline");
  /// CSV with a header line and one point per row.
  static InitialLaw from_csv(const std::string& path);

  int dim() const noexcept;
  const Kind& kind() const noexcept { return kind_; }
  bool is_point_mass() const noexcept { return std::holds_alternative<initial::PointMass>(kind_); }

  /// N i.i.d. draws; a sample-set law is resampled with replacement unless N matches its size.
  ParticleEnsemble sample(std::size_t n, Rng& rng) const;

  /// Density of the first coordinate on the given nodes (d = 1 only). Point masses become a
  /// Gaussian of standard deviation `point_width`.
  std::vector<double> density_1d(const std::vector<double>& nodes, double point_width) const;

 private:
  explicit InitialLaw(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

nlohmann::json to_json(const InitialLaw& law);
InitialLaw initial_law_from_json(const nlohmann::json& j, int dim);

void write_csv(std::ostream& out, const ParticleEnsemble& ensemble);

}  // namespace mkvlevy
