#pragma once

#include "mkvlevy/ensemble.hpp"
#include "mkvlevy/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mkvlevy {

enum class DistanceMethod { Sorted1D, ExactAssignment };

struct DistanceReport {
  double value = 0.0;
  double p = 1.0;
  DistanceMethod method = DistanceMethod::Sorted1D;
  std::optional<double> bootstrap_se;
};

inline constexpr std::size_t kExactAssignmentBudget = 512;

/// Quantile coupling. Unequal sizes: the larger sample is subsampled without replacement (seeded).
DistanceReport wasserstein_1d(std::span<const double> x, std::span<const double> y, double p, std::uint64_t seed = 0);

/// Optimal assignment between equal-size point sets, N <= kExactAssignmentBudget.
DistanceReport wasserstein_exact(std::span<const Vec> x, std::span<const Vec> y, double p);

/// Sorted1D for d = 1; exact assignment otherwise, on seeded subsamples of at most the budget.
DistanceReport wasserstein(const ParticleEnsemble& a, const ParticleEnsemble& b, double p, std::uint64_t seed = 0);

/// Bootstrap standard error with jointly resampled indices (x_i, y_i stay paired). B >= 100.
double bootstrap_se(std::span<const double> x, std::span<const double> y, double p, int B, std::uint64_t seed);
double bootstrap_se(const ParticleEnsemble& a, const ParticleEnsemble& b, double p, int B, std::uint64_t seed);

/// Min-cost perfect assignment (Hungarian method). Returns row -> column.
std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost);

nlohmann::json to_json(const DistanceReport& r);

}  // namespace mkvlevy
