#include "mkvlevy/metrics.hpp"

#include "mkvlevy/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mkvlevy {

namespace {

double pth(double d, double p) { return p == 1.0 ? d : (p == 2.0 ? d * d : std::pow(d, p)); }
double root(double m, double p) { return p == 1.0 ? m : (p == 2.0 ? std::sqrt(m) : std::pow(m, 1.0 / p)); }

void require_p(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("Wasserstein order p must be >= 1");
}

// first k indices of a seeded random permutation of [0, n)
std::vector<std::size_t> subsample_indices(std::size_t n, std::size_t k, std::uint64_t seed, std::uint64_t which) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, {tags::kSubsample, which});
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double sorted_cost(std::vector<double> a, std::vector<double> b, double p) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += pth(std::abs(a[i] - b[i]), p);
  return root(s / static_cast<double>(a.size()), p);
}

}  // namespace

DistanceReport wasserstein_1d(std::span<const double> x, std::span<const double> y, double p, std::uint64_t seed) {
  require_p(p);
  if (x.empty() || y.empty()) throw DomainError("wasserstein_1d: empty sample");
  std::vector<double> a(x.begin(), x.end());
  std::vector<double> b(y.begin(), y.end());
  if (a.size() > b.size()) {
    std::vector<double> sub;
    for (auto i : subsample_indices(a.size(), b.size(), seed, 0)) sub.push_back(a[i]);
    a.swap(sub);
  } else if (b.size() > a.size()) {
    std::vector<double> sub;
    for (auto i : subsample_indices(b.size(), a.size(), seed, 1)) sub.push_back(b[i]);
    b.swap(sub);
  }
  return {sorted_cost(std::move(a), std::move(b), p), p, DistanceMethod::Sorted1D, std::nullopt};
}

std::vector<int> optimal_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw PreconditionError("assignment needs a square cost matrix");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

DistanceReport wasserstein_exact(std::span<const Vec> x, std::span<const Vec> y, double p) {
  require_p(p);
  if (x.empty() || y.empty()) throw DomainError("wasserstein_exact: empty sample");
  if (x.size() != y.size()) throw PreconditionError("wasserstein_exact: equal sample counts required");
  if (x.size() > kExactAssignmentBudget) {
    throw BudgetError("wasserstein_exact: N = " + std::to_string(x.size()) + " exceeds the assignment budget of " +
                      std::to_string(kExactAssignmentBudget) + "; subsample first");
  }
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) c(i, j) = pth((x[i] - y[j]).norm(), p);
  const auto a = optimal_assignment(c);
  double s = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) s += c(i, a[i]);
  return {root(s / static_cast<double>(n), p), p, DistanceMethod::ExactAssignment, std::nullopt};
}

DistanceReport wasserstein(const ParticleEnsemble& a, const ParticleEnsemble& b, double p, std::uint64_t seed) {
  if (a.dim != b.dim) throw PreconditionError("wasserstein: dimension mismatch");
  if (a.dim == 1) {
    const auto xa = a.coordinate(0);
    const auto xb = b.coordinate(0);
    return wasserstein_1d(xa, xb, p, seed);
  }
  const std::size_t k = std::min({a.size(), b.size(), kExactAssignmentBudget});
  const auto pick = [&](const ParticleEnsemble& e, std::uint64_t which) {
    std::vector<Vec> out;
    if (e.size() == k) return e.points;
    for (auto i : subsample_indices(e.size(), k, seed, which)) out.push_back(e.points[i]);
    return out;
  };
  const auto sa = pick(a, 0);
  const auto sb = pick(b, 1);
  return wasserstein_exact(sa, sb, p);
}

double bootstrap_se(std::span<const double> x, std::span<const double> y, double p, int B, std::uint64_t seed) {
  if (B < 100) throw PreconditionError("bootstrap_se: B must be at least 100");
  if (x.empty() || y.empty()) throw DomainError("bootstrap_se: empty sample");
  const std::size_t n = std::min(x.size(), y.size());
  std::vector<double> reps(B);
  std::vector<double> a(n), b(n);
  for (int r = 0; r < B; ++r) {
    Rng rng = Rng::stream(seed, {tags::kBootstrap, static_cast<std::uint64_t>(r)});
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = rng.below(n);
      a[i] = x[k];
      b[i] = y[k];
    }
    reps[r] = sorted_cost(a, b, p);
  }
  const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / B;
  double ss = 0.0;
  for (double v : reps) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (B - 1));
}

double bootstrap_se(const ParticleEnsemble& a, const ParticleEnsemble& b, double p, int B, std::uint64_t seed) {
  if (a.dim == 1) {
    const auto xa = a.coordinate(0);
    const auto xb = b.coordinate(0);
    return bootstrap_se(xa, xb, p, B, seed);
  }
  if (B < 100) throw PreconditionError("bootstrap_se: B must be at least 100");
  const std::size_t n = std::min({a.size(), b.size(), kExactAssignmentBudget});
  std::vector<double> reps(B);
  std::vector<Vec> sa(n), sb(n);
  for (int r = 0; r < B; ++r) {
    Rng rng = Rng::stream(seed, {tags::kBootstrap, static_cast<std::uint64_t>(r)});
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = rng.below(std::min(a.size(), b.size()));
      sa[i] = a.points[k];
      sb[i] = b.points[k];
    }
    reps[r] = wasserstein_exact(sa, sb, p).value;
  }
  const double mean = std::accumulate(reps.begin(), reps.end(), 0.0) / B;
  double ss = 0.0;
  for (double v : reps) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (B - 1));
}

nlohmann::json to_json(const DistanceReport& r) {
  nlohmann::json j{{"value", r.value},
                   {"p", r.p},
                   {"method", r.method == DistanceMethod::Sorted1D ? "sorted_1d" : "exact_assignment"}};
  j["bootstrap_se"] = r.bootstrap_se ? nlohmann::json(*r.bootstrap_se) : nlohmann::json(nullptr);
  return j;
}

}  // namespace mkvlevy
