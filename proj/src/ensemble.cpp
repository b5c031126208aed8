#include "mkvlevy/ensemble.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

namespace mkvlevy {

std::vector<double> ParticleEnsemble::coordinate(int k) const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p[k]);
  return out;
}

void require_valid(const ParticleEnsemble& e) {
  if (e.points.empty()) throw PreconditionError("ensemble must hold at least one point");
  if (e.dim < 1 || e.dim > kMaxDim) throw PreconditionError("ensemble dimension out of range");
  for (const auto& p : e.points) {
    if (p.size() != e.dim) throw PreconditionError("ensemble points have mixed dimensions");
    if (!p.allFinite()) throw PreconditionError("ensemble holds a non-finite coordinate");
  }
}

LawMoments moments_of(const ParticleEnsemble& e, double theta) {
  LawMoments m;
  m.theta = theta;
  m.mean = Vec::Zero(e.dim);
  if (e.points.empty()) return m;
  for (const auto& p : e.points) {
    m.mean += p;
    const double r2 = p.squaredNorm();
    m.second_moment += r2;
    m.theta_moment += theta == 2.0 ? r2 : std::pow(std::sqrt(r2), theta);
  }
  const double n = static_cast<double>(e.points.size());
  m.mean /= n;
  m.second_moment /= n;
  m.theta_moment /= n;
  if (!std::isfinite(m.theta_moment)) throw NumericError("ensemble theta-moment overflowed");
  return m;
}

// ---------------------------------------------------------------------------------------------

InitialLaw InitialLaw::point_mass(Vec at) {
  if (at.size() < 1 || at.size() > kMaxDim || !at.allFinite()) throw PreconditionError("point mass location invalid");
  return InitialLaw(initial::PointMass{std::move(at)});
}

InitialLaw InitialLaw::gaussian(Vec mean, double stddev) {
  if (mean.size() < 1 || mean.size() > kMaxDim || !mean.allFinite()) throw PreconditionError("gaussian mean invalid");
  if (!(stddev > 0.0) || !std::isfinite(stddev)) throw PreconditionError("gaussian stddev must be positive");
  return InitialLaw(initial::Gaussian{std::move(mean), stddev});
}

InitialLaw InitialLaw::uniform_box(Vec lo, Vec hi) {
  if (lo.size() != hi.size() || lo.size() < 1 || lo.size() > kMaxDim) throw PreconditionError("uniform box corners mismatch");
  if (!((hi - lo).array() > 0.0).all()) throw PreconditionError("uniform box must have hi > lo");
  return InitialLaw(initial::UniformBox{std::move(lo), std::move(hi)});
}

InitialLaw InitialLaw::from_samples(ParticleEnsemble ensemble, std::string source) {
  require_valid(ensemble);
  return InitialLaw(initial::Samples{std::move(ensemble), std::move(source)});
}

InitialLaw InitialLaw::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError("cannot open sample file " + path);
  std::string line;
  std::getline(in, line);
  ParticleEnsemble e;
  e.dim = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (e.dim == 0) e.dim = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != e.dim || e.dim > kMaxDim) throw PreconditionError("ragged sample file " + path);
    e.points.push_back(Eigen::Map<const Eigen::VectorXd>(row.data(), e.dim));
  }
  return from_samples(std::move(e), path);
}

int InitialLaw::dim() const noexcept {
  return std::visit(
      [](const auto& k) -> int {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, initial::PointMass>) return static_cast<int>(k.at.size());
        else if constexpr (std::is_same_v<T, initial::Gaussian>) return static_cast<int>(k.mean.size());
        else if constexpr (std::is_same_v<T, initial::UniformBox>) return static_cast<int>(k.lo.size());
        else return k.ensemble.dim;
      },
      kind_);
}

ParticleEnsemble InitialLaw::sample(std::size_t n, Rng& rng) const {
  ParticleEnsemble e;
  e.dim = dim();
  e.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec p(e.dim);
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, initial::PointMass>) {
            p = k.at;
          } else if constexpr (std::is_same_v<T, initial::Gaussian>) {
            for (int j = 0; j < e.dim; ++j) p[j] = k.mean[j] + k.stddev * rng.normal();
          } else if constexpr (std::is_same_v<T, initial::UniformBox>) {
            for (int j = 0; j < e.dim; ++j) p[j] = k.lo[j] + (k.hi[j] - k.lo[j]) * rng.uniform();
          } else {
            p = k.ensemble.size() == n ? k.ensemble.points[i] : k.ensemble.points[rng.below(k.ensemble.size())];
          }
        },
        kind_);
    e.points.push_back(p);
  }
  return e;
}

std::vector<double> InitialLaw::density_1d(const std::vector<double>& nodes, double point_width) const {
  if (dim() != 1) throw PreconditionError("density_1d needs a one-dimensional law");
  const auto normal_pdf = [](double x, double m, double s) {
    const double z = (x - m) / s;
    return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
  };
  std::vector<double> u(nodes.size(), 0.0);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double x = nodes[i];
    u[i] = std::visit(
        [&](const auto& k) -> double {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, initial::PointMass>) {
            return normal_pdf(x, k.at[0], point_width);
          } else if constexpr (std::is_same_v<T, initial::Gaussian>) {
            return normal_pdf(x, k.mean[0], k.stddev);
          } else if constexpr (std::is_same_v<T, initial::UniformBox>) {
            return (x >= k.lo[0] && x <= k.hi[0]) ? 1.0 / (k.hi[0] - k.lo[0]) : 0.0;
          } else {
            // kernel estimate with the grid-scale bandwidth
            double s = 0.0;
            for (const auto& p : k.ensemble.points) s += normal_pdf(x, p[0], point_width);
            return s / static_cast<double>(k.ensemble.size());
          }
        },
        kind_);
  }
  return u;
}

nlohmann::json to_json(const InitialLaw& law) {
  const auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return std::visit(
      [&](const auto& k) -> nlohmann::json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, initial::PointMass>) return {{"kind", "point_mass"}, {"at", vec(k.at)}};
        else if constexpr (std::is_same_v<T, initial::Gaussian>)
          return {{"kind", "gaussian"}, {"mean", vec(k.mean)}, {"stddev", k.stddev}};
        else if constexpr (std::is_same_v<T, initial::UniformBox>)
          return {{"kind", "uniform_box"}, {"lo", vec(k.lo)}, {"hi", vec(k.hi)}};
        else return {{"kind", "csv"}, {"path", k.source}};
      },
      law.kind());
}

namespace {
Vec vec_field(const nlohmann::json& j, const char* key, int dim) {
  const auto& v = j.at(key);
  if (v.is_number()) return Vec::Constant(dim, v.get<double>());
  const auto xs = v.get<std::vector<double>>();
  if (static_cast<int>(xs.size()) != dim) throw PreconditionError(std::string("field '") + key + "' has wrong length");
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), dim);
}
}  // namespace

InitialLaw initial_law_from_json(const nlohmann::json& j, int dim) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "point_mass") return InitialLaw::point_mass(vec_field(j, "at", dim));
  if (kind == "gaussian") return InitialLaw::gaussian(vec_field(j, "mean", dim), j.at("stddev").get<double>());
  if (kind == "uniform_box") return InitialLaw::uniform_box(vec_field(j, "lo", dim), vec_field(j, "hi", dim));
  if (kind == "csv") {
    auto law = InitialLaw::from_csv(j.at("path").get<std::string>());
    if (law.dim() != dim) throw PreconditionError("sample file dimension does not match config");
    return law;
  }
  throw PreconditionError("unknown initial law kind \"" + kind + "\"");
}

void write_csv(std::ostream& out, const ParticleEnsemble& e) {
  for (int k = 0; k < e.dim; ++k) out << (k ? "," : "") << "x_" << (k + 1);
  out << '\n';
  out.precision(17);
  for (const auto& p : e.points) {
    for (int k = 0; k < e.dim; ++k) out << (k ? "," : "") << p[k];
    out << '\n';
  }
}

}  // namespace mkvlevy
