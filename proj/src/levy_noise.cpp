#include "mkvlevy/levy_noise.hpp"

#include <cmath>
#include <numbers>
#include <ostream>

namespace mkvlevy {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Vec normal_vector(int dim, Rng& rng) {
  Vec z(dim);
  for (int k = 0; k < dim; ++k) z[k] = rng.normal();
  return z;
}

Mat matrix_sqrt_psd(const Mat& q) {
  Eigen::SelfAdjointEigenSolver<Mat> es(q);
  Vec ev = es.eigenvalues();
  for (int k = 0; k < ev.size(); ++k) ev[k] = std::sqrt(std::max(0.0, ev[k]));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

jumps::CompoundWithDensity jumps::isotropic_power_law(int dim, double c, double beta, double cutoff) {
  if (dim < 1 || dim > kMaxDim) throw PreconditionError("isotropic_power_law: unsupported dimension");
  if (!(c > 0.0) || !(beta > 0.0 && beta < 2.0) || !(cutoff > 0.0 && cutoff <= 1.0)) {
    throw PreconditionError("isotropic_power_law needs c > 0, beta in (0,2), cutoff in (0,1]");
  }
  CompoundWithDensity j;
  const double sphere = 2.0 * std::pow(std::numbers::pi, dim / 2.0) / std::tgamma(dim / 2.0);
  j.levy_density = [c, beta, dim, sphere](const Vec& x) {
    const double r = x.norm();
    return r > 0.0 ? c * std::pow(r, -dim - beta) / sphere : 0.0;
  };
  j.small_jump_cutoff = cutoff;
  j.large_jump_rate = c * std::pow(cutoff, -beta) / beta;
  j.large_jump_sampler = [dim, beta, cutoff](Rng& rng) {
    const double r = cutoff * std::pow(rng.uniform(), -1.0 / beta);
    Vec dir = normal_vector(dim, rng);
    return Vec(r * dir / dir.norm());
  };
  j.small_jump_second_moment = c * std::pow(cutoff, 2.0 - beta) / (2.0 - beta);
  j.mid_jump_compensator = Vec::Zero(dim);
  j.integrability_witness = c / (2.0 - beta) + c / beta;
  j.name = "isotropic_power_law";
  j.params = {{"c", c}, {"beta", beta}, {"cutoff", cutoff}};
  return j;
}

LevyTriplet LevyTriplet::brownian(int dim) {
  return validated(LevyTriplet{Vec::Zero(dim), Mat::Identity(dim, dim), jumps::None{}});
}

LevyTriplet LevyTriplet::deterministic(const Vec& drift) {
  return validated(LevyTriplet{drift, Mat::Zero(drift.size(), drift.size()), jumps::None{}});
}

LevyTriplet LevyTriplet::subordinate(int dim, BernsteinSpec subordinator) {
  return validated(LevyTriplet{Vec::Zero(dim), Mat::Zero(dim, dim), jumps::SubordinateGaussian{std::move(subordinator)}});
}

LevyTriplet validated(LevyTriplet t) {
  const int d = t.dim();
  if (d < 1 || d > kMaxDim) throw PreconditionError("Levy triplet dimension must lie in [1, " + std::to_string(kMaxDim) + "]");
  if (t.covariance.rows() != d || t.covariance.cols() != d) throw PreconditionError("Levy triplet: Q must be d x d");
  const double scale = std::max(1.0, t.covariance.cwiseAbs().maxCoeff());
  if ((t.covariance - t.covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw PreconditionError("Levy triplet: Q must be symmetric");
  }
  Mat q = 0.5 * (t.covariance + t.covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(q);
  Vec ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-12) throw PreconditionError("Levy triplet: Q must be nonnegative definite");
  for (int k = 0; k < d; ++k) ev[k] = std::max(0.0, ev[k]);
  t.covariance = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  if (auto* c = std::get_if<jumps::CompoundWithDensity>(&t.jumps)) {
    if (!(c->small_jump_cutoff > 0.0 && c->small_jump_cutoff <= 1.0)) {
      throw PreconditionError("compound jumps: cutoff must lie in (0, 1]");
    }
    if (!(c->large_jump_rate >= 0.0) || !std::isfinite(c->large_jump_rate)) {
      throw PreconditionError("compound jumps: large-jump rate must be finite and nonnegative");
    }
    if (c->large_jump_rate > 0.0 && !c->large_jump_sampler) throw PreconditionError("compound jumps: sampler missing");
    if (!(c->small_jump_second_moment >= 0.0)) throw PreconditionError("compound jumps: negative small-jump moment");
    if (!std::isfinite(c->integrability_witness) || c->integrability_witness < 0.0) {
      throw PreconditionError("compound jumps: int (1 ^ |x|^2) nu(dx) must be finite");
    }
    if (c->mid_jump_compensator.size() == 0) c->mid_jump_compensator = Vec::Zero(d);
    if (c->mid_jump_compensator.size() != d) throw PreconditionError("compound jumps: compensator dimension mismatch");
  }
  return t;
}

std::complex<double> characteristic_exponent(const LevyTriplet& t, const Vec& u) {
  using namespace std::complex_literals;
  std::complex<double> psi = -1.0i * t.drift.dot(u) + 0.5 * u.dot(t.covariance * u);
  return std::visit(overloaded{[&](const jumps::None&) { return psi; },
                               [&](const jumps::SubordinateGaussian& s) {
                                 const double half_sq = 0.5 * u.squaredNorm();
                                 return half_sq > 0.0 ? psi + laplace_exponent(s.subordinator, half_sq) : psi;
                               },
                               [&](const jumps::CompoundWithDensity&) -> std::complex<double> {
                                 throw PreconditionError("characteristic_exponent: no closed form for compound jumps");
                               }},
                    t.jumps);
}

// ---------------------------------------------------------------------------------------------

IncrementStream::IncrementStream(std::shared_ptr<const LevyTriplet> triplet,
                                 std::shared_ptr<const SubordinatorIncrementSampler> sub, const Rng& base)
    : triplet_(std::move(triplet)),
      sub_(std::move(sub)),
      sqrt_cov_(matrix_sqrt_psd(triplet_->covariance)),
      has_cov_(triplet_->covariance.cwiseAbs().maxCoeff() > 0.0),
      brownian_(base.split(tags::kBrownian)),
      subordinator_(base.split(tags::kSubordinator)),
      jumps_(base.split(tags::kJumps)),
      covariance_(base.split(tags::kInitial)) {}

Vec IncrementStream::next(double t, double dt, std::vector<LargeJump>* large) {
  const int d = triplet_->dim();
  Vec dz = triplet_->drift * dt;
  if (has_cov_) dz += sqrt_cov_ * normal_vector(d, covariance_) * std::sqrt(dt);
  std::visit(overloaded{[](const jumps::None&) {},
                        [&](const jumps::SubordinateGaussian&) {
                          last_dl_ = sub_->next(dt, subordinator_);
                          const Vec w = std::sqrt(last_dl_) * normal_vector(d, brownian_);
                          if (large && w.norm() >= 1.0) large->push_back({t + dt, w});
                          dz += w;
                        },
                        [&](const jumps::CompoundWithDensity& c) {
                          const std::uint64_t n = jumps_.poisson(c.large_jump_rate * dt);
                          for (std::uint64_t k = 0; k < n; ++k) {
                            const double when = t + dt * jumps_.uniform();
                            const Vec j = c.large_jump_sampler(jumps_);
                            if (large && j.norm() >= 1.0) large->push_back({when, j});
                            dz += j;
                          }
                          dz -= c.mid_jump_compensator * dt;
                          if (c.small_jump_second_moment > 0.0) {
                            dz += std::sqrt(c.small_jump_second_moment / d * dt) * normal_vector(d, brownian_);
                          }
                        }},
             triplet_->jumps);
  return dz;
}

NoiseModel::NoiseModel(LevyTriplet triplet, SamplerOptions sampler_options)
    : triplet_(std::make_shared<const LevyTriplet>(validated(std::move(triplet)))) {
  if (auto* s = std::get_if<jumps::SubordinateGaussian>(&triplet_->jumps)) {
    sampler_options.extension = 0.0;
    sub_ = std::make_shared<const SubordinatorIncrementSampler>(s->subordinator, sampler_options);
  }
}

IncrementStream NoiseModel::stream(const Rng& base) const { return IncrementStream(triplet_, sub_, base); }

IncrementStream open_stream(const NoiseModel& model, Rng& rng) { return model.stream(Rng(rng.seed(), rng())); }

NoiseIncrements sample_increments(const NoiseModel& model, const TimeGrid& grid, Rng& rng) {
  require_valid_grid(grid);
  if (!is_uniform(grid)) throw PreconditionError("sample_increments: grid must be uniform");
  NoiseIncrements out;
  out.grid = grid;
  out.dim = model.dim();
  out.dZ.reserve(grid.size() - 1);
  IncrementStream s = open_stream(model, rng);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) out.dZ.push_back(s.next(grid[i], grid[i + 1] - grid[i], &out.large_jumps));
  return out;
}

NoiseIncrements sample_increments(const LevyTriplet& triplet, const TimeGrid& grid, Rng& rng) {
  return sample_increments(NoiseModel(triplet), grid, rng);
}

SubordinateIncrements subordinate_bm_increments(const BernsteinSpec& spec, const TimeGrid& grid, Rng& rng, int dim,
                                                const SamplerOptions& options) {
  require_valid_grid(grid);
  NoiseModel model(LevyTriplet::subordinate(dim, spec), options);
  SubordinateIncrements out;
  out.increments.grid = grid;
  out.increments.dim = dim;
  out.path.grid = grid;
  out.path.values.assign(grid.size(), 0.0);
  IncrementStream s = open_stream(model, rng);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    out.increments.dZ.push_back(s.next(grid[i], grid[i + 1] - grid[i], &out.increments.large_jumps));
    out.path.values[i + 1] = out.path.values[i] + s.last_time_change();
  }
  return out;
}

std::vector<Vec> time_changed_brownian(const std::vector<double>& clock_increments, int dim, Rng& rng) {
  std::vector<Vec> out;
  out.reserve(clock_increments.size());
  for (double dc : clock_increments) out.push_back(std::sqrt(std::max(0.0, dc)) * normal_vector(dim, rng));
  return out;
}

// ---------------------------------------------------------------------------------------------

nlohmann::json to_json(const LevyTriplet& t) {
  nlohmann::json j;
  j["dim"] = t.dim();
  j["drift"] = std::vector<double>(t.drift.data(), t.drift.data() + t.drift.size());
  nlohmann::json q = nlohmann::json::array();
  for (int r = 0; r < t.dim(); ++r) {
    std::vector<double> row;
    for (int c = 0; c < t.dim(); ++c) row.push_back(t.covariance(r, c));
    q.push_back(row);
  }
  j["Q"] = q;
  std::visit(overloaded{[&](const jumps::None&) { j["jumps"] = nullptr; },
                        [&](const jumps::SubordinateGaussian& s) {
                          j["jumps"] = {{"kind", "subordinate_gaussian"}, {"subordinator", to_json(s.subordinator)}};
                        },
                        [&](const jumps::CompoundWithDensity& c) {
                          if (c.name.empty()) throw PreconditionError("programmatic compound jumps cannot be serialized");
                          nlohmann::json jj = c.params;
                          jj["kind"] = c.name;
                          j["jumps"] = jj;
                        }},
             t.jumps);
  return j;
}

LevyTriplet triplet_from_json(const nlohmann::json& j) {
  const int d = j.at("dim").get<int>();
  if (d < 1 || d > kMaxDim) throw PreconditionError("triplet dim out of range");
  LevyTriplet t{Vec::Zero(d), Mat::Zero(d, d), jumps::None{}};
  if (j.contains("drift")) {
    const auto v = j.at("drift").get<std::vector<double>>();
    if (static_cast<int>(v.size()) != d) throw PreconditionError("triplet drift has wrong length");
    for (int k = 0; k < d; ++k) t.drift[k] = v[k];
  }
  if (j.contains("Q")) {
    const auto q = j.at("Q").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(q.size()) != d) throw PreconditionError("triplet Q has wrong shape");
    for (int r = 0; r < d; ++r) {
      if (static_cast<int>(q[r].size()) != d) throw PreconditionError("triplet Q has wrong shape");
      for (int c = 0; c < d; ++c) t.covariance(r, c) = q[r][c];
    }
  }
  if (j.contains("jumps") && !j.at("jumps").is_null()) {
    const auto& jj = j.at("jumps");
    const std::string kind = jj.at("kind").get<std::string>();
    if (kind == "subordinate_gaussian") {
      t.jumps = jumps::SubordinateGaussian{bernstein_from_json(jj.at("subordinator"))};
    } else if (kind == "isotropic_power_law") {
      t.jumps = jumps::isotropic_power_law(d, jj.at("c").get<double>(), jj.at("beta").get<double>(),
                                           jj.value("cutoff", 1e-2));
    } else {
      throw PreconditionError("unknown jump kind \"" + kind + "\"");
    }
  }
  return validated(std::move(t));
}

void write_csv(std::ostream& out, const NoiseIncrements& noise) {
  out << "t";
  for (int k = 0; k < noise.dim; ++k) out << ",dZ_" << (k + 1);
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < noise.dZ.size(); ++i) {
    out << noise.grid[i];
    for (int k = 0; k < noise.dim; ++k) out << ',' << noise.dZ[i][k];
    out << '\n';
  }
}

}  // namespace mkvlevy
