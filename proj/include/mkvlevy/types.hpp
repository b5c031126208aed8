#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkvlevy {

// State vectors never exceed this dimension; Eigen keeps them on the stack.
inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

using TimeGrid = std::vector<double>;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SamplerError : public std::runtime_error {
 public:
  SamplerError(const std::string& what, std::size_t attempts)
      : std::runtime_error(what), attempts_(attempts) {}
  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  /// Index of the first step whose output state was non-finite or beyond the overflow guard.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class BudgetError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform grid 0 = t_0 < ... < t_n = horizon.
TimeGrid uniform_grid(double horizon, std::size_t steps);

/// Throws PreconditionError unless the grid starts at 0 and is strictly increasing.
void require_valid_grid(const TimeGrid& grid);

bool is_uniform(const TimeGrid& grid, double rel_tol = 1e-9);

inline Vec zero_vec(int d) { return Vec::Zero(d); }

}  // namespace mkvlevy
