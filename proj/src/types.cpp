#include "mkvlevy/types.hpp"

#include <cmath>

namespace mkvlevy {

TimeGrid uniform_grid(double horizon, std::size_t steps) {
  if (!(horizon > 0.0) || steps == 0) throw PreconditionError("uniform_grid: need horizon > 0 and steps >= 1");
  TimeGrid g(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) g[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
  return g;
}

void require_valid_grid(const TimeGrid& grid) {
  if (grid.size() < 2) throw PreconditionError("time grid needs at least two points");
  if (grid.front() != 0.0) throw PreconditionError("time grid must start at 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw PreconditionError("time grid must be strictly increasing");
  }
}

bool is_uniform(const TimeGrid& grid, double rel_tol) {
  if (grid.size() < 3) return true;
  const double dt = grid[1] - grid[0];
  for (std::size_t i = 2; i < grid.size(); ++i) {
    if (std::abs((grid[i] - grid[i - 1]) - dt) > rel_tol * dt) return false;
  }
  return true;
}

}  // namespace mkvlevy
