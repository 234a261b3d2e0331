#pragma once

#include "wishart_ldp/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace wldp {

// t_k = k * horizon / steps, k = 0..steps, with t_steps == horizon exactly.
std::vector<double> uniform_grid(double horizon, std::size_t steps);

// Throws InvalidArgument unless the grid has >= 2 strictly increasing nodes.
void check_grid(std::span<const double> grid, const char* what);

// A trajectory in the PSD cone: one symmetric matrix per grid node. The
// initial value may be the zero matrix; every value is PSD up to tolerance.
class SpdPath {
 public:
  SpdPath(std::vector<double> grid, std::vector<SymMatrix> values, SpdTolerance tol = {});

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<SymMatrix>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return grid_.size(); }
  int dim() const noexcept { return values_.front().dim(); }
  double horizon() const noexcept { return grid_.back(); }

  const SymMatrix& operator[](std::size_t k) const { return values_[k]; }

 private:
  std::vector<double> grid_;
  std::vector<SymMatrix> values_;
};

struct ScalarPath {
  std::vector<double> grid;
  std::vector<double> values;

  std::size_t size() const noexcept { return grid.size(); }
};

void check_scalar_path(const ScalarPath& p, const char* what);

// Symmetric-matrix function on a grid with no sign constraint: the k_phi of
// the rate functional and the test directions h of the dual functional.
// When origin_extrapolated is set, values[0] was not computed at grid[0] but
// copied from the first interior node.
struct KPath {
  std::vector<double> grid;
  std::vector<SymMatrix> values;
  bool origin_extrapolated = false;

  std::size_t size() const noexcept { return grid.size(); }
};

// Second-order finite-difference derivative at every node: three-point
// central formula in the interior, three-point one-sided formula at the ends
// (plain difference when only two nodes exist). Valid on non-uniform grids.
std::vector<double> fd_derivative(std::span<const double> grid, std::span<const double> values);
std::vector<SymMatrix> fd_derivative(std::span<const double> grid,
                                     std::span<const SymMatrix> values);

// Per-interval trapezoid contributions (size n-1) of samples g on the grid.
std::vector<double> trapezoid_contributions(std::span<const double> grid,
                                            std::span<const double> g);

// Left-to-right sum.
double ordered_sum(std::span<const double> v);

// Trapezoid on every other node followed by one Richardson step, or NaN when
// the interval count is odd or below 2.
double richardson_trapezoid(std::span<const double> grid, std::span<const double> g);

}  // namespace wldp
