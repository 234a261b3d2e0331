#include "wishart_ldp/path.hpp"

#include "wishart_ldp/error.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace wldp {

std::vector<double> uniform_grid(double horizon, std::size_t steps) {
  if (!(horizon > 0.0) || steps < 1) {
    fail(ErrorCode::InvalidArgument, "uniform_grid requires horizon > 0 and steps >= 1");
  }
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) {
    grid[k] = horizon * static_cast<double>(k) / static_cast<double>(steps);
  }
  grid.back() = horizon;
  return grid;
}

void check_grid(std::span<const double> grid, const char* what) {
  if (grid.size() < 2) {
    fail(ErrorCode::InvalidArgument, std::string(what) + ": grid needs at least 2 nodes");
  }
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (!std::isfinite(grid[k])) {
      fail(ErrorCode::InvalidArgument, std::string(what) + ": non-finite grid node");
    }
    if (k > 0 && !(grid[k] > grid[k - 1])) {
      fail(ErrorCode::InvalidArgument,
           std::string(what) + ": grid not strictly increasing at node " + std::to_string(k));
    }
  }
}

SpdPath::SpdPath(std::vector<double> grid, std::vector<SymMatrix> values, SpdTolerance tol)
    : grid_(std::move(grid)), values_(std::move(values)) {
  check_grid(grid_, "SpdPath");
  if (values_.size() != grid_.size()) {
    fail(ErrorCode::InvalidArgument, "SpdPath: " + std::to_string(values_.size()) +
                                         " values for " + std::to_string(grid_.size()) +
                                         " grid nodes");
  }
  const int m = values_.front().dim();
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (values_[k].dim() != m) {
      fail(ErrorCode::InvalidArgument, "SpdPath: mixed dimensions at node " + std::to_string(k));
    }
    if (!is_psd(values_[k], tol)) {
      fail(ErrorCode::IndefiniteInput,
           "SpdPath: value at node " + std::to_string(k) + " is not positive semidefinite");
    }
  }
}

void check_scalar_path(const ScalarPath& p, const char* what) {
  check_grid(p.grid, what);
  if (p.values.size() != p.grid.size()) {
    fail(ErrorCode::InvalidArgument, std::string(what) + ": value count does not match grid");
  }
  for (double v : p.values) {
    if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, std::string(what) + ": non-finite value");
  }
}

namespace {

struct FdWeights {
  double prev, self, next;
};

// Weights on (j-1, j, j+1) for the interior node j.
FdWeights central_weights(double h1, double h2) {
  return {-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2))};
}

template <class T, class Combine>
std::vector<T> fd_generic(std::span<const double> t, std::span<const T> v, Combine combine) {
  const std::size_t n = t.size();
  std::vector<T> d;
  d.reserve(n);
  if (n == 2) {
    const double inv = 1.0 / (t[1] - t[0]);
    const T slope = combine(-inv, v[0], inv, v[1], 0.0, v[1]);
    d.push_back(slope);
    d.push_back(slope);
    return d;
  }
  {
    const double h1 = t[1] - t[0], h2 = t[2] - t[1];
    d.push_back(combine(-(2 * h1 + h2) / (h1 * (h1 + h2)), v[0], (h1 + h2) / (h1 * h2), v[1],
                        -h1 / (h2 * (h1 + h2)), v[2]));
  }
  for (std::size_t j = 1; j + 1 < n; ++j) {
    const FdWeights w = central_weights(t[j] - t[j - 1], t[j + 1] - t[j]);
    d.push_back(combine(w.prev, v[j - 1], w.self, v[j], w.next, v[j + 1]));
  }
  {
    const double h1 = t[n - 2] - t[n - 3], h2 = t[n - 1] - t[n - 2];
    d.push_back(combine(h2 / (h1 * (h1 + h2)), v[n - 3], -(h1 + h2) / (h1 * h2), v[n - 2],
                        (h1 + 2 * h2) / (h2 * (h1 + h2)), v[n - 1]));
  }
  return d;
}

}  // namespace

std::vector<double> fd_derivative(std::span<const double> grid, std::span<const double> values) {
  check_grid(grid, "fd_derivative");
  if (values.size() != grid.size()) fail(ErrorCode::InvalidArgument, "fd_derivative: size mismatch");
  return fd_generic<double>(grid, values, [](double a, double x, double b, double y, double c,
                                             double z) { return a * x + b * y + c * z; });
}

std::vector<SymMatrix> fd_derivative(std::span<const double> grid,
                                     std::span<const SymMatrix> values) {
  check_grid(grid, "fd_derivative");
  if (values.size() != grid.size()) fail(ErrorCode::InvalidArgument, "fd_derivative: size mismatch");
  return fd_generic<SymMatrix>(
      grid, values,
      [](double a, const SymMatrix& x, double b, const SymMatrix& y, double c, const SymMatrix& z) {
        return SymMatrix(a * x.matrix() + b * y.matrix() + c * z.matrix());
      });
}

std::vector<double> trapezoid_contributions(std::span<const double> grid,
                                            std::span<const double> g) {
  std::vector<double> c(grid.size() - 1);
  for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
    c[j] = 0.5 * (grid[j + 1] - grid[j]) * (g[j] + g[j + 1]);
  }
  return c;
}

double ordered_sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double richardson_trapezoid(std::span<const double> grid, std::span<const double> g) {
  const std::size_t intervals = grid.size() - 1;
  if (intervals < 2 || intervals % 2 != 0) return std::numeric_limits<double>::quiet_NaN();
  double fine = 0.0, coarse = 0.0;
  for (std::size_t j = 0; j < intervals; ++j) fine += 0.5 * (grid[j + 1] - grid[j]) * (g[j] + g[j + 1]);
  for (std::size_t j = 0; j < intervals; j += 2) {
    coarse += 0.5 * (grid[j + 2] - grid[j]) * (g[j] + g[j + 2]);
  }
  return fine + (fine - coarse) / 3.0;
}

}  // namespace wldp
