#pragma once

// Independent reference computations for the test suites. Nothing here calls
// into the library's spectral code paths.

#include "wishart_ldp/matrix.hpp"
#include "wishart_ldp/path.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

// A X + X A = B through the Kronecker system (I (x) A + A (x) I) vec X = vec B,
// solved by full-pivot LU.
inline Eigen::MatrixXd sylvester(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = m * m;
  Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index row = j * m + i;  // column-major vec index of X(i, j)
      for (Eigen::Index k = 0; k < m; ++k) {
        sys(row, j * m + k) += a(i, k);  // (A X)_ij
        sys(row, k * m + i) += a(k, j);  // (X A)_ij
      }
    }
  }
  const Eigen::VectorXd vb = Eigen::Map<const Eigen::VectorXd>(b.data(), n);
  const Eigen::VectorXd vx = sys.fullPivLu().solve(vb);
  return Eigen::Map<const Eigen::MatrixXd>(vx.data(), m, m);
}

// O(n^2) running infimum: delta t_j + min_{i <= j} (f_i - delta t_i).
inline std::vector<double> running_inf(const wldp::ScalarPath& f, double delta) {
  std::vector<double> out(f.size());
  for (std::size_t j = 0; j < f.size(); ++j) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i <= j; ++i) lo = std::min(lo, f.values[i] - delta * f.grid[i]);
    out[j] = delta * f.grid[j] + lo;
  }
  return out;
}

inline double integrate(const std::function<double(double)>& g, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, a, b, 20, 1e-14);
}

// Maximum of a concave 1-d function on [lo, hi]: dense scan, then golden section.
inline double maximize_1d(const std::function<double(double)>& g, double lo, double hi, int scan = 2000) {
  double best_x = lo, best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= scan; ++i) {
    const double x = lo + (hi - lo) * i / scan;
    const double v = g(x);
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  const double h = (hi - lo) / scan;
  double a = std::max(lo, best_x - h), b = std::min(hi, best_x + h);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 200; ++it) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (g(c) > g(d)) {
      b = d;
    } else {
      a = c;
    }
  }
  return std::max(best, g(0.5 * (a + b)));
}

// sup over diagonal Theta < I/2 of Tr(Theta M) + delta/2 ln det(I - 2 Theta) for diagonal M.
inline double legendre_grid_search(const Eigen::VectorXd& diag_m, double delta) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < diag_m.size(); ++i) {
    const double mi = diag_m(i);
    total += maximize_1d([&](double th) { return th * mi + 0.5 * delta * std::log(1.0 - 2.0 * th); },
                         -20.0, 0.5 - 1e-9);
  }
  return total;
}

// Random helpers with explicit engines so every test is reproducible.
inline Eigen::MatrixXd random_orthogonal(int m, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) g(i, k) = n01(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ();
}

inline wldp::SymMatrix random_symmetric(int m, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd g(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) g(i, k) = scale * n01(rng);
  }
  return wldp::SymMatrix(0.5 * (g + g.transpose()));
}

// Q diag(u) Q^T with u uniform in [lo, hi].
inline wldp::SymMatrix random_spd(int m, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd d(m);
  for (int i = 0; i < m; ++i) d(i) = u(rng);
  const Eigen::MatrixXd q = random_orthogonal(m, rng);
  return wldp::SymMatrix(q * d.asDiagonal() * q.transpose());
}

}  // namespace oracle
