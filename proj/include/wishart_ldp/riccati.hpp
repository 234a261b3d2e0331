#pragma once

// Backward matrix Riccati equation dF/dt + F^2 = mu, F(T) = 0, for a PSD
// matrix measure mu made of atoms and a piecewise-constant density, and the
// Wishart Laplace transform built on it:
//
//   E_x[exp(-1/2 int Tr(X_s dmu_s))] = exp(1/2 Tr(F(0-) x) + delta/2 int_0^T Tr F(s) ds).

#include "wishart_ldp/matrix.hpp"
#include "wishart_ldp/path.hpp"

#include <cstddef>
#include <vector>

namespace wldp {

struct Atom {
  double t;
  SymMatrix weight;
};

// values[i] holds on [breaks[i], breaks[i+1]); zero outside [breaks.front(), breaks.back()).
struct PiecewiseDensity {
  std::vector<double> breaks;
  std::vector<SymMatrix> values;

  bool empty() const noexcept { return values.empty(); }
};

struct MatrixMeasure {
  int dim = 1;
  std::vector<Atom> atoms;  // strictly increasing times
  PiecewiseDensity density;

  static MatrixMeasure zero(int dim);
  static MatrixMeasure atom(double t, const SymMatrix& weight);
  static MatrixMeasure constant_density(double t0, double t1, const SymMatrix& value);

  // Density value on the piece containing t (right-continuous).
  SymMatrix density_at(double t) const;
  // Largest operator norm over atom weights and density values.
  double norm() const;
};

// Throws InvalidArgument on malformed structure (dimensions, ordering, times
// outside [0, T]) and IndefiniteInput on a weight or density value that is not PSD.
void validate(const MatrixMeasure& mu, double horizon);

struct RiccatiJump {
  double t;
  SymMatrix left;  // F(t-) = F(t) - mu({t})
};

struct RiccatiSolution {
  std::vector<double> grid;       // uniform grid merged with atom times and density breaks
  std::vector<SymMatrix> values;  // right-continuous F at each node
  std::vector<RiccatiJump> jumps;
  double trace_integral = 0.0;    // int_0^T Tr F(s) ds, carried as an extra ODE component

  // F(0-): differs from values[0] only when mu has an atom at 0.
  const SymMatrix& initial_left_limit() const;
};

struct RiccatiOptions {
  double blow_up = 1e12;
};

// Backward RK4 with grid_n uniform steps plus extra nodes at atoms and density breaks.
RiccatiSolution solve_riccati(const MatrixMeasure& mu, double horizon, std::size_t grid_n,
                              const RiccatiOptions& opts = {});

// max ||F' + F^2 - density||_2 over nodes, F' by finite differences on each
// atom-free, density-continuous piece.
double riccati_residual(const RiccatiSolution& sol, const MatrixMeasure& mu);

double laplace_transform(const RiccatiSolution& sol, const SymMatrix& x, double delta);
double laplace_transform(const MatrixMeasure& mu, const SymMatrix& x, double delta, double horizon,
                         std::size_t grid_n = 10000);

struct LegendreResult {
  double value;
  SymMatrix theta;
};

// sup over Theta with I - 2 Theta > 0 of Tr(Theta M) + delta/2 ln det(I - 2 Theta),
// attained at Theta = (I - delta M^-1) / 2.
LegendreResult legendre_K(const SymMatrix& m, double delta);

// The objective above; DomainError unless I - 2 Theta is positive definite.
double legendre_objective(const SymMatrix& theta, const SymMatrix& m, double delta);

// 1/2 int Tr(F (phi' - delta I)) - 1/2 int Tr(F^2 phi) with F = k_phi / 2.
double correspondence_check(const SpdPath& phi, double delta);

}  // namespace wldp
