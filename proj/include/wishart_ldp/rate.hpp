#pragma once

// Rate functions of the small-noise Wishart family and of its contractions:
//
//   I(phi)   = 1/8 int Tr(k phi k) ds,  k phi + phi k = 2 (phi' - delta I)
//   J(x)     = 1/8 sum_i int (x_i' - delta)^2 / x_i dt
//   K(M)     = Tr(M)/2 - delta/2 ln det M - m delta/2 + m delta/2 ln delta
//   I_max(f) = J(f) + (m - 1) J(f_) with f_(t) = delta t + inf_{s<=t} (f(s) - delta s)
//   K_max(a) = piecewise closed form, one or m copies of the scalar K
//
// Path functionals are discretized with second-order finite differences and
// the composite trapezoid rule. Because phi(0) = 0 makes the Sylvester
// equation singular at the origin, k on the first interval is taken from the
// first interior node.

#include "wishart_ldp/matrix.hpp"
#include "wishart_ldp/path.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace wldp {

struct RateFlags {
  // ||phi(t)/t - delta I||_1 decreases towards t = 0 over the first nodes.
  bool small_time_limit_ok = true;
  // Nodes where a 0/0 integrand (x = 0 with x' = delta) was set to zero.
  std::size_t derivative_clipped = 0;
  // Nodes skipped because phi was singular (only with RateOptions::skip_singular).
  std::size_t singular_sylvester_skipped = 0;
  // The rate is +infinity; value still holds the finite quadrature sum.
  bool infinite = false;
  // Set by rate_I_max when the class-F diagnostic does not return IN_F.
  bool not_in_class_f = false;
};

struct RateReport {
  double value = 0.0;                // left-to-right sum of contributions
  std::vector<double> contributions;  // one per grid interval
  double richardson = 0.0;           // extrapolated value, NaN if unavailable
  RateFlags flags;

  bool is_infinite() const { return flags.infinite; }
};

struct RateOptions {
  bool skip_singular = false;
  SpdTolerance tolerance{};
};

// k_phi at every node. The origin node, where phi(0) = 0, takes the value of
// the first interior node and origin_extrapolated is set. Throws
// DegeneratePath if phi(t) is not strictly positive definite for t >= grid[1].
KPath compute_k_path(const SpdPath& phi, double delta, const RateOptions& opts = {});

RateReport rate_I(const SpdPath& phi, double delta, const RateOptions& opts = {});

// Phi(phi; h) = int Tr(h (phi' - delta I)) - 2 int Tr(h phi h). Bounded above by
// rate_I(phi) with equality at h = k_phi / 4.
double dual_phi(const SpdPath& phi, const KPath& h, double delta);

// Same functional with G written through integration by parts:
// G = Tr(h(T)(phi(T) - delta T I)) - int Tr((phi - delta s I) h') ds.
double dual_phi_by_parts(const SpdPath& phi, const KPath& h, double delta);

RateReport rate_J(std::span<const ScalarPath> x, double delta);

// One scalar term 1/8 int (x' - delta)^2 / x.
RateReport scalar_rate(const ScalarPath& x, double delta);

double rate_K(const SymMatrix& m, double delta);

struct EndpointPath {
  SpdPath path;
  // max over interior nodes of ||2 k' + k^2||_2 (Euler-Lagrange residual).
  double euler_lagrange_residual;
};

// phi(t) = delta t I + t^2 (M - delta I) sampled on the grid.
EndpointPath optimal_endpoint_path(const SymMatrix& m, double delta, std::span<const double> grid);

ScalarPath underline_f(const ScalarPath& f, double delta);

enum class ClassF { InF, NotInF, Inconclusive };
const char* to_string(ClassF c) noexcept;

struct ClassFDiagnostic {
  ClassF verdict = ClassF::Inconclusive;
  double min_density = 0.0;    // min of (H' + H^2)/2 over the contact set
  double terminal_atom = 0.0;  // -H(T)/2
  bool terminal_in_contact = false;
  std::size_t contact_nodes = 0;
  double tolerance = 0.0;
};

// Sign test of the measure (H' + H^2)/2 + atom at T, H = (f' - delta)/(2f),
// restricted to the contact set {f_ = f}.
ClassFDiagnostic class_F_diagnostic(const ScalarPath& f, double delta, double rel_tol = 1e-4);

RateReport rate_I_max(const ScalarPath& f, double delta, int m);

double rate_K_max(double a, double delta, int m);

}  // namespace wldp
