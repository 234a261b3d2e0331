#include "wishart_ldp/riccati.hpp"

#include "wishart_ldp/error.hpp"
#include "wishart_ldp/rate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wldp {

MatrixMeasure MatrixMeasure::zero(int dim) {
  MatrixMeasure mu;
  mu.dim = dim;
  return mu;
}

MatrixMeasure MatrixMeasure::atom(double t, const SymMatrix& weight) {
  MatrixMeasure mu;
  mu.dim = weight.dim();
  mu.atoms.push_back({t, weight});
  return mu;
}

MatrixMeasure MatrixMeasure::constant_density(double t0, double t1, const SymMatrix& value) {
  MatrixMeasure mu;
  mu.dim = value.dim();
  mu.density.breaks = {t0, t1};
  mu.density.values = {value};
  return mu;
}

SymMatrix MatrixMeasure::density_at(double t) const {
  const auto& b = density.breaks;
  if (density.empty() || t < b.front() || t >= b.back()) return SymMatrix::zero(dim);
  const auto it = std::upper_bound(b.begin(), b.end(), t);
  return density.values[static_cast<std::size_t>(it - b.begin()) - 1];
}

double MatrixMeasure::norm() const {
  double n = 0.0;
  for (const Atom& a : atoms) n = std::max(n, norms(a.weight).op);
  for (const SymMatrix& v : density.values) n = std::max(n, norms(v).op);
  return n;
}

void validate(const MatrixMeasure& mu, double horizon) {
  if (mu.dim < 1) fail(ErrorCode::InvalidArgument, "measure: dim must be >= 1");
  if (!(horizon > 0.0)) fail(ErrorCode::InvalidArgument, "measure: horizon must be > 0");
  for (std::size_t i = 0; i < mu.atoms.size(); ++i) {
    const Atom& a = mu.atoms[i];
    const std::string where = "measure: atom " + std::to_string(i);
    if (!(a.t >= 0.0 && a.t <= horizon)) fail(ErrorCode::InvalidArgument, where + " lies outside [0, T]");
    if (i > 0 && !(a.t > mu.atoms[i - 1].t)) {
      fail(ErrorCode::InvalidArgument, where + ": atom times must be strictly increasing");
    }
    if (a.weight.dim() != mu.dim) fail(ErrorCode::InvalidArgument, where + ": dimension mismatch");
    if (!is_psd(a.weight)) fail(ErrorCode::IndefiniteInput, where + ": weight is not PSD");
  }
  const auto& d = mu.density;
  if (d.empty()) {
    if (!d.breaks.empty()) fail(ErrorCode::InvalidArgument, "measure: density breaks without values");
    return;
  }
  if (d.breaks.size() != d.values.size() + 1) {
    fail(ErrorCode::InvalidArgument, "measure: density needs one more break than values");
  }
  check_grid(d.breaks, "measure density");
  if (d.breaks.front() < 0.0 || d.breaks.back() > horizon) {
    fail(ErrorCode::InvalidArgument, "measure: density support outside [0, T]");
  }
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (d.values[i].dim() != mu.dim) fail(ErrorCode::InvalidArgument, "measure: density dimension mismatch");
    if (!is_psd(d.values[i])) {
      fail(ErrorCode::IndefiniteInput, "measure: density value " + std::to_string(i) + " is not PSD");
    }
  }
}

const SymMatrix& RiccatiSolution::initial_left_limit() const {
  if (!jumps.empty() && jumps.front().t == grid.front()) return jumps.front().left;
  return values.front();
}

namespace {

std::vector<double> merged_grid(const MatrixMeasure& mu, double horizon, std::size_t steps) {
  std::vector<double> breaks;
  for (const Atom& a : mu.atoms) breaks.push_back(a.t);
  for (double b : mu.density.breaks) breaks.push_back(b);
  const double snap = 1e-9 * horizon;
  std::vector<double> grid;
  for (double t : uniform_grid(horizon, steps)) {
    const bool near_break = std::any_of(breaks.begin(), breaks.end(), [&](double b) {
      return b != t && std::abs(b - t) < snap;
    });
    if (!near_break) grid.push_back(t);
  }
  grid.insert(grid.end(), breaks.begin(), breaks.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

struct State {
  Eigen::MatrixXd f;
  double s;
};

// d/ds in reversed time s = T - t: F' = F^2 - D, S' = Tr F.
State rhs(const Eigen::MatrixXd& f, const Eigen::MatrixXd& d) { return {f * f - d, f.trace()}; }

}  // namespace

RiccatiSolution solve_riccati(const MatrixMeasure& mu, double horizon, std::size_t grid_n,
                              const RiccatiOptions& opts) {
  validate(mu, horizon);
  RiccatiSolution sol;
  sol.grid = merged_grid(mu, horizon, grid_n);
  const std::size_t n = sol.grid.size();
  sol.values.assign(n, SymMatrix::zero(mu.dim));

  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(mu.dim, mu.dim);
  double s = 0.0;
  std::size_t next_atom = mu.atoms.size();
  std::vector<RiccatiJump> jumps;
  for (std::size_t j = n; j-- > 0;) {
    const double t = sol.grid[j];
    if (j + 1 < n) {
      const double h = sol.grid[j + 1] - t;
      const Eigen::MatrixXd d = mu.density_at(t + 0.5 * h).matrix();
      const State k1 = rhs(f, d);
      const State k2 = rhs(f + 0.5 * h * k1.f, d);
      const State k3 = rhs(f + 0.5 * h * k2.f, d);
      const State k4 = rhs(f + h * k3.f, d);
      f += (h / 6.0) * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f);
      s += (h / 6.0) * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s);
      f = 0.5 * (f + f.transpose()).eval();
    }
    if (!f.allFinite() || f.cwiseAbs().maxCoeff() > opts.blow_up) {
      fail(ErrorCode::BlowUp, "riccati: |F| exceeded " + std::to_string(opts.blow_up) +
                                  " at t = " + std::to_string(t));
    }
    sol.values[j] = SymMatrix(f);
    if (next_atom > 0 && mu.atoms[next_atom - 1].t == t) {
      --next_atom;
      f -= mu.atoms[next_atom].weight.matrix();
      jumps.push_back({t, SymMatrix(f)});
    }
  }
  std::reverse(jumps.begin(), jumps.end());
  sol.jumps = std::move(jumps);
  // s integrated Tr F over [t, T]; the integrand is unaffected by jumps.
  sol.trace_integral = s;
  return sol;
}

double riccati_residual(const RiccatiSolution& sol, const MatrixMeasure& mu) {
  const std::size_t n = sol.grid.size();
  std::vector<double> cuts;
  for (const Atom& a : mu.atoms) cuts.push_back(a.t);
  for (double b : mu.density.breaks) cuts.push_back(b);
  auto is_cut = [&](double t) { return std::find(cuts.begin(), cuts.end(), t) != cuts.end(); };
  auto jump_at = [&](double t) -> const SymMatrix* {
    for (const RiccatiJump& j : sol.jumps) {
      if (j.t == t) return &j.left;
    }
    return nullptr;
  };

  double worst = 0.0;
  std::size_t start = 0;
  while (start + 1 < n) {
    std::size_t end = start + 1;
    while (end + 1 < n && !is_cut(sol.grid[end])) ++end;
    const std::span<const double> t(sol.grid.data() + start, end - start + 1);
    std::vector<SymMatrix> f(sol.values.begin() + static_cast<std::ptrdiff_t>(start),
                             sol.values.begin() + static_cast<std::ptrdiff_t>(end) + 1);
    if (const SymMatrix* left = jump_at(t.back())) f.back() = *left;
    if (t.size() >= 3) {
      const Eigen::MatrixXd d = mu.density_at(0.5 * (t.front() + t[1])).matrix();
      const std::vector<SymMatrix> df = fd_derivative(t, f);
      for (std::size_t j = 0; j < f.size(); ++j) {
        const Eigen::MatrixXd& fj = f[j].matrix();
        worst = std::max(worst, (df[j].matrix() + fj * fj - d).norm());
      }
    }
    start = end;
  }
  return worst;
}

double laplace_transform(const RiccatiSolution& sol, const SymMatrix& x, double delta) {
  if (!is_psd(x)) fail(ErrorCode::IndefiniteInput, "laplace_transform: x must be PSD");
  if (x.dim() != sol.values.front().dim()) {
    fail(ErrorCode::InvalidArgument, "laplace_transform: x dimension does not match the measure");
  }
  const Eigen::MatrixXd& f0 = sol.initial_left_limit().matrix();
  const double exponent = 0.5 * f0.cwiseProduct(x.matrix()).sum() + 0.5 * delta * sol.trace_integral;
  return std::exp(exponent);
}

double laplace_transform(const MatrixMeasure& mu, const SymMatrix& x, double delta, double horizon,
                         std::size_t grid_n) {
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "laplace_transform: delta must be > 0");
  return laplace_transform(solve_riccati(mu, horizon, grid_n), x, delta);
}

double legendre_objective(const SymMatrix& theta, const SymMatrix& m, double delta) {
  if (theta.dim() != m.dim()) fail(ErrorCode::InvalidArgument, "legendre: dimension mismatch");
  const SymMatrix slack = SymMatrix::identity(m.dim()) - 2.0 * theta;
  if (!is_pd(slack)) fail(ErrorCode::DomainError, "legendre: I - 2 Theta must be positive definite");
  return theta.matrix().cwiseProduct(m.matrix()).sum() + 0.5 * delta * log_det_pd(slack);
}

LegendreResult legendre_K(const SymMatrix& m, double delta) {
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "legendre_K: delta must be > 0");
  if (!is_pd(m)) fail(ErrorCode::DomainError, "legendre_K: M must be positive definite");
  const int dim = m.dim();
  SymMatrix theta = 0.5 * (SymMatrix::identity(dim) - delta * inverse_pd(m));
  return {legendre_objective(theta, m, delta), std::move(theta)};
}

double correspondence_check(const SpdPath& phi, double delta) {
  const KPath k = compute_k_path(phi, delta);
  const std::vector<SymMatrix> dphi = fd_derivative(phi.grid(), phi.values());
  const SymMatrix delta_i = SymMatrix::scaled_identity(phi.dim(), delta);
  std::vector<double> g(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) {
    const Eigen::MatrixXd f = 0.5 * k.values[j].matrix();
    g[j] = 0.5 * f.cwiseProduct((dphi[j] - delta_i).matrix()).sum() -
           0.5 * (f * f).cwiseProduct(phi[j].matrix()).sum();
  }
  return ordered_sum(trapezoid_contributions(phi.grid(), g));
}

}  // namespace wldp
