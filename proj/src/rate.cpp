#include "wishart_ldp/rate.hpp"

#include "wishart_ldp/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wldp {

namespace {

constexpr std::size_t kSmallTimeNodes = 10;

bool origin_is_zero(const SymMatrix& v) { return v.matrix().cwiseAbs().maxCoeff() == 0.0; }

// ||phi(t)/t - delta I||_1 (or its scalar analogue) must shrink as t -> 0.
// Returns {ok, bad}; bad marks a path whose first nodes sit far from the
// limit and move away from it, which is reported as an infinite rate.
struct SmallTime {
  bool ok = true;
  bool bad = false;
};

SmallTime small_time_check(std::span<const double> grid, std::span<const double> distance,
                           double scale) {
  SmallTime st;
  const std::size_t count = distance.size();
  if (count < 2) return st;
  if (distance.front() <= 1e-8 * (1.0 + scale)) return st;
  double tm = 0.0, dm = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    tm += grid[j];
    dm += distance[j];
  }
  tm /= static_cast<double>(count);
  dm /= static_cast<double>(count);
  double num = 0.0, den = 0.0;
  for (std::size_t j = 0; j < count; ++j) {
    num += (grid[j] - tm) * (distance[j] - dm);
    den += (grid[j] - tm) * (grid[j] - tm);
  }
  const double slope = den > 0.0 ? num / den : 0.0;
  st.ok = slope > 0.0 && distance.front() < distance.back();
  st.bad = !st.ok && distance.front() > 1e-3 * (1.0 + scale);
  return st;
}

SmallTime matrix_small_time(const SpdPath& phi, double delta) {
  if (phi.grid().front() != 0.0 || !origin_is_zero(phi[0])) return {};
  const std::size_t last = std::min(phi.size() - 1, kSmallTimeNodes);
  std::vector<double> t, d;
  const SymMatrix target = SymMatrix::scaled_identity(phi.dim(), delta);
  for (std::size_t j = 1; j <= last; ++j) {
    t.push_back(phi.grid()[j]);
    d.push_back(norms(phi[j] * (1.0 / phi.grid()[j]) - target).trace_norm);
  }
  return small_time_check(t, d, delta * phi.dim());
}

SmallTime scalar_small_time(const ScalarPath& x, double delta) {
  if (x.grid.front() != 0.0 || x.values.front() != 0.0) return {};
  const std::size_t last = std::min(x.size() - 1, kSmallTimeNodes);
  std::vector<double> t, d;
  for (std::size_t j = 1; j <= last; ++j) {
    t.push_back(x.grid[j]);
    d.push_back(std::abs(x.values[j] / x.grid[j] - delta));
  }
  return small_time_check(t, d, delta);
}

KPath k_path_impl(const SpdPath& phi, double delta, const RateOptions& opts,
                  std::size_t* skipped) {
  if (!(delta >= 0.0)) fail(ErrorCode::InvalidArgument, "delta must be non-negative");
  const std::size_t n = phi.size();
  const int m = phi.dim();
  const std::vector<SymMatrix> dphi = fd_derivative(phi.grid(), phi.values());
  const SymMatrix delta_i = SymMatrix::scaled_identity(m, delta);

  KPath k;
  k.grid = phi.grid();
  k.values.assign(n, SymMatrix::zero(m));
  for (std::size_t j = 0; j < n; ++j) {
    const SymMatrix& p = phi[j];
    const double tol = opts.tolerance.for_matrix(p);
    const bool pd = classify_spd(p, tol).cls == SpdClass::PositiveDefinite;
    if (!pd) {
      if (j == 0) {
        k.origin_extrapolated = true;
        continue;
      }
      if (opts.skip_singular) {
        if (skipped) ++*skipped;
        continue;
      }
      fail(ErrorCode::DegeneratePath, "phi(t) is not positive definite at t = " +
                                          std::to_string(phi.grid()[j]) + " (node " +
                                          std::to_string(j) + ")");
    }
    k.values[j] = solve_sylvester(p, 2.0 * (dphi[j] - delta_i), opts.tolerance);
  }
  if (k.origin_extrapolated) k.values[0] = k.values[1];
  return k;
}

double trace_product(const SymMatrix& a, const SymMatrix& b) {
  return (a.matrix().cwiseProduct(b.matrix())).sum();
}

// Tr(k phi k)
double quadratic_trace(const SymMatrix& k, const SymMatrix& phi) {
  return (k.matrix() * phi.matrix()).cwiseProduct(k.matrix()).sum();
}

RateReport finish(std::span<const double> grid, const std::vector<double>& g, RateFlags flags) {
  RateReport r;
  r.contributions = trapezoid_contributions(grid, g);
  r.value = ordered_sum(r.contributions);
  r.richardson = richardson_trapezoid(grid, g);
  r.flags = flags;
  return r;
}

}  // namespace

KPath compute_k_path(const SpdPath& phi, double delta, const RateOptions& opts) {
  return k_path_impl(phi, delta, opts, nullptr);
}

RateReport rate_I(const SpdPath& phi, double delta, const RateOptions& opts) {
  RateFlags flags;
  const KPath k = k_path_impl(phi, delta, opts, &flags.singular_sylvester_skipped);
  std::vector<double> g(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) g[j] = 0.125 * quadratic_trace(k.values[j], phi[j]);
  const SmallTime st = matrix_small_time(phi, delta);
  flags.small_time_limit_ok = st.ok;
  flags.infinite = st.bad;
  return finish(phi.grid(), g, flags);
}

double dual_phi(const SpdPath& phi, const KPath& h, double delta) {
  if (h.grid != phi.grid()) fail(ErrorCode::InvalidArgument, "dual_phi: h and phi grids differ");
  const std::vector<SymMatrix> dphi = fd_derivative(phi.grid(), phi.values());
  const SymMatrix delta_i = SymMatrix::scaled_identity(phi.dim(), delta);
  std::vector<double> g(phi.size());
  for (std::size_t j = 0; j < phi.size(); ++j) {
    g[j] = trace_product(h.values[j], dphi[j] - delta_i) - 2.0 * quadratic_trace(h.values[j], phi[j]);
  }
  return ordered_sum(trapezoid_contributions(phi.grid(), g));
}

double dual_phi_by_parts(const SpdPath& phi, const KPath& h, double delta) {
  if (h.grid != phi.grid()) fail(ErrorCode::InvalidArgument, "dual_phi: h and phi grids differ");
  const auto& grid = phi.grid();
  const std::size_t n = phi.size();
  const int m = phi.dim();
  const std::vector<SymMatrix> dh = fd_derivative(grid, h.values);
  auto centred = [&](std::size_t j) {
    return phi[j] - SymMatrix::scaled_identity(m, delta * grid[j]);
  };
  std::vector<double> by_parts(n), quad(n);
  for (std::size_t j = 0; j < n; ++j) {
    by_parts[j] = trace_product(centred(j), dh[j]);
    quad[j] = quadratic_trace(h.values[j], phi[j]);
  }
  const double boundary =
      trace_product(h.values[n - 1], centred(n - 1)) - trace_product(h.values[0], centred(0));
  const double g = boundary - ordered_sum(trapezoid_contributions(grid, by_parts));
  return g - 2.0 * ordered_sum(trapezoid_contributions(grid, quad));
}

RateReport scalar_rate(const ScalarPath& x, double delta) {
  check_scalar_path(x, "scalar_rate");
  for (double v : x.values) {
    if (v < 0.0) fail(ErrorCode::DomainError, "scalar_rate: path takes negative values");
  }
  const std::size_t n = x.size();
  const std::vector<double> dx = fd_derivative(x.grid, x.values);
  const double clip_tol = 1e-8 * (1.0 + std::abs(delta));
  RateFlags flags;
  std::vector<double> k(n, 0.0);
  std::vector<double> g(n, 0.0);
  bool origin_singular = false;
  for (std::size_t j = 0; j < n; ++j) {
    const double excess = dx[j] - delta;
    if (x.values[j] > 0.0) {
      k[j] = excess / x.values[j];
      g[j] = 0.125 * k[j] * k[j] * x.values[j];
    } else if (j == 0) {
      origin_singular = true;
    } else if (std::abs(excess) <= clip_tol) {
      ++flags.derivative_clipped;
    } else {
      flags.infinite = true;
    }
  }
  if (origin_singular && n > 1) g[0] = 0.125 * k[1] * k[1] * x.values[0];
  const SmallTime st = scalar_small_time(x, delta);
  flags.small_time_limit_ok = st.ok;
  flags.infinite = flags.infinite || st.bad;
  return finish(x.grid, g, flags);
}

RateReport rate_J(std::span<const ScalarPath> x, double delta) {
  if (x.empty()) fail(ErrorCode::InvalidArgument, "rate_J: no eigenvalue paths");
  RateReport total;
  std::vector<double> g_sum(x.front().size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].grid != x.front().grid) fail(ErrorCode::InvalidArgument, "rate_J: grids differ");
    const RateReport r = scalar_rate(x[i], delta);
    if (i == 0) {
      total.contributions = r.contributions;
    } else {
      for (std::size_t j = 0; j < r.contributions.size(); ++j) {
        total.contributions[j] += r.contributions[j];
      }
    }
    total.flags.small_time_limit_ok = total.flags.small_time_limit_ok && r.flags.small_time_limit_ok;
    total.flags.derivative_clipped += r.flags.derivative_clipped;
    total.flags.infinite = total.flags.infinite || r.flags.infinite;
    total.richardson += r.richardson;
  }
  total.value = ordered_sum(total.contributions);
  return total;
}

double rate_K(const SymMatrix& m, double delta) {
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "rate_K: delta must be > 0");
  const SymEigen e = eigen_decompose(m);
  if (!(e.values(0) > 0.0)) {
    fail(ErrorCode::DomainError, "rate_K: M must be positive definite (det(M) <= 0)");
  }
  double k = 0.0;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    const double l = e.values(i);
    k += 0.5 * (l - delta) - 0.5 * delta * std::log(l / delta);
  }
  return k;
}

EndpointPath optimal_endpoint_path(const SymMatrix& m, double delta, std::span<const double> grid) {
  check_grid(grid, "optimal_endpoint_path");
  if (!is_pd(m)) fail(ErrorCode::DomainError, "optimal_endpoint_path: M must be positive definite");
  const int dim = m.dim();
  std::vector<SymMatrix> values;
  values.reserve(grid.size());
  for (double t : grid) {
    // delta t (1 - t) I + t^2 M, which equals M exactly at t = 1.
    values.push_back(SymMatrix::scaled_identity(dim, delta * t * (1.0 - t)) + (t * t) * m);
  }
  SpdPath path(std::vector<double>(grid.begin(), grid.end()), std::move(values));

  const KPath k = compute_k_path(path, delta);
  const std::size_t first = k.origin_extrapolated ? 1 : 0;
  double residual = 0.0;
  if (k.size() - first >= 3) {
    const std::span<const double> sub_grid(k.grid.data() + first, k.size() - first);
    const std::span<const SymMatrix> sub_k(k.values.data() + first, k.size() - first);
    const std::vector<SymMatrix> dk = fd_derivative(sub_grid, sub_k);
    for (std::size_t j = 1; j + 1 < dk.size(); ++j) {
      const Eigen::MatrixXd& kk = sub_k[j].matrix();
      residual = std::max(residual, (2.0 * dk[j].matrix() + kk * kk).norm());
    }
  }
  return {std::move(path), residual};
}

ScalarPath underline_f(const ScalarPath& f, double delta) {
  check_scalar_path(f, "underline_f");
  ScalarPath out;
  out.grid = f.grid;
  out.values.resize(f.size());
  double running = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) {
    const double shifted = f.values[j] - delta * f.grid[j];
    if (j == 0 || shifted <= running) {
      running = shifted;
      out.values[j] = f.values[j];
    } else {
      out.values[j] = std::min(f.values[j], delta * f.grid[j] + running);
    }
  }
  return out;
}

const char* to_string(ClassF c) noexcept {
  switch (c) {
    case ClassF::InF: return "IN_F";
    case ClassF::NotInF: return "NOT_IN_F";
    case ClassF::Inconclusive: return "INCONCLUSIVE";
  }
  return "UNKNOWN";
}

ClassFDiagnostic class_F_diagnostic(const ScalarPath& f, double delta, double rel_tol) {
  check_scalar_path(f, "class_F_diagnostic");
  const std::size_t n = f.size();
  if (n < 4) fail(ErrorCode::InvalidArgument, "class_F_diagnostic: need at least 4 grid nodes");
  for (std::size_t j = 1; j < n; ++j) {
    if (!(f.values[j] > 0.0)) {
      fail(ErrorCode::DomainError, "class_F_diagnostic: f must be strictly positive on (0, T]");
    }
  }
  const std::vector<double> df = fd_derivative(f.grid, f.values);
  // H is undefined at the origin, so the measure lives on nodes 1..n-1.
  std::vector<double> sub_t(f.grid.begin() + 1, f.grid.end());
  std::vector<double> h(n - 1);
  for (std::size_t j = 1; j < n; ++j) h[j - 1] = (df[j] - delta) / (2.0 * f.values[j]);
  const std::vector<double> dh = fd_derivative(sub_t, h);

  const ScalarPath lower = underline_f(f, delta);
  ClassFDiagnostic d;
  double scale = 1.0;
  std::vector<double> density(h.size());
  for (std::size_t j = 0; j < h.size(); ++j) {
    density[j] = 0.5 * (dh[j] + h[j] * h[j]);
    scale = std::max({scale, std::abs(dh[j]), h[j] * h[j]});
  }
  d.tolerance = rel_tol * scale;
  d.terminal_atom = -0.5 * h.back();
  double min_measure = 0.0;
  for (std::size_t j = 0; j < h.size(); ++j) {
    const double fv = f.values[j + 1];
    const bool contact = fv - lower.values[j + 1] <= 1e-12 * (1.0 + std::abs(fv));
    if (!contact) continue;
    if (d.contact_nodes == 0) d.min_density = density[j];
    d.min_density = std::min(d.min_density, density[j]);
    ++d.contact_nodes;
    min_measure = std::min(min_measure, density[j]);
    if (j + 1 == h.size()) {
      d.terminal_in_contact = true;
      min_measure = std::min(min_measure, d.terminal_atom);
    }
  }
  if (min_measure >= -d.tolerance) {
    d.verdict = ClassF::InF;
  } else if (min_measure < -10.0 * d.tolerance) {
    d.verdict = ClassF::NotInF;
  } else {
    d.verdict = ClassF::Inconclusive;
  }
  return d;
}

RateReport rate_I_max(const ScalarPath& f, double delta, int m) {
  if (m < 1) fail(ErrorCode::InvalidArgument, "rate_I_max: m must be >= 1");
  RateReport r = scalar_rate(f, delta);
  if (m == 1) return r;
  const RateReport lower = scalar_rate(underline_f(f, delta), delta);
  const double w = static_cast<double>(m - 1);
  for (std::size_t j = 0; j < r.contributions.size(); ++j) r.contributions[j] += w * lower.contributions[j];
  r.value = ordered_sum(r.contributions);
  r.richardson += w * lower.richardson;
  r.flags.small_time_limit_ok = r.flags.small_time_limit_ok && lower.flags.small_time_limit_ok;
  r.flags.derivative_clipped += lower.flags.derivative_clipped;
  r.flags.infinite = r.flags.infinite || lower.flags.infinite;
  const bool positive = std::all_of(f.values.begin() + 1, f.values.end(), [](double v) { return v > 0.0; });
  r.flags.not_in_class_f = !positive || f.size() < 4 || class_F_diagnostic(f, delta).verdict != ClassF::InF;
  return r;
}

double rate_K_max(double a, double delta, int m) {
  if (!(a > 0.0)) fail(ErrorCode::DomainError, "rate_K_max: a must be > 0");
  if (!(delta > 0.0)) fail(ErrorCode::InvalidArgument, "rate_K_max: delta must be > 0");
  if (m < 1) fail(ErrorCode::InvalidArgument, "rate_K_max: m must be >= 1");
  const double scalar = 0.5 * (a - delta) - 0.5 * delta * std::log(a / delta);
  return a > delta ? scalar : static_cast<double>(m) * scalar;
}

}  // namespace wldp
