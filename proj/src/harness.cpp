#include "wishart_ldp/harness.hpp"

#include "wishart_ldp/error.hpp"
#include "wishart_ldp/rate.hpp"
#include "wishart_ldp/riccati.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <optional>
#include <sstream>

namespace wldp {

namespace {

struct KindName {
  ExperimentKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::LaplaceCheck, "laplace_check"}, {ExperimentKind::Additivity, "additivity"},
    {ExperimentKind::LdpScan, "ldp_scan"},           {ExperimentKind::EigenContract, "eigen_contract"},
    {ExperimentKind::RateEval, "rate_eval"},         {ExperimentKind::RiccatiEval, "riccati_eval"},
    {ExperimentKind::Simulate, "simulate"},
};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return seed + stream * 0x9E3779B97F4A7C15ULL;
}

std::string pfield(const char* key) { return std::string("payload.") + key; }

void check_keys(const Json& payload, std::initializer_list<const char*> allowed) {
  if (!payload.is_object()) fail(ErrorCode::ParseError, "field 'payload': expected an object");
  for (auto it = payload.begin(); it != payload.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }) ==
        allowed.end()) {
      fail(ErrorCode::ParseError, "field 'payload." + it.key() + "': not a setting of this experiment kind");
    }
  }
}

double positive_at(const Json& j, const std::string& field) {
  const double v = number_at(j, field);
  if (!(v > 0.0)) fail(ErrorCode::ParseError, "field '" + field + "': must be > 0");
  return v;
}

SymMatrix matrix_or(const Json& payload, const char* key, const SymMatrix& fallback) {
  if (!payload.contains(key)) return fallback;
  SymMatrix m = matrix_from_json(payload[key], pfield(key));
  if (m.dim() != fallback.dim()) {
    fail(ErrorCode::ParseError, "field '" + pfield(key) + "': expected a " + std::to_string(fallback.dim()) +
                                    "x" + std::to_string(fallback.dim()) + " matrix");
  }
  return m;
}

SymMatrix psd_matrix_or(const Json& payload, const char* key, const SymMatrix& fallback) {
  SymMatrix m = matrix_or(payload, key, fallback);
  if (!is_psd(m)) fail(ErrorCode::ParseError, "field '" + pfield(key) + "': matrix is not PSD");
  return m;
}

std::vector<SymMatrix> psd_list(const Json& payload, const char* key, int dim) {
  const Json& arr = require(payload, key, "payload");
  if (!arr.is_array() || arr.empty()) fail(ErrorCode::ParseError, "field '" + pfield(key) + "': expected a non-empty array");
  std::vector<SymMatrix> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string f = pfield(key) + "[" + std::to_string(i) + "]";
    SymMatrix m = matrix_from_json(arr[i], f);
    if (m.dim() != dim) fail(ErrorCode::ParseError, "field '" + f + "': dimension differs from sim.m");
    if (!is_psd(m)) fail(ErrorCode::ParseError, "field '" + f + "': matrix is not PSD");
    out.push_back(std::move(m));
  }
  return out;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Strided column of a row-major replicas x width sample table, reduced in replica order.
MeanSe mean_se(const std::vector<double>& table, std::size_t width, std::size_t column) {
  const std::size_t n = table.size() / width;
  MeanSe r;
  for (std::size_t i = 0; i < n; ++i) r.mean += table[i * width + column];
  r.mean /= static_cast<double>(n);
  if (n < 2) return r;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = table[i * width + column] - r.mean;
    ss += d * d;
  }
  r.se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  return r;
}

// z-score; an exact match with zero spread is 0, a mismatch with zero spread is +inf.
double z_score(double diff, double se) {
  if (se > 0.0) return diff / se;
  return std::abs(diff) <= 1e-15 ? 0.0 : std::numeric_limits<double>::infinity();
}

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json stats_json(const RepairStats& s) {
  return Json{{"steps", s.steps},
              {"repaired", s.repaired},
              {"repair_rate", s.repair_rate()},
              {"halvings", s.halvings},
              {"clamp_fallbacks", s.clamp_fallbacks}};
}

std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// exp(-Tr(X_T Theta)) under the Wishart law started at x: the process divided
// by eps^2 is Wishart with parameter delta/eps^2.
double wishart_laplace_closed_form(const SymMatrix& theta, const SymMatrix& x, double delta, double eps,
                                   double horizon) {
  const int m = theta.dim();
  if (eps == 0.0) {
    return std::exp(-(x + SymMatrix::scaled_identity(m, delta * horizon)).matrix().cwiseProduct(theta.matrix()).sum());
  }
  const double e2 = eps * eps;
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(m, m) + 2.0 * horizon * e2 * theta.matrix();
  const double log_det = log_det_pd(SymMatrix(a));
  const Eigen::MatrixXd ainv_theta = a.ldlt().solve(theta.matrix());
  return std::exp(-0.5 * delta / e2 * log_det - x.matrix().cwiseProduct(ainv_theta).sum());
}

struct RiccatiCheck {
  double value;
  double max_eigenvalue;
};

RiccatiCheck wishart_laplace_riccati(const SymMatrix& theta, const SymMatrix& x, double delta, double eps,
                                     double horizon) {
  const double e2 = eps * eps;
  const MatrixMeasure mu = MatrixMeasure::atom(horizon, (2.0 * e2) * theta);
  const RiccatiSolution sol = solve_riccati(mu, horizon, 10000);
  double lmax = -std::numeric_limits<double>::infinity();
  for (const SymMatrix& f : sol.values) lmax = std::max(lmax, max_eigenvalue(f));
  for (const RiccatiJump& j : sol.jumps) lmax = std::max(lmax, max_eigenvalue(j.left));
  return {laplace_transform(sol, x * (1.0 / e2), delta / e2), lmax};
}

// ---------------------------------------------------------------- laplace_check

struct LaplaceCase {
  SimConfig sim;
  std::vector<SymMatrix> thetas;
  SymMatrix x;
};

struct LaplaceParams {
  std::vector<LaplaceCase> cases;
  double z_max = 3.0;
};

std::vector<SymMatrix> default_thetas(int m) {
  const Eigen::Matrix3d fixed{{0.3, 0.1, 0.05}, {0.1, 0.25, 0.08}, {0.05, 0.08, 0.2}};
  Eigen::VectorXd ramp(m);
  for (int i = 0; i < m; ++i) ramp(i) = m == 1 ? 0.2 : 0.05 + 0.35 * i / (m - 1);
  return {SymMatrix::zero(m), SymMatrix::scaled_identity(m, 0.1), SymMatrix::scaled_identity(m, 0.3),
          SymMatrix::diagonal(ramp), SymMatrix(Eigen::MatrixXd(fixed.topLeftCorner(m, m)))};
}

LaplaceParams laplace_params(const ExperimentSpec& spec) {
  const Json& p = spec.payload;
  check_keys(p, {"thetas", "battery", "x", "z_max"});
  LaplaceParams lp;
  if (p.contains("z_max")) lp.z_max = positive_at(p["z_max"], pfield("z_max"));
  const bool battery = p.contains("battery") || !p.contains("thetas");
  if (battery) {
    if (p.contains("battery") && p["battery"] != "default") {
      fail(ErrorCode::ParseError, "field 'payload.battery': only \"default\" is available");
    }
    if (p.contains("thetas") || p.contains("x")) {
      fail(ErrorCode::ParseError, "field 'payload': the default battery takes neither thetas nor x");
    }
    for (int m = 1; m <= 3; ++m) {
      LaplaceCase c{spec.sim, default_thetas(m), SymMatrix::zero(m)};
      c.sim.dim = m;
      c.sim.delta = m + 1.0;
      lp.cases.push_back(std::move(c));
    }
    return lp;
  }
  const int m = spec.sim.dim;
  lp.cases.push_back({spec.sim, psd_list(p, "thetas", m), psd_matrix_or(p, "x", SymMatrix::zero(m))});
  return lp;
}

struct LaplaceEstimate {
  std::vector<MeanSe> means;
  RepairStats repair;
};

LaplaceEstimate estimate_laplace(const SimConfig& sim, const SymMatrix& x0, const std::vector<SymMatrix>& thetas) {
  const std::size_t width = thetas.size();
  std::vector<double> samples(sim.replicas * width);
  std::vector<RepairStats> stats(sim.replicas);
  for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
    stats[r] = run_wishart_replica(sim, x0, r, [&](std::size_t step, double, const Eigen::Ref<const Eigen::MatrixXd>& x) {
      if (step == sim.steps) {
        for (std::size_t k = 0; k < width; ++k) {
          samples[r * width + k] = std::exp(-x.cwiseProduct(thetas[k].matrix()).sum());
        }
      }
      return true;
    });
  });
  LaplaceEstimate e;
  for (std::size_t k = 0; k < width; ++k) e.means.push_back(mean_se(samples, width, k));
  for (const RepairStats& s : stats) e.repair += s;
  return e;
}

ExperimentReport run_laplace(const ExperimentSpec& spec) {
  const LaplaceParams lp = laplace_params(spec);
  ExperimentReport rep;
  Json cases = Json::array();
  std::ostringstream csv;
  csv << "m,delta,theta_index,analytic,riccati,mean,se,z\n";
  bool pass = true;
  double riccati_lmax = -std::numeric_limits<double>::infinity();
  for (const LaplaceCase& c : lp.cases) {
    const LaplaceEstimate est = estimate_laplace(c.sim, c.x, c.thetas);
    Json entries = Json::array();
    for (std::size_t k = 0; k < c.thetas.size(); ++k) {
      const double analytic = wishart_laplace_closed_form(c.thetas[k], c.x, c.sim.delta, c.sim.epsilon, c.sim.horizon);
      double riccati = std::numeric_limits<double>::quiet_NaN();
      if (c.sim.epsilon > 0.0) {
        const RiccatiCheck rc = wishart_laplace_riccati(c.thetas[k], c.x, c.sim.delta, c.sim.epsilon, c.sim.horizon);
        riccati = rc.value;
        riccati_lmax = std::max(riccati_lmax, rc.max_eigenvalue);
      }
      const MeanSe& ms = est.means[k];
      const double z = z_score(ms.mean - analytic, ms.se);
      const bool ok = std::abs(z) <= lp.z_max;
      pass = pass && ok;
      entries.push_back({{"theta", to_json(c.thetas[k])},
                         {"analytic", analytic},
                         {"riccati", finite_or_null(riccati)},
                         {"mean", ms.mean},
                         {"se", ms.se},
                         {"z", finite_or_null(z)},
                         {"pass", ok}});
      csv << c.sim.dim << ',' << csv_number(c.sim.delta) << ',' << k << ',' << csv_number(analytic) << ','
          << csv_number(riccati) << ',' << csv_number(ms.mean) << ',' << csv_number(ms.se) << ','
          << csv_number(z) << '\n';
    }
    cases.push_back({{"m", c.sim.dim},
                     {"delta", c.sim.delta},
                     {"x", to_json(c.x)},
                     {"replicas", c.sim.replicas},
                     {"steps", c.sim.steps},
                     {"repair", stats_json(est.repair)},
                     {"thetas", std::move(entries)}});
  }
  rep.verdict = pass ? Verdict::Pass : Verdict::Fail;
  rep.json["result"] = {{"cases", std::move(cases)},
                        {"z_max", lp.z_max},
                        {"riccati_max_eigenvalue", finite_or_null(riccati_lmax)}};
  rep.csv = csv.str();
  return rep;
}

// ---------------------------------------------------------------- additivity

struct AdditivityParams {
  double delta2;
  SymMatrix x1, x2;
  std::vector<SymMatrix> thetas;
  double z_max = 3.0;
};

AdditivityParams additivity_params(const ExperimentSpec& spec) {
  const Json& p = spec.payload;
  check_keys(p, {"delta2", "x1", "x2", "thetas", "z_max"});
  const int m = spec.sim.dim;
  AdditivityParams ap;
  ap.delta2 = positive_at(require(p, "delta2", "payload"), pfield("delta2"));
  ap.x1 = psd_matrix_or(p, "x1", SymMatrix::zero(m));
  ap.x2 = psd_matrix_or(p, "x2", SymMatrix::zero(m));
  ap.thetas = p.contains("thetas")
                  ? psd_list(p, "thetas", m)
                  : std::vector<SymMatrix>{SymMatrix::scaled_identity(m, 0.1), SymMatrix::scaled_identity(m, 0.3)};
  if (p.contains("z_max")) ap.z_max = positive_at(p["z_max"], pfield("z_max"));
  return ap;
}

ExperimentReport run_additivity(const ExperimentSpec& spec) {
  const AdditivityParams ap = additivity_params(spec);
  const SimConfig& sim = spec.sim;
  const std::size_t width = ap.thetas.size();
  SimConfig second = sim;
  second.delta = ap.delta2;
  second.seed = stream_seed(sim.seed, 1);
  SimConfig joint = sim;
  joint.delta = sim.delta + ap.delta2;
  joint.seed = stream_seed(sim.seed, 2);

  // Sum of two independent processes, one sample table per pipeline.
  std::vector<double> summed(sim.replicas * width);
  for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
    Eigen::MatrixXd end1;
    auto keep = [&](Eigen::MatrixXd& out, std::size_t steps) {
      return [&out, steps](std::size_t step, double, const Eigen::Ref<const Eigen::MatrixXd>& x) {
        if (step == steps) out = x;
        return true;
      };
    };
    Eigen::MatrixXd end2;
    run_wishart_replica(sim, ap.x1, r, keep(end1, sim.steps));
    run_wishart_replica(second, ap.x2, r, keep(end2, sim.steps));
    const Eigen::MatrixXd s = end1 + end2;
    for (std::size_t k = 0; k < width; ++k) summed[r * width + k] = std::exp(-s.cwiseProduct(ap.thetas[k].matrix()).sum());
  });
  const LaplaceEstimate direct = estimate_laplace(joint, ap.x1 + ap.x2, ap.thetas);

  bool pass = true;
  Json entries = Json::array();
  std::ostringstream csv;
  csv << "theta_index,analytic,sum_mean,sum_se,direct_mean,direct_se,z_sum,z_direct,z_two_sample\n";
  for (std::size_t k = 0; k < width; ++k) {
    const double analytic =
        wishart_laplace_closed_form(ap.thetas[k], ap.x1 + ap.x2, joint.delta, sim.epsilon, sim.horizon);
    const MeanSe s = mean_se(summed, width, k);
    const MeanSe& d = direct.means[k];
    const double z_sum = z_score(s.mean - analytic, s.se);
    const double z_direct = z_score(d.mean - analytic, d.se);
    const double z_two = z_score(s.mean - d.mean, std::hypot(s.se, d.se));
    const bool ok = std::abs(z_sum) <= ap.z_max && std::abs(z_direct) <= ap.z_max && std::abs(z_two) <= ap.z_max;
    pass = pass && ok;
    entries.push_back({{"theta", to_json(ap.thetas[k])},
                       {"analytic", analytic},
                       {"sum", {{"mean", s.mean}, {"se", s.se}, {"z", finite_or_null(z_sum)}}},
                       {"direct", {{"mean", d.mean}, {"se", d.se}, {"z", finite_or_null(z_direct)}}},
                       {"z_two_sample", finite_or_null(z_two)},
                       {"pass", ok}});
    csv << k << ',' << csv_number(analytic) << ',' << csv_number(s.mean) << ',' << csv_number(s.se) << ','
        << csv_number(d.mean) << ',' << csv_number(d.se) << ',' << csv_number(z_sum) << ','
        << csv_number(z_direct) << ',' << csv_number(z_two) << '\n';
  }
  ExperimentReport rep;
  rep.verdict = pass ? Verdict::Pass : Verdict::Fail;
  rep.json["result"] = {{"delta1", sim.delta}, {"delta2", ap.delta2}, {"thetas", std::move(entries)}, {"z_max", ap.z_max}};
  rep.csv = csv.str();
  return rep;
}

// ---------------------------------------------------------------- ldp_scan

struct LdpParams {
  std::vector<double> epsilons;
  double radius;
  std::size_t min_hits = 20;
  std::vector<SymMatrix> poly;  // phi(t) = sum_k t^(k+1) poly[k]
  std::string target_name;
};

SpdPath polynomial_path(const std::vector<SymMatrix>& poly, const std::vector<double>& grid) {
  std::vector<SymMatrix> values;
  values.reserve(grid.size());
  for (double t : grid) {
    SymMatrix v = SymMatrix::zero(poly.front().dim());
    double power = t;
    for (const SymMatrix& a : poly) {
      v += power * a;
      power *= t;
    }
    values.push_back(std::move(v));
  }
  return SpdPath(grid, std::move(values));
}

LdpParams ldp_params(const ExperimentSpec& spec) {
  const Json& p = spec.payload;
  check_keys(p, {"epsilons", "radius", "target", "min_hits"});
  LdpParams lp;
  lp.epsilons = numbers_at(require(p, "epsilons", "payload"), pfield("epsilons"));
  if (lp.epsilons.empty()) fail(ErrorCode::ParseError, "field 'payload.epsilons': empty");
  for (std::size_t i = 0; i < lp.epsilons.size(); ++i) {
    if (!(lp.epsilons[i] > 0.0)) fail(ErrorCode::ParseError, "field 'payload.epsilons': values must be > 0");
    if (i > 0 && !(lp.epsilons[i] < lp.epsilons[i - 1])) {
      fail(ErrorCode::ParseError, "field 'payload.epsilons': must be strictly decreasing");
    }
  }
  const double r = number_at(require(p, "radius", "payload"), pfield("radius"));
  if (!(r > 0.0)) fail(ErrorCode::ParseError, "field 'payload.radius': tube radius must be > 0 (r = 0 is an empty tube)");
  lp.radius = r;
  if (p.contains("min_hits")) lp.min_hits = count_at(p["min_hits"], pfield("min_hits"));
  const int m = spec.sim.dim;
  const Json target = p.value("target", Json("zero_rate"));
  if (target == "zero_rate") {
    lp.poly = {SymMatrix::scaled_identity(m, spec.sim.delta)};
    lp.target_name = "zero_rate";
  } else if (target.is_object() && target.contains("poly")) {
    const Json& poly = target["poly"];
    if (!poly.is_array() || poly.empty()) fail(ErrorCode::ParseError, "field 'payload.target.poly': expected a non-empty array");
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const std::string f = "payload.target.poly[" + std::to_string(i) + "]";
      SymMatrix a = matrix_from_json(poly[i], f);
      if (a.dim() != m) fail(ErrorCode::ParseError, "field '" + f + "': dimension differs from sim.m");
      lp.poly.push_back(std::move(a));
    }
    lp.target_name = "poly";
  } else {
    fail(ErrorCode::ParseError, "field 'payload.target': expected \"zero_rate\" or {\"poly\": [...]}");
  }
  try {
    polynomial_path(lp.poly, uniform_grid(spec.sim.horizon, spec.sim.steps));
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, std::string("field 'payload.target': ") + e.what());
  }
  return lp;
}

void least_squares(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  slope = sxx > 0.0 ? sxy / sxx : 0.0;
  intercept = my - slope * mx;
}

ExperimentReport run_ldp_scan(const ExperimentSpec& spec) {
  const LdpParams lp = ldp_params(spec);
  const SimConfig& base = spec.sim;
  const std::vector<double> grid = uniform_grid(base.horizon, base.steps);
  const SpdPath target = polynomial_path(lp.poly, grid);
  const SpdPath fine = polynomial_path(lp.poly, uniform_grid(base.horizon, std::max<std::size_t>(base.steps, 10000)));
  const RateReport rate = rate_I(fine, base.delta);
  if (rate.is_infinite()) fail(ErrorCode::InvalidArgument, "ldp_scan: target path has infinite rate");

  Json points = Json::array();
  std::ostringstream csv;
  csv << "eps,eps2,hits,replicas,p_hat,p_lo,p_hi,scaled_log_p,scaled_log_lo,scaled_log_hi\n";
  std::vector<double> fit_x, fit_y;
  std::vector<double> ys;
  bool low_hits = false;
  for (double eps : lp.epsilons) {
    SimConfig sim = base;
    sim.epsilon = eps;
    std::vector<unsigned char> inside(sim.replicas, 0);
    for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
      bool ok = true;
      run_wishart_replica(sim, SymMatrix::zero(sim.dim), r,
                          [&](std::size_t step, double, const Eigen::Ref<const Eigen::MatrixXd>& x) {
                            ok = (x - target[step].matrix()).norm() < lp.radius;
                            return ok;
                          });
      inside[r] = ok ? 1 : 0;
    });
    std::size_t hits = 0;
    for (unsigned char h : inside) hits += h;
    const double n = static_cast<double>(sim.replicas);
    const double p = static_cast<double>(hits) / n;
    const Interval ci = wilson_interval(hits, sim.replicas);
    const double e2 = eps * eps;
    const double y = hits > 0 ? e2 * std::log(p) : -std::numeric_limits<double>::infinity();
    const double y_lo = ci.lo > 0.0 ? e2 * std::log(ci.lo) : -std::numeric_limits<double>::infinity();
    const double y_hi = e2 * std::log(ci.hi);
    const bool low = hits < lp.min_hits;
    low_hits = low_hits || low;
    if (hits > 0) {
      fit_x.push_back(e2);
      fit_y.push_back(y);
    }
    ys.push_back(y);
    points.push_back({{"eps", eps},
                      {"hits", hits},
                      {"replicas", sim.replicas},
                      {"p_hat", p},
                      {"wilson", {ci.lo, ci.hi}},
                      {"log_p", finite_or_null(hits > 0 ? std::log(p) : -INFINITY)},
                      {"scaled_log_p", finite_or_null(y)},
                      {"scaled_log_p_ci", {finite_or_null(y_lo), finite_or_null(y_hi)}},
                      {"LOW_HITS", low}});
    csv << csv_number(eps) << ',' << csv_number(e2) << ',' << hits << ',' << sim.replicas << ',' << csv_number(p)
        << ',' << csv_number(ci.lo) << ',' << csv_number(ci.hi) << ',' << csv_number(y) << ','
        << csv_number(y_lo) << ',' << csv_number(y_hi) << '\n';
  }
  bool nondecreasing = true;
  for (std::size_t i = 1; i < ys.size(); ++i) nondecreasing = nondecreasing && ys[i] >= ys[i - 1];

  Json trend{{"nondecreasing", nondecreasing}};
  const double bracket_lo = -rate.value;
  if (fit_x.size() >= 2) {
    double slope = 0.0, intercept = 0.0;
    least_squares(fit_x, fit_y, slope, intercept);
    trend["slope_estimate"] = slope;
    trend["intercept"] = intercept;
    trend["intercept_in_bracket"] = intercept >= bracket_lo && intercept <= 0.0;
  } else {
    trend["slope_estimate"] = nullptr;
    trend["intercept"] = nullptr;
    trend["intercept_in_bracket"] = false;
  }
  ExperimentReport rep;
  rep.verdict = Verdict::Complete;
  rep.json["result"] = {{"epsilons", lp.epsilons},
                        {"tube_radius", lp.radius},
                        {"tube_metric", "max over grid nodes of the Frobenius norm ||X_t - phi_t||"},
                        {"target", lp.target_name},
                        {"target_rate", rate.value},
                        {"bracket", {bracket_lo, 0.0}},
                        {"points", std::move(points)},
                        {"fit", "least squares of eps^2 ln p_hat = intercept + slope * eps^2"},
                        {"trend", std::move(trend)},
                        {"min_hits", lp.min_hits},
                        {"LOW_HITS", low_hits}};
  rep.csv = csv.str();
  return rep;
}

// ---------------------------------------------------------------- eigen_contract

struct EigenParams {
  double ks_max = 0.05;
  std::uint64_t eigen_seed;
  EigenvalueSimOptions options;
  std::vector<double> diagonal;
};

EigenParams eigen_params(const ExperimentSpec& spec) {
  const Json& p = spec.payload;
  check_keys(p, {"ks_max", "eigen_seed", "g_min", "diagonal"});
  const int m = spec.sim.dim;
  if (m < 2) fail(ErrorCode::ParseError, "field 'sim.m': eigen_contract needs m >= 2");
  EigenParams ep;
  ep.eigen_seed = stream_seed(spec.sim.seed, 3);
  if (p.contains("ks_max")) ep.ks_max = positive_at(p["ks_max"], pfield("ks_max"));
  if (p.contains("eigen_seed")) ep.eigen_seed = count_at(p["eigen_seed"], pfield("eigen_seed"));
  if (p.contains("g_min")) ep.options.g_min = positive_at(p["g_min"], pfield("g_min"));
  const double slope = spec.sim.delta / spec.sim.horizon;
  if (p.contains("diagonal")) {
    ep.diagonal = numbers_at(p["diagonal"], pfield("diagonal"));
    if (ep.diagonal.size() != static_cast<std::size_t>(m)) {
      fail(ErrorCode::ParseError, "field 'payload.diagonal': expected m coefficients");
    }
  } else {
    for (int i = 0; i < m; ++i) ep.diagonal.push_back(slope * (0.8 - 1.2 * i / m));
  }
  for (double c : ep.diagonal) {
    if (!(c > -slope)) {
      fail(ErrorCode::ParseError, "field 'payload.diagonal': need c > -delta/T so delta t + c t^2 > 0 on (0, T]");
    }
  }
  return ep;
}

ExperimentReport run_eigen_contract(const ExperimentSpec& spec) {
  const EigenParams ep = eigen_params(spec);
  const SimConfig& sim = spec.sim;
  const int m = sim.dim;

  std::vector<double> from_matrix(sim.replicas);
  std::vector<RepairStats> repair(sim.replicas);
  for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
    repair[r] = run_wishart_replica(sim, SymMatrix::zero(m), r,
                                    [&](std::size_t step, double, const Eigen::Ref<const Eigen::MatrixXd>& x) {
                                      if (step == sim.steps) from_matrix[r] = max_eigenvalue(SymMatrix(x));
                                      return true;
                                    });
  });
  SimConfig eig_sim = sim;
  eig_sim.seed = ep.eigen_seed;
  std::vector<double> from_eigen(sim.replicas);
  std::vector<EigenvalueStats> estats(sim.replicas);
  const std::vector<double> zeros(m, 0.0);
  for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
    estats[r] = run_eigenvalue_replica(
        eig_sim, zeros, r,
        [&](std::size_t step, double, std::span<const double> lambda) {
          if (step == sim.steps) from_eigen[r] = lambda[0];
          return true;
        },
        ep.options);
  });
  RepairStats rs;
  for (const RepairStats& s : repair) rs += s;
  EigenvalueStats es;
  for (const EigenvalueStats& s : estats) {
    es.steps += s.steps;
    es.sort_events += s.sort_events;
    es.floor_activations += s.floor_activations;
    es.zero_clamps += s.zero_clamps;
  }
  const double ks = ks_distance(from_matrix, from_eigen);

  // Diagonal deterministic path: I(diag(x)) against J of its eigenvalue paths.
  const std::vector<double> grid = uniform_grid(sim.horizon, sim.steps);
  std::vector<SymMatrix> values;
  for (double t : grid) {
    Eigen::VectorXd d(m);
    for (int i = 0; i < m; ++i) d(i) = sim.delta * t + ep.diagonal[i] * t * t;
    values.push_back(SymMatrix::diagonal(d));
  }
  const SpdPath diag_path(grid, values);
  std::vector<ScalarPath> eig_paths(m, ScalarPath{grid, {}});
  for (const SymMatrix& v : values) {
    const SymEigen e = eigen_decompose(v);
    for (int i = 0; i < m; ++i) eig_paths[i].values.push_back(e.values(m - 1 - i));
  }
  const double i_rate = rate_I(diag_path, sim.delta).value;
  const double j_rate = rate_J(eig_paths, sim.delta).value;
  const bool diag_ok = std::abs(i_rate - j_rate) <= 1e-8 * (1.0 + std::abs(i_rate));
  const bool ks_ok = ks <= ep.ks_max;

  std::vector<double> a = from_matrix, b = from_eigen;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::ostringstream csv;
  csv << "q,lambda_max_matrix,lambda_max_eigen\n";
  for (int q = 1; q < 100; ++q) {
    const auto idx = static_cast<std::size_t>(q / 100.0 * static_cast<double>(a.size() - 1));
    csv << csv_number(q / 100.0) << ',' << csv_number(a[idx]) << ',' << csv_number(b[idx]) << '\n';
  }

  ExperimentReport rep;
  rep.verdict = ks_ok && diag_ok ? Verdict::Pass : Verdict::Fail;
  rep.json["result"] = {
      {"ks_distance", ks},
      {"ks_max", ep.ks_max},
      {"ks_pass", ks_ok},
      {"eigen_seed", ep.eigen_seed},
      {"matrix_pipeline", {{"mean_lambda_max", mean_se(from_matrix, 1, 0).mean}, {"repair", stats_json(rs)}}},
      {"eigen_pipeline",
       {{"mean_lambda_max", mean_se(from_eigen, 1, 0).mean},
        {"steps", es.steps},
        {"sort_events", es.sort_events},
        {"floor_activations", es.floor_activations},
        {"zero_clamps", es.zero_clamps}}},
      {"diagonal_check",
       {{"coefficients", ep.diagonal}, {"rate_I", i_rate}, {"rate_J", j_rate}, {"pass", diag_ok}}}};
  rep.csv = csv.str();
  return rep;
}

// ---------------------------------------------------------------- rate_eval

enum class Functional { I, J, IMax, K, KMax };

struct RateParams {
  Functional functional;
  std::optional<SpdPath> path;
  std::vector<ScalarPath> scalars;
  SymMatrix matrix;
  double a = 0.0;
};

RateParams rate_params(const ExperimentSpec& spec) {
  const Json& p = spec.payload;
  check_keys(p, {"functional", "path_file", "path", "M", "a"});
  RateParams rp;
  const std::string name = p.value("functional", std::string("I"));
  if (name == "I") {
    rp.functional = Functional::I;
  } else if (name == "J") {
    rp.functional = Functional::J;
  } else if (name == "I_max") {
    rp.functional = Functional::IMax;
  } else if (name == "K") {
    rp.functional = Functional::K;
  } else if (name == "K_max") {
    rp.functional = Functional::KMax;
  } else {
    fail(ErrorCode::ParseError, "field 'payload.functional': expected I, J, I_max, K or K_max, got '" + name + "'");
  }
  const bool needs_path = rp.functional == Functional::I || rp.functional == Functional::J ||
                          rp.functional == Functional::IMax;
  if (needs_path) {
    if (p.contains("path_file") == p.contains("path")) {
      fail(ErrorCode::ParseError, "field 'payload': give exactly one of path_file or path");
    }
    if (rp.functional == Functional::I) {
      rp.path = p.contains("path") ? spd_path_from_json(p["path"], "payload.path")
                                   : load_spd_path(p["path_file"].get<std::string>());
    } else {
      rp.scalars = p.contains("path") ? scalar_paths_from_json(p["path"], "payload.path")
                                      : load_scalar_paths(p["path_file"].get<std::string>());
      if (rp.functional == Functional::IMax && rp.scalars.size() != 1) {
        fail(ErrorCode::ParseError, "field 'payload.path': I_max takes a single scalar path");
      }
    }
  } else if (rp.functional == Functional::K) {
    rp.matrix = matrix_from_json(require(p, "M", "payload"), "payload.M");
    if (!is_pd(rp.matrix)) fail(ErrorCode::ParseError, "field 'payload.M': must be positive definite");
  } else {
    rp.a = positive_at(require(p, "a", "payload"), pfield("a"));
  }
  return rp;
}

ExperimentReport run_rate_eval(const ExperimentSpec& spec) {
  const RateParams rp = rate_params(spec);
  const double delta = spec.sim.delta;
  ExperimentReport rep;
  rep.verdict = Verdict::Complete;
  Json result;
  std::optional<RateReport> report;
  std::vector<double> grid;
  switch (rp.functional) {
    case Functional::I:
      report = rate_I(*rp.path, delta);
      grid = rp.path->grid();
      result["functional"] = "I";
      break;
    case Functional::J:
      report = rate_J(rp.scalars, delta);
      grid = rp.scalars.front().grid;
      result["functional"] = "J";
      break;
    case Functional::IMax:
      report = rate_I_max(rp.scalars.front(), delta, spec.sim.dim);
      grid = rp.scalars.front().grid;
      result["functional"] = "I_max";
      break;
    case Functional::K:
      result = {{"functional", "K"}, {"M", to_json(rp.matrix)}, {"value", rate_K(rp.matrix, delta)}};
      break;
    case Functional::KMax:
      result = {{"functional", "K_max"}, {"a", rp.a}, {"value", rate_K_max(rp.a, delta, spec.sim.dim)}};
      break;
  }
  if (report) {
    result["report"] = to_json(*report);
    result["value"] = report->value;
    std::ostringstream csv;
    csv << "t_start,t_end,contribution\n";
    for (std::size_t j = 0; j < report->contributions.size(); ++j) {
      csv << csv_number(grid[j]) << ',' << csv_number(grid[j + 1]) << ',' << csv_number(report->contributions[j]) << '\n';
    }
    rep.csv = csv.str();
  }
  rep.json["result"] = std::move(result);
  return rep;
}

// ---------------------------------------------------------------- riccati_eval

struct RiccatiParams {
  MatrixMeasure measure;
  std::size_t steps = 10000;
  SymMatrix x;
};

RiccatiParams riccati_params(const ExperimentSpec& spec) {
  const Json& p = spec.payload;
  check_keys(p, {"measure_file", "measure", "steps", "x"});
  RiccatiParams rp;
  if (p.contains("measure_file") == p.contains("measure")) {
    fail(ErrorCode::ParseError, "field 'payload': give exactly one of measure_file or measure");
  }
  if (p.contains("measure")) {
    rp.measure = measure_from_json(p["measure"], "payload.measure");
  } else {
    if (!p["measure_file"].is_string()) fail(ErrorCode::ParseError, "field 'payload.measure_file': expected a string");
    const std::string file = p["measure_file"].get<std::string>();
    rp.measure = measure_from_json(parse_json_text(read_text_file(file), file), file);
  }
  try {
    validate(rp.measure, spec.sim.horizon);
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, std::string("field 'payload.measure': ") + e.what());
  }
  if (p.contains("steps")) rp.steps = count_at(p["steps"], pfield("steps"));
  if (rp.steps < 1) fail(ErrorCode::ParseError, "field 'payload.steps': must be >= 1");
  rp.x = psd_matrix_or(p, "x", SymMatrix::zero(rp.measure.dim));
  return rp;
}

ExperimentReport run_riccati_eval(const ExperimentSpec& spec) {
  const RiccatiParams rp = riccati_params(spec);
  const RiccatiSolution sol = solve_riccati(rp.measure, spec.sim.horizon, rp.steps);
  double lmax = -std::numeric_limits<double>::infinity();
  for (const SymMatrix& f : sol.values) lmax = std::max(lmax, max_eigenvalue(f));
  for (const RiccatiJump& j : sol.jumps) lmax = std::max(lmax, max_eigenvalue(j.left));
  ExperimentReport rep;
  rep.verdict = Verdict::Complete;
  rep.json["result"] = {{"measure", to_json(rp.measure)},
                        {"F0", to_json(sol.values.front())},
                        {"F0_left", to_json(sol.initial_left_limit())},
                        {"laplace", {{"x", to_json(rp.x)}, {"value", laplace_transform(sol, rp.x, spec.sim.delta)}}},
                        {"residual", riccati_residual(sol, rp.measure)},
                        {"max_eigenvalue", lmax},
                        {"solution", to_json(sol)}};
  std::ostringstream csv;
  write_riccati_csv(csv, sol);
  rep.csv = csv.str();
  return rep;
}

// ---------------------------------------------------------------- simulate

enum class Process { Wishart, Trace, Eigenvalues };

struct SimulateParams {
  Process process = Process::Wishart;
  SymMatrix x0;
  std::size_t paths = 1;
};

SimulateParams simulate_params(const ExperimentSpec& spec) {
  const Json& p = spec.payload;
  check_keys(p, {"process", "x0", "paths"});
  SimulateParams sp;
  const std::string name = p.value("process", std::string("wishart"));
  if (name == "wishart") {
    sp.process = Process::Wishart;
  } else if (name == "trace") {
    sp.process = Process::Trace;
  } else if (name == "eigenvalues") {
    sp.process = Process::Eigenvalues;
  } else {
    fail(ErrorCode::ParseError, "field 'payload.process': expected wishart, trace or eigenvalues");
  }
  sp.x0 = psd_matrix_or(p, "x0", SymMatrix::zero(spec.sim.dim));
  if (p.contains("paths")) sp.paths = count_at(p["paths"], pfield("paths"));
  sp.paths = std::min(sp.paths, spec.sim.replicas);
  return sp;
}

ExperimentReport run_simulate(const ExperimentSpec& spec) {
  const SimulateParams sp = simulate_params(spec);
  const SimConfig& sim = spec.sim;
  const int m = sim.dim;
  ExperimentReport rep;
  rep.verdict = Verdict::Complete;
  Json result{{"process", sp.process == Process::Wishart ? "wishart" : sp.process == Process::Trace ? "trace" : "eigenvalues"},
              {"x0", to_json(sp.x0)}};
  std::ostringstream csv;
  Json paths = Json::array();

  if (sp.process == Process::Wishart) {
    std::vector<Eigen::MatrixXd> ends(sim.replicas);
    std::vector<RepairStats> stats(sim.replicas);
    for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
      stats[r] = run_wishart_replica(sim, sp.x0, r, [&](std::size_t step, double, const Eigen::Ref<const Eigen::MatrixXd>& x) {
        if (step == sim.steps) ends[r] = x;
        return true;
      });
    });
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(m, m);
    RepairStats total;
    for (std::size_t r = 0; r < sim.replicas; ++r) {
      mean += ends[r];
      total += stats[r];
    }
    mean /= static_cast<double>(sim.replicas);
    for (std::size_t r = 0; r < sp.paths; ++r) {
      const SpdPath path = simulate_wishart(sim, sp.x0, r);
      paths.push_back(to_json(path));
      if (r == 0) write_path_csv(csv, path);
    }
    result["endpoint_mean"] = to_json(SymMatrix(mean));
    result["repair"] = stats_json(total);
  } else if (sp.process == Process::Trace) {
    const double y0 = sp.x0.trace();
    std::vector<double> ends(sim.replicas);
    for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
      run_besq_replica(sim, y0, r, [&](std::size_t step, double, double y) {
        if (step == sim.steps) ends[r] = y;
        return true;
      });
    });
    result["endpoint_mean"] = mean_se(ends, 1, 0).mean;
    std::vector<ScalarPath> kept;
    for (std::size_t r = 0; r < sp.paths; ++r) kept.push_back(simulate_trace_besq(sim, y0, r));
    for (const ScalarPath& p : kept) paths.push_back(to_json(std::span<const ScalarPath>(&p, 1)));
    write_scalar_csv(csv, kept);
  } else {
    const SymEigen e = eigen_decompose(sp.x0);
    std::vector<double> lambda0(m);
    for (int i = 0; i < m; ++i) lambda0[i] = std::max(0.0, e.values(m - 1 - i));
    std::vector<double> ends(sim.replicas * m);
    for_each_replica(sim.replicas, sim.threads, [&](std::size_t r) {
      run_eigenvalue_replica(sim, lambda0, r, [&](std::size_t step, double, std::span<const double> l) {
        if (step == sim.steps) std::copy(l.begin(), l.end(), ends.begin() + static_cast<std::ptrdiff_t>(r * m));
        return true;
      });
    });
    Json means = Json::array();
    for (int i = 0; i < m; ++i) means.push_back(mean_se(ends, m, i).mean);
    result["endpoint_mean"] = std::move(means);
    for (std::size_t r = 0; r < sp.paths; ++r) {
      const EigenvalueSimResult res = simulate_eigenvalues(sim, lambda0, r);
      paths.push_back(to_json(res.paths));
      if (r == 0) write_scalar_csv(csv, res.paths);
    }
  }
  result["paths"] = std::move(paths);
  rep.json["result"] = std::move(result);
  rep.csv = csv.str();
  return rep;
}

void validate_payload(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::LaplaceCheck: laplace_params(spec); break;
    case ExperimentKind::Additivity: additivity_params(spec); break;
    case ExperimentKind::LdpScan: ldp_params(spec); break;
    case ExperimentKind::EigenContract: eigen_params(spec); break;
    case ExperimentKind::RateEval: rate_params(spec); break;
    case ExperimentKind::RiccatiEval: riccati_params(spec); break;
    case ExperimentKind::Simulate: simulate_params(spec); break;
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

const char* to_string(ExperimentKind k) noexcept {
  for (const KindName& kn : kKinds) {
    if (kn.kind == k) return kn.name;
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  std::string norm = s;
  for (char& c : norm) c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (const KindName& kn : kKinds) {
    if (norm == kn.name) return kn.kind;
  }
  fail(ErrorCode::ParseError, "field 'kind': unknown experiment kind '" + s + "'");
}

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Complete: return "COMPLETE";
  }
  return "UNKNOWN";
}

ExperimentSpec parse_experiment(const Json& config) {
  if (!config.is_object()) fail(ErrorCode::ParseError, "config: expected an object at top level");
  for (auto it = config.begin(); it != config.end(); ++it) {
    if (it.key() != "kind" && it.key() != "sim" && it.key() != "payload" && it.key() != "output_path") {
      fail(ErrorCode::ParseError, "field '" + it.key() + "': unknown top-level setting");
    }
  }
  ExperimentSpec spec;
  const Json& kind = require(config, "kind", "");
  if (!kind.is_string()) fail(ErrorCode::ParseError, "field 'kind': expected a string");
  spec.kind = experiment_kind_from_string(kind.get<std::string>());
  spec.sim = sim_config_from_json(config.value("sim", Json::object()), "sim");
  spec.payload = config.value("payload", Json::object());
  if (config.contains("output_path")) {
    if (!config["output_path"].is_string()) fail(ErrorCode::ParseError, "field 'output_path': expected a string");
    spec.output_path = config["output_path"].get<std::string>();
  }
  validate_payload(spec);
  return spec;
}

Json to_json(const ExperimentSpec& spec) {
  return Json{{"kind", to_string(spec.kind)},
              {"sim", to_json(spec.sim)},
              {"payload", spec.payload},
              {"output_path", spec.output_path}};
}

ExperimentReport run_experiment(const ExperimentSpec& spec, const RunOptions& opts) {
  validate_payload(spec);
  ExperimentReport rep;
  switch (spec.kind) {
    case ExperimentKind::LaplaceCheck: rep = run_laplace(spec); break;
    case ExperimentKind::Additivity: rep = run_additivity(spec); break;
    case ExperimentKind::LdpScan: rep = run_ldp_scan(spec); break;
    case ExperimentKind::EigenContract: rep = run_eigen_contract(spec); break;
    case ExperimentKind::RateEval: rep = run_rate_eval(spec); break;
    case ExperimentKind::RiccatiEval: rep = run_riccati_eval(spec); break;
    case ExperimentKind::Simulate: rep = run_simulate(spec); break;
  }
  rep.json["kind"] = to_string(spec.kind);
  rep.json["config"] = to_json(spec);
  rep.json["verdict"] = to_string(rep.verdict);
  if (opts.timestamp) rep.json["timestamp"] = utc_timestamp();
  return rep;
}

std::string dump_report(const Json& report) { return report.dump(2) + "\n"; }

Interval wilson_interval(std::size_t hits, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double centre = (p + z2 / (2.0 * nn)) / (1.0 + z2 / nn);
  const double half = z / (1.0 + z2 / nn) * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  // The bounds are exactly 0 and 1 at the extremes; rounding would leave residue.
  return {hits == 0 ? 0.0 : std::max(0.0, centre - half), hits == n ? 1.0 : std::min(1.0, centre + half)};
}

double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) fail(ErrorCode::InvalidArgument, "ks_distance: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

}  // namespace wldp
