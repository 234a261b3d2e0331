#include "wishart_ldp/simulator.hpp"

#include "wishart_ldp/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace wldp {

const char* to_string(Scheme s) noexcept {
  switch (s) {
    case Scheme::EulerProject: return "EULER_PROJECT";
    case Scheme::EulerClamp: return "EULER_CLAMP";
  }
  return "UNKNOWN";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "EULER_PROJECT") return Scheme::EulerProject;
  if (s == "EULER_CLAMP") return Scheme::EulerClamp;
  fail(ErrorCode::InvalidArgument, "unknown scheme '" + s + "' (expected EULER_PROJECT or EULER_CLAMP)");
}

void validate(const SimConfig& cfg) {
  if (cfg.dim < 1) fail(ErrorCode::InvalidArgument, "SimConfig: dim must be >= 1");
  if (!(cfg.delta > 0.0) || !std::isfinite(cfg.delta)) {
    fail(ErrorCode::InvalidArgument, "SimConfig: delta must be > 0");
  }
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
    fail(ErrorCode::InvalidArgument, "SimConfig: epsilon must be >= 0");
  }
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
    fail(ErrorCode::InvalidArgument, "SimConfig: horizon must be > 0");
  }
  if (cfg.steps < 1) fail(ErrorCode::InvalidArgument, "SimConfig: steps must be >= 1");
  if (cfg.replicas < 1) fail(ErrorCode::InvalidArgument, "SimConfig: replicas must be >= 1");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::mt19937_64 replica_engine(std::uint64_t seed, std::uint64_t replica) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ splitmix64(~replica)));
}

RepairStats& RepairStats::operator+=(const RepairStats& o) {
  steps += o.steps;
  repaired += o.repaired;
  halvings += o.halvings;
  clamp_fallbacks += o.clamp_fallbacks;
  return *this;
}

namespace {

constexpr int kMaxHalvings = 10;

template <int Dim>
class WishartKernel {
 public:
  using Mat = Eigen::Matrix<double, Dim, Dim>;

  WishartKernel(const SimConfig& cfg, const Eigen::MatrixXd& x0, std::uint64_t replica)
      : cfg_(cfg), rng_(replica_engine(cfg.seed, replica)), x_(x0), root_(x0) {
    if constexpr (Dim == Eigen::Dynamic) solver_ = Eigen::SelfAdjointEigenSolver<Mat>(cfg.dim);
    settle(x_, root_);
  }

  RepairStats run(const WishartObserver& observer) {
    RepairStats stats;
    if (!observer(0, 0.0, x_)) return stats;
    const double dt = cfg_.dt();
    const double sqrt_dt = std::sqrt(dt);
    for (std::size_t k = 1; k <= cfg_.steps; ++k) {
      const Mat db = draw(sqrt_dt);
      Mat next = candidate(x_, root_, db, dt);
      Mat next_root(cfg_.dim, cfg_.dim);
      const bool left_cone = settle_or_flag(next, next_root);
      ++stats.steps;
      if (left_cone) {
        ++stats.repaired;
        if (cfg_.scheme == Scheme::EulerClamp) {
          bridge_step(x_, root_, db, dt, 0, next, next_root, stats);
        } else {
          project(next, next_root);
        }
      }
      x_ = next;
      root_ = next_root;
      const double t = (k == cfg_.steps) ? cfg_.horizon : static_cast<double>(k) * dt;
      if (!observer(k, t, x_)) break;
    }
    return stats;
  }

 private:
  Mat draw(double scale) {
    Mat z(cfg_.dim, cfg_.dim);
    for (int i = 0; i < cfg_.dim; ++i) {
      for (int j = 0; j < cfg_.dim; ++j) z(i, j) = scale * normal_(rng_);
    }
    return z;
  }

  Mat candidate(const Mat& x, const Mat& root, const Mat& db, double h) const {
    if constexpr (Dim == 1) {
      Mat c;
      c(0, 0) = (x(0, 0) + cfg_.epsilon * (2.0 * (root(0, 0) * db(0, 0)))) + cfg_.delta * h;
      return c;
    } else {
      Mat c = x + cfg_.epsilon * (root * db + db.transpose() * root);
      c.diagonal().array() += cfg_.delta * h;
      return 0.5 * (c + c.transpose());
    }
  }

  // Decomposes c; when it is in the cone, stores its square root and returns
  // false. Otherwise leaves the decomposition cached for project().
  bool settle_or_flag(const Mat& c, Mat& root) {
    if constexpr (Dim == 1) {
      if (c(0, 0) < 0.0) return true;
      root(0, 0) = std::sqrt(c(0, 0));
      return false;
    } else {
      solver_.compute(c);
      if (solver_.eigenvalues()(0) < 0.0) return true;
      root = solver_.eigenvectors() * solver_.eigenvalues().cwiseSqrt().asDiagonal() *
             solver_.eigenvectors().transpose();
      return false;
    }
  }

  // Clamps negative eigenvalues of c (decomposition cached by settle_or_flag).
  void project(Mat& c, Mat& root) {
    if constexpr (Dim == 1) {
      c(0, 0) = 0.0;
      root(0, 0) = 0.0;
    } else {
      const auto vals = solver_.eigenvalues().cwiseMax(0.0).eval();
      const auto& v = solver_.eigenvectors();
      Mat p = v * vals.asDiagonal() * v.transpose();
      c = 0.5 * (p + p.transpose());
      root = v * vals.cwiseSqrt().asDiagonal() * v.transpose();
    }
  }

  void settle(Mat& c, Mat& root) {
    if (settle_or_flag(c, root)) project(c, root);
  }

  // Re-integrates [t, t+h] as two halves, sampling the Brownian midpoint from
  // the bridge given the full increment db.
  void bridge_step(const Mat& x, const Mat& root, const Mat& db, double h, int depth, Mat& out,
                   Mat& out_root, RepairStats& stats) {
    if (depth > 0) {
      out = candidate(x, root, db, h);
      if (!settle_or_flag(out, out_root)) return;
    }
    if (depth == kMaxHalvings) {
      project(out, out_root);
      ++stats.clamp_fallbacks;
      return;
    }
    ++stats.halvings;
    const Mat first = 0.5 * db + draw(0.5 * std::sqrt(h));
    const Mat second = db - first;
    Mat mid(cfg_.dim, cfg_.dim), mid_root(cfg_.dim, cfg_.dim);
    bridge_step(x, root, first, 0.5 * h, depth + 1, mid, mid_root, stats);
    bridge_step(mid, mid_root, second, 0.5 * h, depth + 1, out, out_root, stats);
  }

  const SimConfig& cfg_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_;
  Eigen::SelfAdjointEigenSolver<Mat> solver_;
  Mat x_;
  Mat root_;
};

template <int Dim>
RepairStats run_kernel(const SimConfig& cfg, const SymMatrix& x0, std::uint64_t replica,
                       const WishartObserver& observer) {
  WishartKernel<Dim> kernel(cfg, x0.matrix(), replica);
  return kernel.run(observer);
}

void check_initial_matrix(const SimConfig& cfg, const SymMatrix& x0) {
  if (x0.dim() != cfg.dim) {
    fail(ErrorCode::BadInitialCondition, "initial condition has dimension " +
                                             std::to_string(x0.dim()) + ", config has " +
                                             std::to_string(cfg.dim));
  }
  if (!is_psd(x0)) {
    fail(ErrorCode::BadInitialCondition, "initial condition is not positive semidefinite");
  }
}

}  // namespace

RepairStats run_wishart_replica(const SimConfig& cfg, const SymMatrix& x0, std::uint64_t replica,
                                const WishartObserver& observer) {
  validate(cfg);
  check_initial_matrix(cfg, x0);
  switch (cfg.dim) {
    case 1: return run_kernel<1>(cfg, x0, replica, observer);
    case 2: return run_kernel<2>(cfg, x0, replica, observer);
    case 3: return run_kernel<3>(cfg, x0, replica, observer);
    case 4: return run_kernel<4>(cfg, x0, replica, observer);
    default: return run_kernel<Eigen::Dynamic>(cfg, x0, replica, observer);
  }
}

SpdPath simulate_wishart(const SimConfig& cfg, const SymMatrix& x0, std::uint64_t replica,
                         RepairStats* stats) {
  std::vector<double> grid;
  std::vector<SymMatrix> values;
  grid.reserve(cfg.steps + 1);
  values.reserve(cfg.steps + 1);
  const RepairStats s =
      run_wishart_replica(cfg, x0, replica, [&](std::size_t, double t, const auto& x) {
        grid.push_back(t);
        values.emplace_back(Eigen::MatrixXd(x));
        return true;
      });
  if (stats) *stats = s;
  return SpdPath(std::move(grid), std::move(values));
}

void run_besq_replica(const SimConfig& cfg, double y0, std::uint64_t replica,
                      const ScalarObserver& observer) {
  validate(cfg);
  if (!(y0 >= 0.0)) fail(ErrorCode::BadInitialCondition, "BESQ initial value must be >= 0");
  std::mt19937_64 rng = replica_engine(cfg.seed, replica);
  std::normal_distribution<double> normal;
  const double dt = cfg.dt();
  const double sqrt_dt = std::sqrt(dt);
  const double drift = cfg.delta * static_cast<double>(cfg.dim);
  double y = y0;
  if (!observer(0, 0.0, y)) return;
  for (std::size_t k = 1; k <= cfg.steps; ++k) {
    const double db = sqrt_dt * normal(rng);
    const double s = std::sqrt(y);
    y = (y + cfg.epsilon * (2.0 * (s * db))) + drift * dt;
    if (y < 0.0) y = 0.0;
    const double t = (k == cfg.steps) ? cfg.horizon : static_cast<double>(k) * dt;
    if (!observer(k, t, y)) return;
  }
}

ScalarPath simulate_trace_besq(const SimConfig& cfg, double y0, std::uint64_t replica) {
  ScalarPath p;
  p.grid.reserve(cfg.steps + 1);
  p.values.reserve(cfg.steps + 1);
  run_besq_replica(cfg, y0, replica, [&](std::size_t, double t, double y) {
    p.grid.push_back(t);
    p.values.push_back(y);
    return true;
  });
  return p;
}

EigenvalueStats run_eigenvalue_replica(const SimConfig& cfg, std::span<const double> lambda0,
                                       std::uint64_t replica, const EigenvalueObserver& observer,
                                       const EigenvalueSimOptions& opts) {
  validate(cfg);
  const auto m = static_cast<std::size_t>(cfg.dim);
  if (lambda0.size() != m) {
    fail(ErrorCode::BadInitialCondition, "expected " + std::to_string(m) + " initial eigenvalues");
  }
  const bool all_zero = std::all_of(lambda0.begin(), lambda0.end(), [](double v) { return v == 0.0; });
  if (!all_zero) {
    for (std::size_t i = 0; i < m; ++i) {
      if (!(lambda0[i] >= 0.0) || !std::isfinite(lambda0[i])) {
        fail(ErrorCode::BadInitialCondition, "initial eigenvalues must be finite and non-negative");
      }
      if (i > 0 && !(lambda0[i] < lambda0[i - 1])) {
        fail(ErrorCode::BadInitialCondition,
             "initial eigenvalues must be strictly decreasing or all zero");
      }
    }
  }
  if (opts.g_min && !(*opts.g_min > 0.0)) {
    fail(ErrorCode::InvalidArgument, "g_min must be positive");
  }

  std::mt19937_64 rng = replica_engine(cfg.seed, replica);
  std::normal_distribution<double> normal;
  const double dt = cfg.dt();
  const double sqrt_dt = std::sqrt(dt);
  const double eps = cfg.epsilon;
  const double eps2 = eps * eps;

  std::vector<double> lam(lambda0.begin(), lambda0.end());
  std::vector<double> next(m), db(m);
  EigenvalueStats stats;
  if (!observer(0, 0.0, lam)) return stats;
  for (std::size_t k = 1; k <= cfg.steps; ++k) {
    for (std::size_t i = 0; i < m; ++i) db[i] = sqrt_dt * normal(rng);
    const double mean = std::accumulate(lam.begin(), lam.end(), 0.0) / static_cast<double>(m);
    const double g_min =
        opts.g_min ? *opts.g_min : std::max(1e-8 * (1.0 + mean), eps * std::sqrt(dt * mean));
    for (std::size_t i = 0; i < m; ++i) {
      double interaction = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == i) continue;
        double gap = lam[i] - lam[j];
        if (std::abs(gap) < g_min) {
          const double sign = gap > 0.0 ? 1.0 : gap < 0.0 ? -1.0 : (i < j ? 1.0 : -1.0);
          gap = sign * g_min;
          ++stats.floor_activations;
        }
        interaction += (lam[i] + lam[j]) / gap;
      }
      const double drift = cfg.delta + eps2 * interaction;
      const double s = std::sqrt(lam[i]);
      double v = (lam[i] + eps * (2.0 * (s * db[i]))) + drift * dt;
      if (v < 0.0) {
        v = 0.0;
        ++stats.zero_clamps;
      }
      next[i] = v;
    }
    if (!std::is_sorted(next.begin(), next.end(), std::greater<>())) {
      std::sort(next.begin(), next.end(), std::greater<>());
      ++stats.sort_events;
    }
    lam.swap(next);
    ++stats.steps;
    const double t = (k == cfg.steps) ? cfg.horizon : static_cast<double>(k) * dt;
    if (!observer(k, t, lam)) break;
  }
  return stats;
}

EigenvalueSimResult simulate_eigenvalues(const SimConfig& cfg, std::span<const double> lambda0,
                                         std::uint64_t replica, const EigenvalueSimOptions& opts) {
  EigenvalueSimResult r;
  r.paths.resize(static_cast<std::size_t>(std::max(cfg.dim, 1)));
  r.stats = run_eigenvalue_replica(
      cfg, lambda0, replica,
      [&](std::size_t, double t, std::span<const double> lam) {
        for (std::size_t i = 0; i < lam.size(); ++i) {
          r.paths[i].grid.push_back(t);
          r.paths[i].values.push_back(lam[i]);
        }
        return true;
      },
      opts);
  return r;
}

namespace {

// Cubic (or lower, near short grids) Lagrange interpolation of k at time t,
// using nodes around interval j drawn from [first, n-1].
Eigen::MatrixXd interpolate_k(const KPath& k, std::size_t first, std::size_t j, double t) {
  const std::size_t n = k.size();
  const std::size_t available = n - first;
  const std::size_t width = std::min<std::size_t>(4, available);
  std::size_t lo = (j > first) ? j - 1 : first;
  if (lo + width > n) lo = n - width;
  const auto& g = k.grid;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(k.values[first].dim(), k.values[first].dim());
  for (std::size_t a = lo; a < lo + width; ++a) {
    double w = 1.0;
    for (std::size_t b = lo; b < lo + width; ++b) {
      if (b != a) w *= (t - g[b]) / (g[a] - g[b]);
    }
    out += w * k.values[a].matrix();
  }
  return out;
}

}  // namespace

SpdPath tilted_flow(double delta, const KPath& k, const SymMatrix& x0) {
  check_grid(k.grid, "tilted_flow");
  if (k.values.size() != k.grid.size()) {
    fail(ErrorCode::InvalidArgument, "tilted_flow: k values do not match its grid");
  }
  const int m = x0.dim();
  for (const auto& v : k.values) {
    if (v.dim() != m) fail(ErrorCode::InvalidArgument, "tilted_flow: dimension mismatch");
  }
  if (!is_psd(x0)) fail(ErrorCode::BadInitialCondition, "tilted_flow: x0 must be PSD");
  const std::size_t first = (k.origin_extrapolated && k.size() > 2) ? 1 : 0;

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
  auto rhs = [&](const Eigen::MatrixXd& psi, const Eigen::MatrixXd& kk) -> Eigen::MatrixXd {
    return 0.5 * (psi * kk + kk * psi) + delta * id;
  };

  std::vector<SymMatrix> values;
  values.reserve(k.size());
  values.push_back(x0);
  Eigen::MatrixXd psi = x0.matrix();
  for (std::size_t j = 0; j + 1 < k.size(); ++j) {
    const double t0 = k.grid[j];
    const double h = k.grid[j + 1] - t0;
    const Eigen::MatrixXd k0 =
        (j < first) ? interpolate_k(k, first, j, t0) : k.values[j].matrix();
    const Eigen::MatrixXd kmid = interpolate_k(k, first, j, t0 + 0.5 * h);
    const Eigen::MatrixXd& k1 = k.values[j + 1].matrix();
    const Eigen::MatrixXd s1 = rhs(psi, k0);
    const Eigen::MatrixXd s2 = rhs(psi + 0.5 * h * s1, kmid);
    const Eigen::MatrixXd s3 = rhs(psi + 0.5 * h * s2, kmid);
    const Eigen::MatrixXd s4 = rhs(psi + h * s3, k1);
    psi += (h / 6.0) * (s1 + 2.0 * s2 + 2.0 * s3 + s4);
    psi = 0.5 * (psi + psi.transpose()).eval();
    values.emplace_back(psi);
  }
  return SpdPath(k.grid, std::move(values));
}

void for_each_replica(std::size_t count, unsigned threads,
                      const std::function<void(std::size_t)>& body) {
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t r = 0; r < count; ++r) body(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  constexpr std::size_t kChunk = 64;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t begin = next.fetch_add(kChunk);
          if (begin >= count) return;
          const std::size_t end = std::min(count, begin + kChunk);
          try {
            for (std::size_t r = begin; r < end; ++r) body(r);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(count);
            return;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace wldp
