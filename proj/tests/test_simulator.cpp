#include "oracles.hpp"

#include "wishart_ldp/error.hpp"
#include "wishart_ldp/rate.hpp"
#include "wishart_ldp/simulator.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using wldp::Scheme;
using wldp::SimConfig;
using wldp::SymMatrix;

namespace {

SimConfig config(int m, double delta, double eps, std::size_t steps, std::uint64_t seed = 1) {
  SimConfig c;
  c.dim = m;
  c.delta = delta;
  c.epsilon = eps;
  c.horizon = 1.0;
  c.steps = steps;
  c.seed = seed;
  return c;
}

struct MeanSe {
  double mean;
  double se;
};

MeanSe mean_se(const std::vector<double>& v) {
  double s = 0.0, s2 = 0.0;
  for (double x : v) s += x;
  const double n = static_cast<double>(v.size());
  const double mean = s / n;
  for (double x : v) s2 += (x - mean) * (x - mean);
  return {mean, std::sqrt(s2 / (n - 1.0) / n)};
}

// Terminal values of the Wishart trace over replicas.
std::vector<double> terminal_traces(const SimConfig& cfg, std::size_t replicas, unsigned threads,
                                    wldp::RepairStats* total = nullptr) {
  std::vector<double> out(replicas);
  std::vector<wldp::RepairStats> stats(replicas);
  const SymMatrix x0 = SymMatrix::zero(cfg.dim);
  wldp::for_each_replica(replicas, threads, [&](std::size_t r) {
    stats[r] = wldp::run_wishart_replica(cfg, x0, r, [&](std::size_t k, double, const auto& x) {
      if (k == cfg.steps) out[r] = x.trace();
      return true;
    });
  });
  if (total) {
    for (const auto& s : stats) *total += s;
  }
  return out;
}

double empirical_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("validate rejects bad configs") {
  SimConfig c = config(2, 3.0, 0.5, 10);
  CHECK_NOTHROW(wldp::validate(c));
  auto bad = [](SimConfig c2) { CHECK_THROWS_AS(wldp::validate(c2), wldp::Error); };
  c.dim = 0;
  bad(c);
  c = config(2, 0.0, 0.5, 10);
  bad(c);
  c = config(2, 1.0, -0.1, 10);
  bad(c);
  c = config(2, 1.0, 0.1, 0);
  bad(c);
  c = config(2, 1.0, 0.1, 10);
  c.horizon = 0.0;
  bad(c);
  CHECK(wldp::scheme_from_string("EULER_CLAMP") == Scheme::EulerClamp);
  CHECK(wldp::scheme_from_string("EULER_PROJECT") == Scheme::EulerProject);
  CHECK_THROWS_AS(wldp::scheme_from_string("MILSTEIN"), wldp::Error);
}

TEST_CASE("noiseless Wishart path is the drift line") {
  const SimConfig c = config(2, 2.0, 0.0, 100);
  const wldp::SpdPath p = wldp::simulate_wishart(c, SymMatrix::zero(2));
  REQUIRE(p.size() == 101);
  CHECK(p.grid().back() == 1.0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    const Eigen::MatrixXd expect = 2.0 * p.grid()[k] * Eigen::MatrixXd::Identity(2, 2);
    CHECK((p[k].matrix() - expect).norm() <= 1e-13);
  }
}

TEST_CASE("indefinite initial condition is rejected") {
  const SimConfig c = config(2, 3.0, 0.5, 10);
  try {
    wldp::simulate_wishart(c, SymMatrix{{1.0, 0.0}, {0.0, -0.5}});
    FAIL("expected BadInitialCondition");
  } catch (const wldp::Error& e) {
    CHECK(e.code() == wldp::ErrorCode::BadInitialCondition);
  }
  CHECK_THROWS_AS(wldp::simulate_trace_besq(c, -1.0), wldp::Error);
}

TEST_CASE("m = 1 Wishart path equals the BESQ scheme on the same seed") {
  for (std::uint64_t seed : {3u, 17u, 99u}) {
    const SimConfig c = config(1, 0.7, 1.0, 500, seed);
    const wldp::SpdPath w = wldp::simulate_wishart(c, SymMatrix{{0.2}}, 4);
    const wldp::ScalarPath y = wldp::simulate_trace_besq(c, 0.2, 4);
    REQUIRE(w.size() == y.size());
    for (std::size_t k = 0; k < y.size(); ++k) REQUIRE(w[k](0, 0) == y.values[k]);
  }
}

TEST_CASE("seed determinism and thread independence") {
  const SimConfig c = config(3, 4.0, 0.6, 200, 42);
  const wldp::SpdPath a = wldp::simulate_wishart(c, SymMatrix::identity(3), 7);
  const wldp::SpdPath b = wldp::simulate_wishart(c, SymMatrix::identity(3), 7);
  for (std::size_t k = 0; k < a.size(); ++k) REQUIRE(a[k] == b[k]);
  const wldp::SpdPath other = wldp::simulate_wishart(c, SymMatrix::identity(3), 8);
  CHECK_FALSE(other[c.steps] == a[c.steps]);

  const auto serial = terminal_traces(c, 64, 1);
  const auto parallel = terminal_traces(c, 64, 4);
  CHECK(serial == parallel);
}

TEST_CASE("trace mean matches the drift") {
  const SimConfig c = config(2, 3.0, 0.5, 2000, 5);
  wldp::RepairStats stats;
  const auto traces = terminal_traces(c, 10000, 0, &stats);
  const MeanSe ms = mean_se(traces);
  CHECK(std::abs(ms.mean - 6.0) <= 3.0 * ms.se);
  // dt = 5e-4, eps = 0.5, delta = m + 1
  CHECK(stats.repair_rate() < 0.05);
}

TEST_CASE("positivity under both schemes") {
  for (Scheme s : {Scheme::EulerProject, Scheme::EulerClamp}) {
    SimConfig c = config(3, 1.0, 1.0, 200, 11);
    c.scheme = s;
    wldp::RepairStats stats;
    for (std::uint64_t r = 0; r < 20; ++r) {
      wldp::RepairStats one;
      const wldp::SpdPath p = wldp::simulate_wishart(c, SymMatrix::zero(3), r, &one);
      stats += one;
      for (std::size_t k = 0; k < p.size(); ++k) {
        REQUIRE(wldp::min_eigenvalue(p[k]) >= -1e-10);
      }
    }
    // delta < m + 1 with large noise: the cone boundary is hit.
    CHECK(stats.repaired > 0);
    if (s == Scheme::EulerClamp) {
      CHECK(stats.halvings > 0);
    } else {
      CHECK(stats.halvings == 0);
    }
  }
}

TEST_CASE("BESQ examples") {
  SUBCASE("noiseless") {
    SimConfig c = config(3, 1.5, 0.0, 64);
    const wldp::ScalarPath y = wldp::simulate_trace_besq(c, 0.0);
    for (std::size_t k = 0; k < y.size(); ++k) CHECK(y.values[k] == doctest::Approx(4.5 * y.grid[k]).epsilon(1e-13));
  }
  SUBCASE("mean of Y_1") {
    SimConfig c = config(2, 2.0, 1.0, 500, 8);
    std::vector<double> ends(20000);
    for (std::size_t r = 0; r < ends.size(); ++r) {
      wldp::run_besq_replica(c, 0.0, r, [&](std::size_t k, double, double y) {
        if (k == c.steps) ends[r] = y;
        return true;
      });
    }
    const MeanSe ms = mean_se(ends);
    CHECK(std::abs(ms.mean - 4.0) <= 3.0 * ms.se);
  }
  SUBCASE("exponential moment") {
    // E exp(2 c^2 Y_1) = (1 - 4 c^2)^(-1/2) for the dimension-one BESQ with c = 0.3.
    // The clamped Euler scheme has an O(sqrt(dt)) weak bias at dimension one
    // (about 3 SE at dt = 1e-3), so this check runs at dt = 1e-4.
    SimConfig c = config(1, 1.0, 1.0, 10000, 21);
    std::vector<double> w(100000);
    wldp::for_each_replica(w.size(), 0, [&](std::size_t r) {
      wldp::run_besq_replica(c, 0.0, r, [&](std::size_t k, double, double y) {
        if (k == c.steps) w[r] = std::exp(0.18 * y);
        return true;
      });
    });
    const MeanSe ms = mean_se(w);
    CHECK(std::abs(ms.mean - 1.25) <= 3.0 * ms.se);
  }
}

TEST_CASE("eigenvalue SDE") {
  SUBCASE("noiseless from zero") {
    const SimConfig c = config(3, 2.5, 0.0, 50);
    const std::vector<double> zero(3, 0.0);
    const auto res = wldp::simulate_eigenvalues(c, zero);
    REQUIRE(res.paths.size() == 3);
    for (const auto& p : res.paths) {
      for (std::size_t k = 0; k < p.size(); ++k) CHECK(p.values[k] == doctest::Approx(2.5 * p.grid[k]).epsilon(1e-13));
    }
  }
  SUBCASE("m = 1 matches BESQ") {
    const SimConfig c = config(1, 1.3, 0.8, 300, 77);
    const std::vector<double> l0{0.5};
    const auto res = wldp::simulate_eigenvalues(c, l0, 2);
    const wldp::ScalarPath y = wldp::simulate_trace_besq(c, 0.5, 2);
    for (std::size_t k = 0; k < y.size(); ++k) REQUIRE(res.paths[0].values[k] == y.values[k]);
  }
  SUBCASE("bad initial conditions") {
    const SimConfig c = config(2, 3.0, 0.4, 10);
    const std::vector<double> unsorted{1.0, 2.0};
    CHECK_THROWS_AS(wldp::simulate_eigenvalues(c, unsorted), wldp::Error);
    const std::vector<double> wrong_size{1.0};
    CHECK_THROWS_AS(wldp::simulate_eigenvalues(c, wrong_size), wldp::Error);
  }
  SUBCASE("ordering is kept") {
    const SimConfig c = config(3, 4.0, 0.5, 400, 3);
    const std::vector<double> zero(3, 0.0);
    const auto res = wldp::simulate_eigenvalues(c, zero, 0);
    for (std::size_t k = 0; k < res.paths[0].size(); ++k) {
      REQUIRE(res.paths[0].values[k] >= res.paths[1].values[k]);
      REQUIRE(res.paths[1].values[k] >= res.paths[2].values[k]);
      REQUIRE(res.paths[2].values[k] >= 0.0);
    }
    CHECK(res.stats.steps == 400);
  }
  SUBCASE("largest eigenvalue law agrees with the matrix simulation") {
    // Reduced-size version of the acceptance comparison: 3000 replicas per side,
    // threshold at the 0.1% two-sample KS critical value.
    const SimConfig c = config(2, 3.0, 0.4, 200, 1234);
    const std::size_t n = 3000;
    std::vector<double> from_matrix(n), from_eigen(n);
    const std::vector<double> zero(2, 0.0);
    wldp::for_each_replica(n, 0, [&](std::size_t r) {
      wldp::run_wishart_replica(c, SymMatrix::zero(2), r, [&](std::size_t k, double, const auto& x) {
        if (k == c.steps) from_matrix[r] = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x).eigenvalues()(1);
        return true;
      });
    });
    SimConfig ce = c;
    ce.seed = 98765;
    wldp::for_each_replica(n, 0, [&](std::size_t r) {
      wldp::run_eigenvalue_replica(ce, zero, r, [&](std::size_t k, double, std::span<const double> l) {
        if (k == ce.steps) from_eigen[r] = l[0];
        return true;
      });
    });
    CHECK(empirical_ks(from_matrix, from_eigen) <= 1.95 * std::sqrt(2.0 / n));
  }
}

TEST_CASE("tilted flow") {
  const std::vector<double> grid = wldp::uniform_grid(1.0, 1000);
  SUBCASE("k = 0 from zero") {
    wldp::KPath k{grid, std::vector<SymMatrix>(grid.size(), SymMatrix::zero(2))};
    const wldp::SpdPath p = wldp::tilted_flow(1.5, k, SymMatrix::zero(2));
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK((p[i].matrix() - 1.5 * grid[i] * Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-12);
    }
  }
  SUBCASE("constant scalar k") {
    for (double c : {-1.3, 0.4, 2.0}) {
      const double delta = 0.8;
      wldp::KPath k{grid, std::vector<SymMatrix>(grid.size(), SymMatrix{{c}})};
      const wldp::SpdPath p = wldp::tilted_flow(delta, k, SymMatrix{{0.0}});
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double exact = delta / c * std::expm1(c * grid[i]);
        REQUIRE(std::abs(p[i](0, 0) - exact) <= 1e-8);
      }
    }
  }
  SUBCASE("recovers the endpoint path from its own k") {
    const SymMatrix m{{2.0, 0.3}, {0.3, 1.2}};
    const double delta = 3.0;
    const wldp::EndpointPath ep = wldp::optimal_endpoint_path(m, delta, grid);
    const wldp::KPath k = wldp::compute_k_path(ep.path, delta);
    const wldp::SpdPath psi = wldp::tilted_flow(delta, k, SymMatrix::zero(2));
    double worst = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
      worst = std::max(worst, (psi[i].matrix() - ep.path[i].matrix()).norm());
    }
    CHECK(worst <= 1e-6);
  }
}
