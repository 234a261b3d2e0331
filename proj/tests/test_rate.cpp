#include "oracles.hpp"

#include "wishart_ldp/error.hpp"
#include "wishart_ldp/rate.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

using wldp::ScalarPath;
using wldp::SpdPath;
using wldp::SymMatrix;

namespace {

using MatrixFn = std::function<Eigen::MatrixXd(double)>;

SpdPath sample(const MatrixFn& phi, std::size_t steps, double horizon = 1.0) {
  const std::vector<double> grid = wldp::uniform_grid(horizon, steps);
  std::vector<SymMatrix> values;
  for (double t : grid) values.emplace_back(phi(t));
  return SpdPath(grid, values);
}

ScalarPath sample_scalar(const std::function<double(double)>& f, std::size_t steps, double horizon = 1.0) {
  ScalarPath p;
  p.grid = wldp::uniform_grid(horizon, steps);
  for (double t : p.grid) p.values.push_back(f(t));
  return p;
}

Eigen::MatrixXd eye(int m) { return Eigen::MatrixXd::Identity(m, m); }

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// Independent K: 1/2 Tr M - delta/2 ln det M - m delta/2 + m delta/2 ln delta,
// evaluated term by term from the formula.
double k_formula(const Eigen::MatrixXd& m, double delta) {
  const double dim = static_cast<double>(m.rows());
  return 0.5 * m.trace() - 0.5 * delta * std::log(m.determinant()) - 0.5 * dim * delta +
         0.5 * dim * delta * std::log(delta);
}

double scalar_k(double a, double delta) { return 0.5 * (a - delta) - 0.5 * delta * std::log(a / delta); }

// Smooth symmetric test direction with random coefficients.
wldp::KPath random_direction(const std::vector<double>& grid, int m, std::mt19937_64& rng) {
  const SymMatrix a = oracle::random_symmetric(m, rng, 0.5);
  const SymMatrix b = oracle::random_symmetric(m, rng, 0.5);
  const SymMatrix c = oracle::random_symmetric(m, rng, 0.5);
  std::uniform_real_distribution<double> freq(0.5, 4.0);
  const double w = freq(rng);
  wldp::KPath h;
  h.grid = grid;
  for (double t : grid) h.values.push_back(a + std::sin(w * t) * b + (t * t) * c);
  return h;
}

}  // namespace

TEST_CASE("compute_k_path examples") {
  SUBCASE("drift line gives k = 0") {
    const SpdPath p = sample([](double t) -> Eigen::MatrixXd { return 2.5 * t * eye(3); }, 100);
    const wldp::KPath k = wldp::compute_k_path(p, 2.5);
    CHECK(k.origin_extrapolated);
    for (const auto& v : k.values) CHECK(v.matrix().norm() <= 1e-12);
  }
  SUBCASE("scalar t^2 with delta = 0") {
    const SpdPath p = sample([](double t) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, t * t); }, 200);
    const wldp::KPath k = wldp::compute_k_path(p, 0.0);
    for (std::size_t j = 1; j < k.size(); ++j) CHECK(k.values[j](0, 0) == doctest::Approx(2.0 / p.grid()[j]).epsilon(1e-10));
  }
  SUBCASE("matrix path against the vectorized oracle") {
    const double delta = 2.0;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
    a(0, 0) = 1.0;
    a(1, 1) = -0.5;
    const SpdPath p = sample([&](double t) -> Eigen::MatrixXd { return delta * t * eye(2) + t * t * a; }, 49);
    const wldp::KPath k = wldp::compute_k_path(p, delta);
    for (std::size_t j = 1; j < p.size(); ++j) {
      const double t = p.grid()[j];
      const Eigen::MatrixXd rhs = 2.0 * (2.0 * t * a);  // 2 (phi' - delta I)
      const Eigen::MatrixXd expect = oracle::sylvester(p[j].matrix(), rhs);
      CHECK((k.values[j].matrix() - expect).norm() <= 1e-8 * (1.0 + expect.norm()));
    }
  }
  SUBCASE("Sylvester residual against the finite-difference derivative") {
    std::mt19937_64 rng(4);
    const SymMatrix a = oracle::random_symmetric(3, rng, 0.3);
    const SpdPath p = sample([&](double t) -> Eigen::MatrixXd { return 2.0 * t * eye(3) + t * t * a.matrix() + std::sin(t) * t * t * eye(3); }, 300);
    const wldp::KPath k = wldp::compute_k_path(p, 2.0);
    const auto dphi = wldp::fd_derivative(p.grid(), p.values());
    for (std::size_t j = 1; j < p.size(); ++j) {
      const Eigen::MatrixXd rhs = 2.0 * (dphi[j].matrix() - 2.0 * eye(3));
      const Eigen::MatrixXd lhs = k.values[j].matrix() * p[j].matrix() + p[j].matrix() * k.values[j].matrix();
      REQUIRE((lhs - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
    }
  }
  SUBCASE("degenerate interior node") {
    const SpdPath p = sample([](double t) -> Eigen::MatrixXd {
      Eigen::MatrixXd v = eye(2) * t;
      v(1, 1) = t * std::abs(t - 0.5);
      return v;
    }, 10);
    try {
      wldp::compute_k_path(p, 1.0);
      FAIL("expected DegeneratePath");
    } catch (const wldp::Error& e) {
      CHECK(e.code() == wldp::ErrorCode::DegeneratePath);
    }
    wldp::RateOptions opts;
    opts.skip_singular = true;
    const wldp::RateReport r = wldp::rate_I(p, 1.0, opts);
    CHECK(r.flags.singular_sylvester_skipped == 1);
  }
}

TEST_CASE("rate_I examples") {
  SUBCASE("drift line has zero rate") {
    const wldp::RateReport r = wldp::rate_I(sample([](double t) -> Eigen::MatrixXd { return 3.0 * t * eye(2); }, 100), 3.0);
    CHECK(std::abs(r.value) <= 1e-14);
    CHECK(r.flags.small_time_limit_ok);
    CHECK_FALSE(r.flags.infinite);
  }
  SUBCASE("scalar path against direct quadrature") {
    const double delta = 2.0;
    const double exact = oracle::integrate(
        [](double t) {
          const double phi = 2.0 * t + 0.5 * t * t;
          return 0.125 * t * t / phi;
        },
        0.0, 1.0);
    // Closed form of the same integral: (1 - 4 ln(5/4)) / 4.
    CHECK(exact == doctest::Approx(0.25 * (1.0 - 4.0 * std::log(1.25))).epsilon(1e-12));
    const SpdPath p = sample([](double t) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, 2.0 * t + 0.5 * t * t); }, 2000);
    const wldp::RateReport r = wldp::rate_I(p, delta);
    CHECK(std::abs(r.value - exact) <= 1e-6);
    CHECK(std::abs(r.richardson - exact) <= std::abs(r.value - exact));
    CHECK(r.flags.small_time_limit_ok);

    const wldp::RateReport fine =
        wldp::rate_I(sample([](double t) -> Eigen::MatrixXd { return Eigen::MatrixXd::Constant(1, 1, 2.0 * t + 0.5 * t * t); }, 20000), delta);
    CHECK(std::abs(fine.value - exact) <= 1e-8);
  }
  SUBCASE("optimal endpoint path attains K") {
    const double delta = 3.0;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
    m(0, 0) = 5.0;
    m(1, 1) = 1.0;
    const SpdPath p = sample([&](double t) -> Eigen::MatrixXd { return delta * t * eye(2) + t * t * (m - delta * eye(2)); }, 10000);
    const wldp::RateReport r = wldp::rate_I(p, delta);
    const double k = k_formula(m, delta);
    CHECK(k == doctest::Approx(3.0 - 1.5 * std::log(5.0) - 3.0 + 3.0 * std::log(3.0)));
    CHECK(std::abs(r.value - k) <= 1e-5);
  }
  SUBCASE("value equals the sum of contributions and is non-negative") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
      const SymMatrix a = oracle::random_symmetric(3, rng, 0.4);
      const SpdPath p = sample([&](double t) -> Eigen::MatrixXd { return 2.0 * t * eye(3) + t * t * a.matrix(); }, 500);
      const wldp::RateReport r = wldp::rate_I(p, 2.0);
      CHECK(r.contributions.size() == p.size() - 1);
      CHECK(std::abs(r.value - sum(r.contributions)) <= 1e-12 * std::abs(r.value));
      CHECK(r.value >= 0.0);
      for (double c : r.contributions) CHECK(c >= 0.0);
    }
  }
}

TEST_CASE("small-time diagnostic") {
  SUBCASE("slope away from delta at the origin is flagged infinite") {
    const wldp::RateReport r = wldp::rate_I(sample([](double t) -> Eigen::MatrixXd { return 5.0 * t * eye(2); }, 200), 2.0);
    CHECK_FALSE(r.flags.small_time_limit_ok);
    CHECK(r.flags.infinite);
    CHECK(std::isfinite(r.value));
  }
  SUBCASE("paths that approach the drift line pass") {
    const wldp::RateReport r =
        wldp::rate_I(sample([](double t) -> Eigen::MatrixXd { return 2.0 * t * eye(2) + t * t * eye(2); }, 200), 2.0);
    CHECK(r.flags.small_time_limit_ok);
    CHECK_FALSE(r.flags.infinite);
  }
}

TEST_CASE("orthogonal invariance") {
  std::mt19937_64 rng(12);
  for (int m : {2, 3}) {
    const SymMatrix a = oracle::random_symmetric(m, rng, 0.3);
    const SymMatrix b = oracle::random_symmetric(m, rng, 0.3);
    const MatrixFn phi = [&](double t) -> Eigen::MatrixXd { return 2.0 * t * eye(m) + t * t * a.matrix() + t * t * t * b.matrix(); };
    const Eigen::MatrixXd q = oracle::random_orthogonal(m, rng);
    const double r1 = wldp::rate_I(sample(phi, 400), 2.0).value;
    const double r2 = wldp::rate_I(sample([&](double t) -> Eigen::MatrixXd { return Eigen::MatrixXd(q * phi(t) * q.transpose()); }, 400), 2.0).value;
    CHECK(std::abs(r1 - r2) <= 1e-10);
  }
}

TEST_CASE("dual functional") {
  const double delta = 2.0;
  std::mt19937_64 rng(31);
  const SymMatrix a = oracle::random_symmetric(2, rng, 0.4);
  const SpdPath phi = sample([&](double t) -> Eigen::MatrixXd { return delta * t * eye(2) + t * t * a.matrix() + 0.3 * t * t * t * eye(2); }, 2000);
  const wldp::RateReport rate = wldp::rate_I(phi, delta);

  SUBCASE("zero direction") {
    wldp::KPath h{phi.grid(), std::vector<SymMatrix>(phi.size(), SymMatrix::zero(2))};
    CHECK(wldp::dual_phi(phi, h, delta) == 0.0);
  }
  SUBCASE("equality at k / 4") {
    wldp::KPath h = wldp::compute_k_path(phi, delta);
    for (auto& v : h.values) v *= 0.25;
    CHECK(std::abs(wldp::dual_phi(phi, h, delta) - rate.value) <= 1e-6);
  }
  SUBCASE("upper bound over random directions") {
    for (int trial = 0; trial < 100; ++trial) {
      const wldp::KPath h = random_direction(phi.grid(), 2, rng);
      REQUIRE(wldp::dual_phi(phi, h, delta) <= rate.value + 1e-6);
    }
  }
  SUBCASE("integration by parts agrees") {
    for (int trial = 0; trial < 10; ++trial) {
      const wldp::KPath h = random_direction(phi.grid(), 2, rng);
      CHECK(std::abs(wldp::dual_phi(phi, h, delta) - wldp::dual_phi_by_parts(phi, h, delta)) <= 1e-5);
    }
  }
}

TEST_CASE("rate_J") {
  const double delta = 1.5;
  const auto x1 = sample_scalar([&](double t) { return delta * t + 0.8 * t * t; }, 1000);
  const auto x2 = sample_scalar([&](double t) { return delta * t - 0.4 * t * t; }, 1000);
  const auto x3 = sample_scalar([&](double t) { return delta * t + 0.2 * std::sin(3.0 * t) * t; }, 1000);

  SUBCASE("drift lines") {
    const auto line = sample_scalar([&](double t) { return delta * t; }, 100);
    const std::vector<ScalarPath> xs{line, line};
    CHECK(std::abs(wldp::rate_J(xs, delta).value) <= 1e-14);
  }
  SUBCASE("m = 1 equals the scalar rate and rate_I") {
    const std::vector<ScalarPath> xs{x1};
    const double j = wldp::rate_J(xs, delta).value;
    CHECK(j == wldp::scalar_rate(x1, delta).value);
    const SpdPath p(x1.grid, [&] {
      std::vector<SymMatrix> v;
      for (double y : x1.values) v.push_back(SymMatrix{{y}});
      return v;
    }());
    CHECK(std::abs(wldp::rate_I(p, delta).value - j) <= 1e-12);
  }
  SUBCASE("diagonal contraction") {
    const std::vector<ScalarPath> xs{x1, x2, x3};
    std::vector<SymMatrix> v;
    for (std::size_t k = 0; k < x1.size(); ++k) {
      Eigen::VectorXd d(3);
      d << x1.values[k], x2.values[k], x3.values[k];
      v.push_back(SymMatrix::diagonal(d));
    }
    const double i = wldp::rate_I(SpdPath(x1.grid, v), delta).value;
    const double j = wldp::rate_J(xs, delta).value;
    CHECK(std::abs(i - j) <= 1e-8);
  }
  SUBCASE("vanishing on an interval is infinite") {
    auto z = sample_scalar([&](double t) { return t < 0.3 ? delta * t : std::max(0.0, delta * 0.3 - 5.0 * (t - 0.3)); }, 1000);
    const std::vector<ScalarPath> xs{x1, z};
    const wldp::RateReport r = wldp::rate_J(xs, delta);
    CHECK(r.flags.infinite);
    CHECK(std::isfinite(r.value));
  }
  SUBCASE("negative values are rejected") {
    auto z = x2;
    z.values[5] = -1.0;
    CHECK_THROWS_AS(wldp::scalar_rate(z, delta), wldp::Error);
  }
}

TEST_CASE("rate_K") {
  CHECK(std::abs(wldp::rate_K(SymMatrix::scaled_identity(3, 2.0), 2.0)) <= 1e-15);
  CHECK(wldp::rate_K(SymMatrix{{2.0}}, 1.0) == doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-14));

  Eigen::VectorXd d(2);
  d << 5.0, 1.0;
  const double k = wldp::rate_K(SymMatrix::diagonal(d), 3.0);
  CHECK(k == doctest::Approx(3.0 - 1.5 * std::log(5.0) - 3.0 + 3.0 * std::log(3.0)).epsilon(1e-14));
  CHECK(std::abs(k - oracle::legendre_grid_search(d, 3.0)) <= 1e-6);

  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix m = oracle::random_spd(3, rng, 0.2, 6.0);
    CHECK(wldp::rate_K(m, 2.0) == doctest::Approx(k_formula(m.matrix(), 2.0)).epsilon(1e-10));
    CHECK(wldp::rate_K(m, 2.0) >= 0.0);
  }
  try {
    wldp::rate_K(SymMatrix{{1.0, 0.0}, {0.0, 0.0}}, 1.0);
    FAIL("expected DomainError");
  } catch (const wldp::Error& e) {
    CHECK(e.code() == wldp::ErrorCode::DomainError);
  }
}

TEST_CASE("optimal endpoint path") {
  const double delta = 3.0;
  Eigen::VectorXd d(2);
  d << 5.0, 1.0;
  const SymMatrix m = SymMatrix::diagonal(d);

  SUBCASE("M = delta I is the drift line") {
    const auto ep = wldp::optimal_endpoint_path(SymMatrix::scaled_identity(2, delta), delta, wldp::uniform_grid(1.0, 100));
    for (std::size_t k = 0; k < ep.path.size(); ++k) {
      CHECK((ep.path[k].matrix() - delta * ep.path.grid()[k] * eye(2)).norm() <= 1e-14);
    }
    CHECK(ep.euler_lagrange_residual <= 1e-10);
  }
  SUBCASE("hits M exactly and satisfies the Euler-Lagrange equation") {
    std::mt19937_64 rng(6);
    const SymMatrix r = oracle::random_spd(3, rng, 0.5, 4.0);
    const auto ep_r = wldp::optimal_endpoint_path(r, delta, wldp::uniform_grid(1.0, 50));
    CHECK(ep_r.path[50] == r);

    const auto ep = wldp::optimal_endpoint_path(m, delta, wldp::uniform_grid(1.0, 10000));
    CHECK(ep.path[10000] == m);
    CHECK(ep.euler_lagrange_residual <= 1e-3);
  }
  SUBCASE("perturbed paths with the same endpoint cost at least K") {
    const double k = wldp::rate_K(m, delta);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const SymMatrix s = oracle::random_symmetric(2, rng);
      const double scale = 2.0 * amp(rng) / std::max(1e-12, wldp::norms(s).op);
      const double w = 1.0 + 3.0 * std::abs(amp(rng));
      const SpdPath psi = sample(
          [&](double t) -> Eigen::MatrixXd {
            return Eigen::MatrixXd(delta * t * (1.0 - t) * eye(2) + t * t * m.matrix() +
                                   scale * t * t * (1.0 - t) * std::cos(w * t) * s.matrix());
          },
          2000);
      REQUIRE(psi[2000] == m);
      const wldp::RateReport r = wldp::rate_I(psi, delta);
      REQUIRE_FALSE(r.flags.infinite);
      CHECK(r.value >= k - 1e-6);
    }
  }
}

TEST_CASE("underline_f") {
  const double delta = 2.0;
  SUBCASE("drift line is its own lower envelope") {
    const auto f = sample_scalar([&](double t) { return delta * t; }, 100);
    const auto u = wldp::underline_f(f, delta);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(u.values[k] == f.values[k]);
  }
  SUBCASE("non-negative excess gives the drift line") {
    const auto f = sample_scalar([&](double t) { return delta * t + t * (1.0 - t); }, 100);
    const auto u = wldp::underline_f(f, delta);
    for (std::size_t k = 0; k < f.size(); ++k) CHECK(u.values[k] == doctest::Approx(delta * f.grid[k]));
  }
  SUBCASE("a dip below the drift line against the brute-force running infimum") {
    const auto f = sample_scalar([&](double t) { return delta * t + t * t * (t - 0.5); }, 999);
    const auto u = wldp::underline_f(f, delta);
    const auto brute = oracle::running_inf(f, delta);
    CHECK(u.values[0] == 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) {
      CHECK(u.values[k] <= f.values[k]);
      CHECK(std::abs(u.values[k] - brute[k]) <= 1e-14);
    }
  }
}

TEST_CASE("rate_I_max") {
  const double delta = 2.0;
  SUBCASE("drift line") {
    const auto f = sample_scalar([&](double t) { return delta * t; }, 200);
    for (int m : {1, 2, 5}) CHECK(std::abs(wldp::rate_I_max(f, delta, m).value) <= 1e-14);
  }
  SUBCASE("m = 1 is the scalar rate") {
    const auto f = sample_scalar([&](double t) { return delta * t + t * t; }, 200);
    CHECK(wldp::rate_I_max(f, delta, 1).value == wldp::scalar_rate(f, delta).value);
  }
  SUBCASE("a t with a > delta is infinite") {
    // The integrand (a - delta)^2 / (8 a t) is not integrable at the origin.
    const auto f = sample_scalar([&](double t) { return 3.0 * t; }, 1000);
    const wldp::RateReport r = wldp::rate_I_max(f, delta, 2);
    CHECK(r.flags.infinite);
  }
  SUBCASE("dip below the drift line against quadrature of both terms") {
    // f = delta t + t^3 - t^2/2; f - delta t attains its running minimum on [0, 1/3]
    // and stays above it afterwards, so the lower envelope is f on [0, 1/3] and
    // delta t - 1/54 on [1/3, 1].
    const auto fn = [&](double t) { return delta * t + t * t * t - 0.5 * t * t; };
    const auto integrand = [&](double t) {
      const double e = 3.0 * t * t - t;
      return 0.125 * e * e / fn(t);
    };
    const double first = oracle::integrate(integrand, 0.0, 1.0);
    const double second = oracle::integrate(integrand, 0.0, 1.0 / 3.0);
    for (int m : {2, 3}) {
      const double exact = first + (m - 1) * second;
      const auto f = sample_scalar(fn, 30000);
      const wldp::RateReport r = wldp::rate_I_max(f, delta, m);
      CHECK_FALSE(r.flags.infinite);
      CHECK(std::abs(r.value - exact) <= 1e-4 * exact);
    }
  }
}

TEST_CASE("rate_K_max") {
  for (double delta : {0.5, 1.0, 2.0}) {
    for (int m : {1, 2, 4}) {
      CHECK(wldp::rate_K_max(delta, delta, m) == 0.0);
      CHECK(wldp::rate_K_max(delta * (1.0 + 1e-9), delta, m) == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(wldp::rate_K_max(delta * (1.0 - 1e-9), delta, m) == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  CHECK(wldp::rate_K_max(2.0, 1.0, 1) == doctest::Approx(0.5 * (1.0 - std::log(2.0))).epsilon(1e-14));
  CHECK(wldp::rate_K_max(2.0, 1.0, 1) == doctest::Approx(wldp::rate_K(SymMatrix{{2.0}}, 1.0)).epsilon(1e-14));
  CHECK(wldp::rate_K_max(1.0, 2.0, 3) == doctest::Approx(3.0 * (0.5 - 1.0 + std::log(2.0))).epsilon(1e-14));
  CHECK_THROWS_AS(wldp::rate_K_max(0.0, 1.0, 2), wldp::Error);

  SUBCASE("constrained minimization oracle over diagonal M") {
    // min K(diag(d)) subject to max d_i = a, by grid search on the free entries.
    for (double delta : {1.0, 2.0}) {
      for (int m : {2, 3}) {
        for (double a : {0.4, 1.0, 1.7, 3.5}) {
          double free_min = std::numeric_limits<double>::infinity();
          for (int i = 1; i <= 20000; ++i) free_min = std::min(free_min, scalar_k(a * i / 20000.0, delta));
          const double oracle_value = scalar_k(a, delta) + (m - 1) * free_min;
          CHECK(wldp::rate_K_max(a, delta, m) == doctest::Approx(oracle_value).epsilon(1e-6));
          if (a > delta) {
            CHECK(wldp::rate_K_max(a, delta, m) <= wldp::rate_K(SymMatrix::scaled_identity(m, a), delta));
          }
        }
      }
    }
  }
}

TEST_CASE("class F diagnostic") {
  const double delta = 2.0;
  SUBCASE("drift line") {
    const auto d = wldp::class_F_diagnostic(sample_scalar([&](double t) { return delta * t; }, 200), delta);
    CHECK(d.verdict == wldp::ClassF::InF);
  }
  SUBCASE("steeper line touches its envelope only at the origin") {
    const auto d = wldp::class_F_diagnostic(sample_scalar([&](double t) { return 3.0 * t; }, 200), delta);
    CHECK(d.verdict == wldp::ClassF::InF);
    CHECK(d.contact_nodes == 0);
  }
  SUBCASE("quadratic deficit has zero density and a positive terminal atom") {
    // H = -c / (delta - c t) solves H' + H^2 = 0.
    for (std::size_t n : {400u, 800u}) {
      const auto d = wldp::class_F_diagnostic(sample_scalar([&](double t) { return delta * t - 0.5 * t * t; }, n), delta);
      CHECK(d.verdict == wldp::ClassF::InF);
      CHECK(d.terminal_in_contact);
      CHECK(d.terminal_atom == doctest::Approx(0.5 * 0.5 / (delta - 0.5)).epsilon(1e-3));
    }
  }
  SUBCASE("cubic deficit has negative density near the origin") {
    for (std::size_t n : {400u, 800u}) {
      const auto f = sample_scalar([&](double t) { return delta * t - 0.5 * t * t * t; }, n);
      const auto d = wldp::class_F_diagnostic(f, delta);
      CHECK(d.verdict == wldp::ClassF::NotInF);
      CHECK(d.min_density < 0.0);
      CHECK(wldp::rate_I_max(f, delta, 2).flags.not_in_class_f);
      CHECK_FALSE(wldp::rate_I_max(f, delta, 1).flags.not_in_class_f);
    }
  }
  SUBCASE("non-positive paths are rejected") {
    auto f = sample_scalar([&](double t) { return delta * t; }, 10);
    f.values[4] = 0.0;
    CHECK_THROWS_AS(wldp::class_F_diagnostic(f, delta), wldp::Error);
  }
}
