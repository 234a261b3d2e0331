#pragma once

// Time-discretized simulation of the small-noise Wishart SDE
//
//   dX_t = eps (sqrt(X_t) dB_t + dB_t^T sqrt(X_t)) + delta I dt,
//
// its trace (a squared Bessel process of dimension delta*m), the coupled
// eigenvalue SDE, and the deterministic tilted flow
//
//   dPsi/dt = (Psi k + k Psi) / 2 + delta I.
//
// Every replica draws from its own engine seeded from (seed, replica), so a
// replica's path does not depend on which thread ran it or in what order.

#include "wishart_ldp/matrix.hpp"
#include "wishart_ldp/path.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace wldp {

enum class Scheme {
  EulerProject,  // clamp negative eigenvalues to zero after the step
  EulerClamp,    // reject and halve the step (Brownian bridge), clamp after 10 halvings
};

const char* to_string(Scheme s) noexcept;
Scheme scheme_from_string(const std::string& s);

struct SimConfig {
  int dim = 1;
  double delta = 1.0;
  double epsilon = 1.0;
  double horizon = 1.0;
  std::size_t steps = 1000;
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::EulerProject;
  // Worker threads for replica fan-out; 0 picks the hardware concurrency.
  // Results never depend on this value.
  unsigned threads = 0;

  double dt() const { return horizon / static_cast<double>(steps); }
};

// Throws InvalidArgument on dim < 1, delta <= 0, eps < 0, horizon <= 0,
// steps < 1 or replicas < 1.
void validate(const SimConfig& cfg);

// Engine for one replica, derived statelessly from (seed, replica).
std::mt19937_64 replica_engine(std::uint64_t seed, std::uint64_t replica);

struct RepairStats {
  std::size_t steps = 0;
  std::size_t repaired = 0;         // steps whose first candidate left the cone
  std::size_t halvings = 0;         // EulerClamp sub-steps taken
  std::size_t clamp_fallbacks = 0;  // EulerClamp gave up and projected

  double repair_rate() const {
    return steps == 0 ? 0.0 : static_cast<double>(repaired) / static_cast<double>(steps);
  }
  RepairStats& operator+=(const RepairStats& o);
};

// Called with the state after each step (and once with x0 at step 0).
// Returning false stops the replica early.
using WishartObserver =
    std::function<bool(std::size_t step, double t, const Eigen::Ref<const Eigen::MatrixXd>& x)>;

RepairStats run_wishart_replica(const SimConfig& cfg, const SymMatrix& x0, std::uint64_t replica,
                                const WishartObserver& observer);

SpdPath simulate_wishart(const SimConfig& cfg, const SymMatrix& x0, std::uint64_t replica = 0,
                         RepairStats* stats = nullptr);

// Euler scheme for dY = 2 eps sqrt(Y) dbeta + delta m dt, clamped at 0.
ScalarPath simulate_trace_besq(const SimConfig& cfg, double y0, std::uint64_t replica = 0);

using ScalarObserver = std::function<bool(std::size_t step, double t, double y)>;
void run_besq_replica(const SimConfig& cfg, double y0, std::uint64_t replica,
                      const ScalarObserver& observer);

struct EigenvalueSimOptions {
  // Minimum gap used in the interaction term. Unset selects
  // max(1e-8 (1 + mean lambda), eps sqrt(dt mean lambda)).
  std::optional<double> g_min;
};

struct EigenvalueStats {
  std::size_t steps = 0;
  std::size_t sort_events = 0;     // steps after which the ordering had to be restored
  std::size_t floor_activations = 0;
  std::size_t zero_clamps = 0;
};

using EigenvalueObserver =
    std::function<bool(std::size_t step, double t, std::span<const double> lambda)>;

// lambda0 must be strictly decreasing and non-negative, or all zero.
EigenvalueStats run_eigenvalue_replica(const SimConfig& cfg, std::span<const double> lambda0,
                                       std::uint64_t replica, const EigenvalueObserver& observer,
                                       const EigenvalueSimOptions& opts = {});

struct EigenvalueSimResult {
  std::vector<ScalarPath> paths;  // paths[i] follows the i-th largest eigenvalue
  EigenvalueStats stats;
};

EigenvalueSimResult simulate_eigenvalues(const SimConfig& cfg, std::span<const double> lambda0,
                                         std::uint64_t replica = 0,
                                         const EigenvalueSimOptions& opts = {});

// RK4 integration of dPsi/dt = (Psi k + k Psi)/2 + delta I on k's grid. k is
// interpolated between nodes with cubic Lagrange polynomials; an
// extrapolated origin node is ignored in favour of the interior nodes.
SpdPath tilted_flow(double delta, const KPath& k, const SymMatrix& x0);

// Runs body(replica) for replica = 0..count-1 on up to `threads` workers.
// body must only write to per-replica slots.
void for_each_replica(std::size_t count, unsigned threads,
                      const std::function<void(std::size_t)>& body);

}  // namespace wldp
