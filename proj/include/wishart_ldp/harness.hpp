#pragma once

// Experiment harness: one config in, one self-describing JSON report out.
//
// Config layout (JSON, or the equivalent TOML tables):
//   { "kind": "laplace_check", "sim": {m, delta, eps, T, steps|dt, replicas, seed, scheme, threads},
//     "payload": {...}, "output_path": "report.json" }
//
// Payload keys per kind:
//   laplace_check  thetas [matrix] | battery "default", x (matrix, default 0), z_max (3)
//   additivity     delta2, x1, x2 (matrices, default 0), thetas [matrix], z_max (3)
//   ldp_scan       epsilons [decreasing], radius, target "zero_rate" | {poly: [A1, A2, ...]}
//                  (phi(t) = sum_k t^(k+1) A_k, k from 0), min_hits (20)
//   eigen_contract ks_max (0.05), eigen_seed (derived from seed), g_min, diagonal [c_1..c_m]
//   rate_eval      functional I | J | I_max | K | K_max, path_file | path (inline), M, a
//   riccati_eval   measure_file | measure (inline), steps (10000), x (matrix, default 0)
//   simulate       process wishart | trace | eigenvalues, x0 (matrix, default 0), paths (1)

#include "wishart_ldp/io.hpp"
#include "wishart_ldp/simulator.hpp"

#include <string>

namespace wldp {

enum class ExperimentKind { LaplaceCheck, Additivity, LdpScan, EigenContract, RateEval, RiccatiEval, Simulate };

const char* to_string(ExperimentKind k) noexcept;
ExperimentKind experiment_kind_from_string(const std::string& s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::LaplaceCheck;
  SimConfig sim;
  Json payload = Json::object();
  std::string output_path;
};

// Parses and validates everything, payload included; nothing is simulated.
ExperimentSpec parse_experiment(const Json& config);
Json to_json(const ExperimentSpec& spec);

enum class Verdict { Pass, Fail, Complete };
const char* to_string(Verdict v) noexcept;

struct ExperimentReport {
  Verdict verdict = Verdict::Complete;
  Json json;        // {kind, config, timestamp?, verdict, result}
  std::string csv;  // plottable series; empty when the kind has none
};

struct RunOptions {
  bool timestamp = true;
};

ExperimentReport run_experiment(const ExperimentSpec& spec, const RunOptions& opts = {});

// Byte-stable serialization used for files and the determinism check.
std::string dump_report(const Json& report);

// Wilson score interval for hits out of n at z standard deviations.
struct Interval {
  double lo, hi;
};
Interval wilson_interval(std::size_t hits, std::size_t n, double z = 1.959963984540054);

// Two-sample Kolmogorov-Smirnov statistic.
double ks_distance(std::vector<double> a, std::vector<double> b);

}  // namespace wldp
