// wishart-ldp: command-line front end over the C API.
//
// Exit status: 0 on PASS or a completed report, 2 on a statistical FAIL,
// 1 on any input or runtime error.

#include "wishart_ldp/wishart_ldp.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

namespace {

struct Command {
  const char* name;
  const char* kind;
  const char* help;
  const char* csv;
};

constexpr Command kCommands[] = {
    {"simulate", "simulate", "Simulate Wishart, trace (BESQ) or eigenvalue paths",
     "CSV: t, x00, x01, ... (upper triangle) for the first Wishart path; t, x1..xm for trace/eigenvalue paths"},
    {"rate", "rate_eval", "Evaluate a rate functional (I, J, I_max, K, K_max) on a path file",
     "CSV: t_start, t_end, contribution (one row per grid interval)"},
    {"riccati", "riccati_eval", "Solve the backward Riccati equation for a measure and evaluate the Laplace transform",
     "CSV: t, F00, F01, ... (upper triangle of F at each node, right-continuous)"},
    {"laplace-check", "laplace_check", "Monte Carlo check of the Wishart Laplace transform (default battery without --config)",
     "CSV: m, delta, theta_index, analytic, riccati, mean, se, z"},
    {"additivity", "additivity", "Monte Carlo check that independent Wishart processes add their parameters",
     "CSV: theta_index, analytic, sum_mean, sum_se, direct_mean, direct_se, z_sum, z_direct, z_two_sample"},
    {"ldp-scan", "ldp_scan", "Tube-probability scan over decreasing eps",
     "CSV: eps, eps2, hits, replicas, p_hat, p_lo, p_hi, scaled_log_p, scaled_log_lo, scaled_log_hi"},
    {"eigen-contract", "eigen_contract", "Compare matrix and eigenvalue pipelines (KS on lambda_max(T)) plus the diagonal I = J check",
     "CSV: q, lambda_max_matrix, lambda_max_eigen (percentiles 1..99)"},
};

struct Overrides {
  std::string config;
  std::optional<int> m;
  std::optional<double> delta;
  std::optional<std::string> eps;
  std::optional<double> horizon;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> replicas;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheme;
  std::optional<unsigned> threads;
  std::vector<std::string> sets;
  std::string out;
  std::string csv;
  bool no_timestamp = false;
  bool quiet = false;
};

struct ConfigDeleter {
  void operator()(wldp_config* c) const { wldp_config_free(c); }
};
struct ReportDeleter {
  void operator()(wldp_report* r) const { wldp_report_free(r); }
};
using ConfigPtr = std::unique_ptr<wldp_config, ConfigDeleter>;
using ReportPtr = std::unique_ptr<wldp_report, ReportDeleter>;

class CApiError : public std::runtime_error {
 public:
  explicit CApiError(wldp_status s)
      : std::runtime_error(std::string(wldp_status_string(s)) + ": " + wldp_last_error()) {}
};

void check(wldp_status s) {
  if (s != WLDP_OK) throw CApiError(s);
}

std::string take(char* s) {
  std::string out(s ? s : "");
  wldp_string_free(s);
  return out;
}

void set(wldp_config* cfg, const std::string& key, const std::string& json_value) {
  check(wldp_config_set(cfg, key.c_str(), json_value.c_str()));
}

std::string number(double v) { return nlohmann::json(v).dump(); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !(f << content)) throw std::runtime_error("cannot write '" + path + "'");
}

int run(const Command& cmd, const Overrides& o) {
  wldp_config* raw = nullptr;
  if (!o.config.empty()) {
    check(wldp_config_load_file(o.config.c_str(), &raw));
  } else {
    check(wldp_config_new(cmd.kind, &raw));
  }
  ConfigPtr cfg(raw);

  const auto loaded = nlohmann::json::parse(take([&] {
    char* s = nullptr;
    check(wldp_config_to_json(cfg.get(), &s));
    return s;
  }()));
  if (loaded.contains("kind") && loaded["kind"].is_string()) {
    std::string k = loaded["kind"].get<std::string>();
    for (char& c : k) c = c == '-' ? '_' : c;
    if (k != cmd.kind) {
      throw std::runtime_error("config kind '" + loaded["kind"].get<std::string>() + "' does not match subcommand '" +
                               cmd.name + "'");
    }
  }
  set(cfg.get(), "kind", nlohmann::json(cmd.kind).dump());

  if (o.m) set(cfg.get(), "sim.m", std::to_string(*o.m));
  if (o.delta) set(cfg.get(), "sim.delta", number(*o.delta));
  if (o.horizon) set(cfg.get(), "sim.T", number(*o.horizon));
  if (o.steps) set(cfg.get(), "sim.steps", std::to_string(*o.steps));
  if (o.replicas) set(cfg.get(), "sim.replicas", std::to_string(*o.replicas));
  if (o.seed) set(cfg.get(), "sim.seed", std::to_string(*o.seed));
  if (o.threads) set(cfg.get(), "sim.threads", std::to_string(*o.threads));
  if (o.scheme) set(cfg.get(), "sim.scheme", nlohmann::json(*o.scheme).dump());
  if (o.eps) {
    // ldp-scan sweeps a comma-separated list; everything else takes one noise scale.
    if (std::string(cmd.kind) == "ldp_scan") {
      set(cfg.get(), "payload.epsilons", "[" + *o.eps + "]");
    } else {
      set(cfg.get(), "sim.eps", *o.eps);
    }
  }
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("--set expects key=json, got '" + kv + "'");
    set(cfg.get(), kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.out.empty()) set(cfg.get(), "output_path", nlohmann::json(o.out).dump());

  check(wldp_config_validate(cfg.get()));
  wldp_report* rep_raw = nullptr;
  check(wldp_run(cfg.get(), o.no_timestamp ? 0 : 1, &rep_raw));
  ReportPtr rep(rep_raw);

  char* s = nullptr;
  check(wldp_report_json(rep.get(), &s));
  const std::string json = take(s);
  check(wldp_config_output_path(cfg.get(), &s));
  const std::string out_path = take(s);
  if (out_path.empty()) {
    std::cout << json;
  } else {
    write_file(out_path, json);
    if (!o.quiet) {
      check(wldp_report_summary(rep.get(), &s));
      std::cout << take(s) << "\n";
    }
  }
  if (!o.csv.empty()) {
    check(wldp_report_csv(rep.get(), &s));
    write_file(o.csv, take(s));
  }
  wldp_verdict verdict = WLDP_VERDICT_COMPLETE;
  check(wldp_report_verdict(rep.get(), &verdict));
  const char* label = verdict == WLDP_VERDICT_PASS ? "PASS" : verdict == WLDP_VERDICT_FAIL ? "FAIL" : "COMPLETE";
  std::cerr << cmd.name << ": " << label << "\n";
  return verdict == WLDP_VERDICT_FAIL ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wishart process large deviations: simulation, rate functionals, Riccati/Laplace checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", wldp_version());

  Overrides o;
  const Command* selected = nullptr;
  for (const Command& cmd : kCommands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->footer(std::string(cmd.csv) + "\nExit status: 0 PASS/COMPLETE, 2 statistical FAIL, 1 input error.");
    sub->add_option("--config", o.config, "JSON or TOML experiment config")->check(CLI::ExistingFile);
    sub->add_option("--m", o.m, "Matrix dimension")->check(CLI::PositiveNumber);
    sub->add_option("--delta", o.delta, "Drift parameter delta");
    sub->add_option("--eps", o.eps, "Noise scale; for ldp-scan a comma-separated decreasing list");
    sub->add_option("--T", o.horizon, "Time horizon");
    sub->add_option("--steps", o.steps, "Time steps");
    sub->add_option("--replicas", o.replicas, "Monte Carlo replicas");
    sub->add_option("--seed", o.seed, "RNG seed");
    sub->add_option("--scheme", o.scheme, "EULER_PROJECT or EULER_CLAMP");
    sub->add_option("--threads", o.threads, "Worker threads (0 = all cores; never changes results)");
    sub->add_option("--set", o.sets, "Extra setting key=json, e.g. payload.radius=0.5 (repeatable)");
    sub->add_option("--out", o.out, "Write the JSON report here instead of stdout");
    sub->add_option("--csv", o.csv, "Write the plottable series here");
    sub->add_flag("--no-timestamp", o.no_timestamp, "Omit the timestamp so reruns are byte-identical");
    sub->add_flag("--quiet", o.quiet, "Do not print the summary when writing to --out");
    sub->callback([&selected, &cmd] { selected = &cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    return run(*selected, o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
