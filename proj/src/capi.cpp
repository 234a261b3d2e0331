#include "wishart_ldp/wishart_ldp.h"

#include "wishart_ldp/error.hpp"
#include "wishart_ldp/harness.hpp"
#include "wishart_ldp/io.hpp"
#include "wishart_ldp/rate.hpp"
#include "wishart_ldp/riccati.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

struct wldp_config {
  wldp::Json json;
};

struct wldp_report {
  wldp::ExperimentReport report;
};

namespace {

thread_local std::string g_last_error;

wldp_status to_status(wldp::ErrorCode c) {
  using wldp::ErrorCode;
  switch (c) {
    case ErrorCode::InvalidArgument: return WLDP_INVALID_ARGUMENT;
    case ErrorCode::IndefiniteInput: return WLDP_INDEFINITE_INPUT;
    case ErrorCode::SingularPencil: return WLDP_SINGULAR_PENCIL;
    case ErrorCode::BadInitialCondition: return WLDP_BAD_INITIAL_CONDITION;
    case ErrorCode::DegeneratePath: return WLDP_DEGENERATE_PATH;
    case ErrorCode::DomainError: return WLDP_DOMAIN_ERROR;
    case ErrorCode::BlowUp: return WLDP_BLOW_UP;
    case ErrorCode::ParseError: return WLDP_PARSE_ERROR;
    case ErrorCode::IoError: return WLDP_IO_ERROR;
  }
  return WLDP_INTERNAL_ERROR;
}

template <class F>
wldp_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return WLDP_OK;
  } catch (const wldp::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown exception";
  }
  return WLDP_INTERNAL_ERROR;
}

void need(const void* p, const char* name) {
  if (p == nullptr) wldp::fail(wldp::ErrorCode::InvalidArgument, std::string(name) + " is NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

wldp::SymMatrix read_matrix(int m, const double* data, const char* name) {
  need(data, name);
  if (m < 1) wldp::fail(wldp::ErrorCode::InvalidArgument, "m must be >= 1");
  Eigen::MatrixXd a(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) a(i, k) = data[i * m + k];
  }
  return wldp::SymMatrix(a);
}

void write_matrix(const wldp::SymMatrix& s, double* out) {
  const int m = s.dim();
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) out[i * m + k] = s(i, k);
  }
}

}  // namespace

extern "C" {

const char* wldp_version(void) { return "0.1.0"; }

const char* wldp_status_string(wldp_status status) {
  switch (status) {
    case WLDP_OK: return "OK";
    case WLDP_INVALID_ARGUMENT: return "InvalidArgument";
    case WLDP_INDEFINITE_INPUT: return "IndefiniteInput";
    case WLDP_SINGULAR_PENCIL: return "SingularPencil";
    case WLDP_BAD_INITIAL_CONDITION: return "BadInitialCondition";
    case WLDP_DEGENERATE_PATH: return "DegeneratePath";
    case WLDP_DOMAIN_ERROR: return "DomainError";
    case WLDP_BLOW_UP: return "BlowUp";
    case WLDP_PARSE_ERROR: return "ParseError";
    case WLDP_IO_ERROR: return "IoError";
    case WLDP_INTERNAL_ERROR: return "InternalError";
  }
  return "Unknown";
}

const char* wldp_last_error(void) { return g_last_error.c_str(); }

void wldp_string_free(char* s) { std::free(s); }

wldp_status wldp_config_load_file(const char* path, wldp_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new wldp_config{wldp::load_config_file(path)};
  });
}

wldp_status wldp_config_load_text(const char* text, wldp_config** out) {
  return guarded([&] {
    need(text, "text");
    need(out, "out");
    *out = new wldp_config{wldp::parse_config_text(text, "<text>")};
  });
}

wldp_status wldp_config_new(const char* kind, wldp_config** out) {
  return guarded([&] {
    need(kind, "kind");
    need(out, "out");
    *out = new wldp_config{wldp::Json{{"kind", wldp::to_string(wldp::experiment_kind_from_string(kind))}}};
  });
}

wldp_status wldp_config_set(wldp_config* cfg, const char* key, const char* json_value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(json_value, "json_value");
    wldp::Json value = wldp::parse_json_text(json_value, std::string("value of ") + key);
    if (!cfg->json.is_object()) cfg->json = wldp::Json::object();
    wldp::Json* node = &cfg->json;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) {
      if (part.empty()) wldp::fail(wldp::ErrorCode::InvalidArgument, std::string("malformed key '") + key + "'");
      parts.push_back(part);
    }
    if (parts.empty()) wldp::fail(wldp::ErrorCode::InvalidArgument, "empty key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      wldp::Json& next = (*node)[parts[i]];
      if (next.is_null()) next = wldp::Json::object();
      if (!next.is_object()) {
        wldp::fail(wldp::ErrorCode::InvalidArgument, "'" + parts[i] + "' in key '" + key + "' is not a table");
      }
      node = &next;
    }
    (*node)[parts.back()] = std::move(value);
  });
}

wldp_status wldp_config_validate(const wldp_config* cfg) {
  return guarded([&] {
    need(cfg, "cfg");
    wldp::parse_experiment(cfg->json);
  });
}

wldp_status wldp_config_output_path(const wldp_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    const auto it = cfg->json.find("output_path");
    *out = copy_string(it != cfg->json.end() && it->is_string() ? it->get<std::string>() : std::string());
  });
}

wldp_status wldp_config_to_json(const wldp_config* cfg, char** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = copy_string(cfg->json.dump(2));
  });
}

void wldp_config_free(wldp_config* cfg) { delete cfg; }

wldp_status wldp_run(const wldp_config* cfg, int include_timestamp, wldp_report** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    const wldp::ExperimentSpec spec = wldp::parse_experiment(cfg->json);
    *out = new wldp_report{wldp::run_experiment(spec, {include_timestamp != 0})};
  });
}

wldp_status wldp_report_verdict(const wldp_report* rep, wldp_verdict* out) {
  return guarded([&] {
    need(rep, "rep");
    need(out, "out");
    switch (rep->report.verdict) {
      case wldp::Verdict::Pass: *out = WLDP_VERDICT_PASS; break;
      case wldp::Verdict::Fail: *out = WLDP_VERDICT_FAIL; break;
      case wldp::Verdict::Complete: *out = WLDP_VERDICT_COMPLETE; break;
    }
  });
}

wldp_status wldp_report_json(const wldp_report* rep, char** out) {
  return guarded([&] {
    need(rep, "rep");
    need(out, "out");
    *out = copy_string(wldp::dump_report(rep->report.json));
  });
}

wldp_status wldp_report_summary(const wldp_report* rep, char** out) {
  return guarded([&] {
    need(rep, "rep");
    need(out, "out");
    wldp::Json summary = rep->report.json;
    auto& result = summary["result"];
    // Bulky series stay in the full report.
    for (const char* key : {"solution", "paths", "points", "contributions"}) result.erase(key);
    if (result.contains("report")) result["report"].erase("contributions");
    summary.erase("config");
    *out = copy_string(summary.dump(2));
  });
}

wldp_status wldp_report_csv(const wldp_report* rep, char** out) {
  return guarded([&] {
    need(rep, "rep");
    need(out, "out");
    *out = copy_string(rep->report.csv);
  });
}

void wldp_report_free(wldp_report* rep) { delete rep; }

wldp_status wldp_solve_sylvester(int m, const double* a, const double* b, double* x) {
  return guarded([&] {
    need(x, "x");
    write_matrix(wldp::solve_sylvester(read_matrix(m, a, "a"), read_matrix(m, b, "b")), x);
  });
}

wldp_status wldp_rate_K(int m, const double* M, double delta, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = wldp::rate_K(read_matrix(m, M, "M"), delta);
  });
}

wldp_status wldp_rate_K_max(double a, double delta, int m, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = wldp::rate_K_max(a, delta, m);
  });
}

wldp_status wldp_laplace_atom(int m, const double* theta, const double* x, double delta, double horizon,
                              size_t steps, double* out) {
  return guarded([&] {
    need(out, "out");
    const wldp::SymMatrix th = read_matrix(m, theta, "theta");
    if (!wldp::is_psd(th)) wldp::fail(wldp::ErrorCode::IndefiniteInput, "theta must be PSD");
    const wldp::SymMatrix x0 = x ? read_matrix(m, x, "x") : wldp::SymMatrix::zero(m);
    const wldp::MatrixMeasure mu = wldp::MatrixMeasure::atom(horizon, 2.0 * th);
    *out = wldp::laplace_transform(mu, x0, delta, horizon, steps);
  });
}

}  // extern "C"
