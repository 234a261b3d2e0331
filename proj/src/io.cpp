#include "wishart_ldp/io.hpp"

#include "wishart_ldp/error.hpp"

#include <toml.hpp>

#include <cmath>
#include <fstream>
#include <algorithm>
#include <iomanip>
#include <limits>
#include <sstream>

namespace wldp {

namespace {

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  fail(ErrorCode::ParseError, "field '" + field + "': " + what);
}

std::string index_field(const std::string& field, std::size_t i) {
  return field + "[" + std::to_string(i) + "]";
}

std::string key_field(const std::string& field, const std::string& key) {
  return field.empty() ? key : field + "." + key;
}

void write_number(std::ostream& os, double v) {
  os << std::setprecision(17) << v;
}

}  // namespace

const Json& require(const Json& obj, const std::string& key, const std::string& field) {
  if (!obj.is_object()) field_error(field, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) field_error(key_field(field, key), "missing");
  return *it;
}

double number_at(const Json& j, const std::string& field) {
  if (!j.is_number()) field_error(field, "expected a number, got " + std::string(j.type_name()));
  const double v = j.get<double>();
  if (!std::isfinite(v)) field_error(field, "not finite");
  return v;
}

std::size_t count_at(const Json& j, const std::string& field) {
  if (j.is_number_unsigned()) return j.get<std::size_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) field_error(field, "expected a non-negative integer");
    return static_cast<std::size_t>(j.get<std::int64_t>());
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::size_t>(v);
  }
  field_error(field, "expected a non-negative integer");
}

std::vector<double> numbers_at(const Json& j, const std::string& field) {
  if (!j.is_array()) field_error(field, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_at(j[i], index_field(field, i)));
  return out;
}

Json to_json(const SymMatrix& m) {
  Json rows = Json::array();
  for (int i = 0; i < m.dim(); ++i) {
    Json row = Json::array();
    for (int k = 0; k < m.dim(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

SymMatrix matrix_from_json(const Json& j, const std::string& field) {
  if (j.is_number()) return SymMatrix::scaled_identity(1, number_at(j, field));
  if (!j.is_array() || j.empty()) field_error(field, "expected a square matrix (array of rows)");
  const std::size_t n = j.size();
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string row_field = index_field(field, i);
    const std::vector<double> row = numbers_at(j[i], row_field);
    if (row.size() != n) {
      field_error(row_field, "row has " + std::to_string(row.size()) + " entries, expected " +
                                 std::to_string(n));
    }
    for (std::size_t k = 0; k < n; ++k) m(i, k) = row[k];
  }
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff())) field_error(field, "matrix is not symmetric");
  return SymMatrix(m);
}

Json to_json(const SpdPath& p) {
  Json values = Json::array();
  for (const SymMatrix& v : p.values()) values.push_back(to_json(v));
  return Json{{"grid", p.grid()}, {"values", std::move(values)}};
}

SpdPath spd_path_from_json(const Json& j, const std::string& field) {
  std::vector<double> grid = numbers_at(require(j, "grid", field), key_field(field, "grid"));
  const Json& vals = require(j, "values", field);
  const std::string vfield = key_field(field, "values");
  if (!vals.is_array()) field_error(vfield, "expected an array of matrices");
  std::vector<SymMatrix> values;
  values.reserve(vals.size());
  for (std::size_t i = 0; i < vals.size(); ++i) values.push_back(matrix_from_json(vals[i], index_field(vfield, i)));
  try {
    return SpdPath(std::move(grid), std::move(values));
  } catch (const Error& e) {
    field_error(field, e.what());
  }
}

Json to_json(std::span<const ScalarPath> paths) {
  Json values = Json::array();
  if (paths.empty()) return Json{{"grid", Json::array()}, {"values", values}};
  for (std::size_t j = 0; j < paths.front().size(); ++j) {
    Json row = Json::array();
    for (const ScalarPath& p : paths) row.push_back(p.values[j]);
    values.push_back(std::move(row));
  }
  return Json{{"grid", paths.front().grid}, {"values", std::move(values)}};
}

std::vector<ScalarPath> scalar_paths_from_json(const Json& j, const std::string& field) {
  const std::vector<double> grid = numbers_at(require(j, "grid", field), key_field(field, "grid"));
  const Json& vals = require(j, "values", field);
  const std::string vfield = key_field(field, "values");
  if (!vals.is_array() || vals.size() != grid.size()) {
    field_error(vfield, "expected one entry per grid node (" + std::to_string(grid.size()) + ")");
  }
  std::vector<ScalarPath> out;
  for (std::size_t r = 0; r < vals.size(); ++r) {
    const std::string rf = index_field(vfield, r);
    std::vector<double> row = vals[r].is_array() ? numbers_at(vals[r], rf)
                                                 : std::vector<double>{number_at(vals[r], rf)};
    if (r == 0) out.assign(row.size(), ScalarPath{grid, {}});
    if (row.size() != out.size()) field_error(rf, "inconsistent number of components");
    for (std::size_t i = 0; i < row.size(); ++i) out[i].values.push_back(row[i]);
  }
  for (const ScalarPath& p : out) {
    try {
      check_scalar_path(p, field.c_str());
    } catch (const Error& e) {
      field_error(field, e.what());
    }
  }
  return out;
}

Json to_json(const MatrixMeasure& mu) {
  Json atoms = Json::array();
  for (const Atom& a : mu.atoms) atoms.push_back({{"t", a.t}, {"weight", to_json(a.weight)}});
  Json j{{"dim", mu.dim}, {"atoms", std::move(atoms)}};
  if (!mu.density.empty()) {
    Json values = Json::array();
    for (const SymMatrix& v : mu.density.values) values.push_back(to_json(v));
    j["density"] = {{"grid", mu.density.breaks}, {"values", std::move(values)}};
  }
  return j;
}

MatrixMeasure measure_from_json(const Json& j, const std::string& field) {
  if (!j.is_object()) field_error(field, "expected an object with atoms and/or density");
  MatrixMeasure mu;
  mu.dim = 0;
  auto set_dim = [&](int d, const std::string& where) {
    if (mu.dim == 0) mu.dim = d;
    if (mu.dim != d) field_error(where, "dimension " + std::to_string(d) + " differs from " + std::to_string(mu.dim));
  };
  if (j.contains("dim")) set_dim(static_cast<int>(count_at(j["dim"], key_field(field, "dim"))), key_field(field, "dim"));
  if (j.contains("atoms")) {
    const Json& atoms = j["atoms"];
    const std::string af = key_field(field, "atoms");
    if (!atoms.is_array()) field_error(af, "expected an array");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const std::string f = index_field(af, i);
      const double t = number_at(require(atoms[i], "t", f), key_field(f, "t"));
      SymMatrix w = matrix_from_json(require(atoms[i], "weight", f), key_field(f, "weight"));
      set_dim(w.dim(), key_field(f, "weight"));
      mu.atoms.push_back({t, std::move(w)});
    }
  }
  if (j.contains("density") && !j["density"].is_null()) {
    const Json& d = j["density"];
    const std::string df = key_field(field, "density");
    mu.density.breaks = numbers_at(require(d, "grid", df), key_field(df, "grid"));
    const Json& vals = require(d, "values", df);
    const std::string vf = key_field(df, "values");
    if (!vals.is_array()) field_error(vf, "expected an array of matrices");
    for (std::size_t i = 0; i < vals.size(); ++i) {
      SymMatrix v = matrix_from_json(vals[i], index_field(vf, i));
      set_dim(v.dim(), index_field(vf, i));
      mu.density.values.push_back(std::move(v));
    }
  }
  if (mu.dim == 0) field_error(field, "cannot infer dimension; give dim, atoms or density");
  return mu;
}

Json to_json(const RateFlags& f) {
  return Json{{"SMALL_TIME_LIMIT_OK", f.small_time_limit_ok},
              {"DERIVATIVE_CLIPPED", f.derivative_clipped},
              {"SINGULAR_SYLVESTER_SKIPPED", f.singular_sylvester_skipped},
              {"INFINITE", f.infinite},
              {"NOT_IN_CLASS_F", f.not_in_class_f}};
}

Json to_json(const RateReport& r) {
  Json j{{"value", r.value},
         {"contributions", r.contributions},
         {"flags", to_json(r.flags)},
         {"infinite", r.flags.infinite}};
  j["richardson"] = std::isfinite(r.richardson) ? Json(r.richardson) : Json(nullptr);
  return j;
}

Json to_json(const RiccatiSolution& s) {
  Json values = Json::array();
  for (const SymMatrix& v : s.values) values.push_back(to_json(v));
  Json jumps = Json::array();
  for (const RiccatiJump& jp : s.jumps) jumps.push_back({{"t", jp.t}, {"left", to_json(jp.left)}});
  return Json{{"grid", s.grid},
              {"values", std::move(values)},
              {"jumps", std::move(jumps)},
              {"trace_integral", s.trace_integral}};
}

Json to_json(const SimConfig& c) {
  return Json{{"m", c.dim},         {"delta", c.delta},       {"eps", c.epsilon},
              {"T", c.horizon},     {"steps", c.steps},       {"replicas", c.replicas},
              {"seed", c.seed},     {"scheme", to_string(c.scheme)}, {"threads", c.threads}};
}

SimConfig sim_config_from_json(const Json& j, const std::string& field, SimConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) field_error(field, "expected an object");
  static const char* const known[] = {"m", "delta", "eps", "T", "steps", "dt", "replicas", "seed", "scheme", "threads"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(known), std::end(known), it.key()) == std::end(known)) {
      field_error(key_field(field, it.key()), "unknown simulation setting");
    }
  }
  auto f = [&](const char* k) { return key_field(field, k); };
  if (j.contains("m")) c.dim = static_cast<int>(count_at(j["m"], f("m")));
  if (j.contains("delta")) c.delta = number_at(j["delta"], f("delta"));
  if (j.contains("eps")) c.epsilon = number_at(j["eps"], f("eps"));
  if (j.contains("T")) c.horizon = number_at(j["T"], f("T"));
  if (j.contains("steps") && j.contains("dt")) field_error(field, "give either steps or dt, not both");
  if (j.contains("steps")) c.steps = count_at(j["steps"], f("steps"));
  if (j.contains("dt")) {
    const double dt = number_at(j["dt"], f("dt"));
    if (!(dt > 0.0)) field_error(f("dt"), "must be > 0");
    c.steps = static_cast<std::size_t>(std::llround(c.horizon / dt));
  }
  if (j.contains("replicas")) c.replicas = count_at(j["replicas"], f("replicas"));
  if (j.contains("seed")) c.seed = count_at(j["seed"], f("seed"));
  if (j.contains("threads")) c.threads = static_cast<unsigned>(count_at(j["threads"], f("threads")));
  if (j.contains("scheme")) {
    if (!j["scheme"].is_string()) field_error(f("scheme"), "expected a string");
    try {
      c.scheme = scheme_from_string(j["scheme"].get<std::string>());
    } catch (const Error& e) {
      field_error(f("scheme"), e.what());
    }
  }
  try {
    validate(c);
  } catch (const Error& e) {
    field_error(field, e.what());
  }
  return c;
}

namespace {

void write_matrix_csv(std::ostream& os, std::span<const double> grid, std::span<const SymMatrix> values) {
  const int m = values.front().dim();
  os << "t";
  for (int i = 0; i < m; ++i) {
    for (int k = i; k < m; ++k) os << ",x" << i << k;
  }
  os << '\n';
  for (std::size_t j = 0; j < grid.size(); ++j) {
    write_number(os, grid[j]);
    for (int i = 0; i < m; ++i) {
      for (int k = i; k < m; ++k) {
        os << ',';
        write_number(os, values[j](i, k));
      }
    }
    os << '\n';
  }
}

}  // namespace

void write_path_csv(std::ostream& os, const SpdPath& p) { write_matrix_csv(os, p.grid(), p.values()); }

namespace {

// Numeric CSV rows after an optional header line; every row checked for width.
std::vector<std::vector<double>> read_numeric_csv(std::istream& is, const std::string& source) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (rows.empty() && width == 0 && !cells.empty()) {
      char* end = nullptr;
      std::strtod(cells[0].c_str(), &end);
      if (end == cells[0].c_str()) {  // header
        width = cells.size();
        continue;
      }
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width) {
      fail(ErrorCode::ParseError, source + ":" + std::to_string(lineno) + ": expected " +
                                      std::to_string(width) + " columns, found " +
                                      std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      while (end && (*end == ' ' || *end == '\t')) ++end;
      if (end == cells[c].c_str() || *end != '\0' || !std::isfinite(v)) {
        fail(ErrorCode::ParseError, source + ":" + std::to_string(lineno) + ": column " +
                                        std::to_string(c + 1) + ": '" + cells[c] +
                                        "' is not a finite number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorCode::ParseError, source + ": no data rows");
  return rows;
}

}  // namespace

SpdPath read_path_csv(std::istream& is, const std::string& source) {
  const auto rows = read_numeric_csv(is, source);
  const std::size_t cols = rows.front().size() - 1;
  int m = 0;
  while (static_cast<std::size_t>(m * (m + 1) / 2) < cols) ++m;
  if (m == 0 || static_cast<std::size_t>(m * (m + 1) / 2) != cols) {
    fail(ErrorCode::ParseError, source + ": " + std::to_string(cols) +
                                    " value columns is not an upper triangle m(m+1)/2");
  }
  std::vector<double> grid;
  std::vector<SymMatrix> values;
  for (const auto& row : rows) {
    grid.push_back(row[0]);
    Eigen::MatrixXd x(m, m);
    std::size_t c = 1;
    for (int i = 0; i < m; ++i) {
      for (int k = i; k < m; ++k) x(i, k) = x(k, i) = row[c++];
    }
    values.emplace_back(x);
  }
  try {
    return SpdPath(std::move(grid), std::move(values));
  } catch (const Error& e) {
    fail(ErrorCode::ParseError, source + ": " + e.what());
  }
}

void write_scalar_csv(std::ostream& os, std::span<const ScalarPath> paths) {
  os << "t";
  for (std::size_t i = 0; i < paths.size(); ++i) os << ",x" << (i + 1);
  os << '\n';
  if (paths.empty()) return;
  for (std::size_t j = 0; j < paths.front().size(); ++j) {
    write_number(os, paths.front().grid[j]);
    for (const ScalarPath& p : paths) {
      os << ',';
      write_number(os, p.values[j]);
    }
    os << '\n';
  }
}

std::vector<ScalarPath> read_scalar_csv(std::istream& is, const std::string& source) {
  const auto rows = read_numeric_csv(is, source);
  if (rows.front().size() < 2) fail(ErrorCode::ParseError, source + ": need t and at least one value column");
  std::vector<ScalarPath> out(rows.front().size() - 1);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i].grid.push_back(row[0]);
      out[i].values.push_back(row[i + 1]);
    }
  }
  for (const ScalarPath& p : out) {
    try {
      check_scalar_path(p, source.c_str());
    } catch (const Error& e) {
      fail(ErrorCode::ParseError, e.what());
    }
  }
  return out;
}

void write_riccati_csv(std::ostream& os, const RiccatiSolution& s) {
  write_matrix_csv(os, s.grid, s.values);
}

Json parse_json_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    fail(ErrorCode::ParseError, source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                    ": invalid JSON (" + e.what() + ")");
  }
}

namespace {

Json toml_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json o = Json::object();
    for (const auto& [k, v] : *t) o[std::string(k.str())] = toml_to_json(v);
    return o;
  }
  if (const auto* a = node.as_array()) {
    Json arr = Json::array();
    for (const auto& v : *a) arr.push_back(toml_to_json(v));
    return arr;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  fail(ErrorCode::ParseError, "line " + std::to_string(node.source().begin.line) +
                                  ": dates and times are not supported config values");
}

}  // namespace

Json parse_config_text(const std::string& text, const std::string& source) {
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return parse_json_text(text, source);
  Json j;
  try {
    j = toml_to_json(toml::parse(std::string_view(text), std::string_view(source)));
  } catch (const toml::parse_error& e) {
    fail(ErrorCode::ParseError, source + ":" + std::to_string(e.source().begin.line) + ":" +
                                    std::to_string(e.source().begin.column) + ": " +
                                    std::string(e.description()));
  }
  // Top-level simulation keys are shorthand for the [sim] table.
  static const char* const sim_keys[] = {"m", "delta", "eps", "T", "steps", "dt", "replicas", "seed", "scheme", "threads"};
  for (const char* k : sim_keys) {
    if (!j.contains(k)) continue;
    if (j.contains("sim") && j["sim"].contains(k)) {
      fail(ErrorCode::ParseError, source + ": '" + k + "' given both at top level and in [sim]");
    }
    j["sim"][k] = j[k];
    j.erase(k);
  }
  return j;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  out << content;
  if (!out) fail(ErrorCode::IoError, "write to '" + path + "' failed");
}

Json load_config_file(const std::string& path) { return parse_config_text(read_text_file(path), path); }

namespace {

bool has_csv_extension(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

}  // namespace

SpdPath load_spd_path(const std::string& path) {
  if (has_csv_extension(path)) {
    std::istringstream in(read_text_file(path));
    return read_path_csv(in, path);
  }
  return spd_path_from_json(parse_json_text(read_text_file(path), path), path);
}

std::vector<ScalarPath> load_scalar_paths(const std::string& path) {
  if (has_csv_extension(path)) {
    std::istringstream in(read_text_file(path));
    return read_scalar_csv(in, path);
  }
  return scalar_paths_from_json(parse_json_text(read_text_file(path), path), path);
}

}  // namespace wldp
