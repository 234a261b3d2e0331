#pragma once

// Serialization of matrices, paths, measures and reports, and config loading.
// Parse failures throw Error(ParseError) naming the source, line or field.
//
// CSV layouts:
//   matrix path  t, x_00, x_01, ..., x_0(m-1), x_11, ...   (row-major upper triangle)
//   scalar paths t, x1, ..., xm

#include "wishart_ldp/matrix.hpp"
#include "wishart_ldp/path.hpp"
#include "wishart_ldp/rate.hpp"
#include "wishart_ldp/riccati.hpp"
#include "wishart_ldp/simulator.hpp"

#include <json.hpp>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace wldp {

using Json = nlohmann::json;

// Matrices are nested arrays; a bare number is accepted as a 1x1 matrix.
Json to_json(const SymMatrix& m);
SymMatrix matrix_from_json(const Json& j, const std::string& field);

Json to_json(const SpdPath& p);
SpdPath spd_path_from_json(const Json& j, const std::string& field);

// {grid, values: [[x1 at t0, x2 at t0, ...], ...]} for several scalar paths
// on one grid; a flat values array is read as a single path.
Json to_json(std::span<const ScalarPath> paths);
std::vector<ScalarPath> scalar_paths_from_json(const Json& j, const std::string& field);

Json to_json(const MatrixMeasure& mu);
MatrixMeasure measure_from_json(const Json& j, const std::string& field);

Json to_json(const RateFlags& f);
Json to_json(const RateReport& r);
Json to_json(const RiccatiSolution& s);

Json to_json(const SimConfig& c);
// Keys: m, delta, eps, T, steps | dt, replicas, seed, scheme, threads.
// Missing keys keep the defaults of `base`.
SimConfig sim_config_from_json(const Json& j, const std::string& field, SimConfig base = {});

void write_path_csv(std::ostream& os, const SpdPath& p);
SpdPath read_path_csv(std::istream& is, const std::string& source);

void write_scalar_csv(std::ostream& os, std::span<const ScalarPath> paths);
std::vector<ScalarPath> read_scalar_csv(std::istream& is, const std::string& source);

void write_riccati_csv(std::ostream& os, const RiccatiSolution& s);

Json parse_json_text(const std::string& text, const std::string& source);

// JSON when the first non-blank character is '{', TOML otherwise.
Json parse_config_text(const std::string& text, const std::string& source);
Json load_config_file(const std::string& path);

// Path files by extension: .csv is a matrix path CSV, anything else JSON.
SpdPath load_spd_path(const std::string& path);
std::vector<ScalarPath> load_scalar_paths(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Field access with "field 'a.b[2]': ..." diagnostics.
const Json& require(const Json& obj, const std::string& key, const std::string& field);
double number_at(const Json& j, const std::string& field);
std::size_t count_at(const Json& j, const std::string& field);
std::vector<double> numbers_at(const Json& j, const std::string& field);

}  // namespace wldp
