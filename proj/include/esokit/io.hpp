#pragma once

#include <iosfwd>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "esokit/eso.hpp"
#include "esokit/prob_matrix.hpp"
#include "esokit/sampling.hpp"
#include "esokit/solver.hpp"
#include "esokit/spectral.hpp"
#include "esokit/verifier.hpp"

// All indices in files are 1-based; the C++ API is 0-based.
namespace esokit::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Parses JSON text; syntax errors become ParseError with line and column.
Json parse_json(const std::string& text, const std::string& source);
Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);
// Pretty-printed with a trailing newline; stable key order.
std::string dump(const Json& j);

Json to_json(const SamplingSpec& spec);
SamplingSpec sampling_from_json(const Json& j);

Json to_json(const Eigen::VectorXd& x);
Eigen::VectorXd vector_from_json(const Json& j, const std::string& field);
Json to_json(const Eigen::MatrixXd& M);

Json to_json(const ProbMatrix& P);
ProbMatrix prob_matrix_from_json(const Json& j);
void write_prob_matrix_csv(std::ostream& out, const ProbMatrix& P);
ProbMatrix read_prob_matrix_csv(std::istream& in, const std::string& source);

Json to_json(const EsoResult& r);
// Accepts an EsoResult object or a bare array of v.
Eigen::VectorXd v_from_json(const Json& j);

Json to_json(const EigenEstimate& e);
Json to_json(const BoundsReport& b);
Json to_json(const EsoCheckReport& r);
Json to_json(const MatrixFormReport& r);
Json to_json(const BatteryReport& r);
Json to_json(const TradeoffReport& r);
Json to_json(const SerialDesign& d);
Json to_json(const IdentityReport& r);

// Summary (without the gap series) plus the gap series.
Json to_json(const SolverTrace& t);
void write_trace_csv(std::ostream& out, const SolverTrace& t);

struct ProblemSidecar {
  double lambda = 0.0;
  Eigen::VectorXd b;
  Eigen::VectorXd x0;
};
// {lambda, b, x0}; b and x0 default to zeros / ones of length n when absent.
ProblemSidecar sidecar_from_json(const Json& j, int n);
Json to_json(const ProblemSidecar& s);

// {schema_version, command, config}
Json report_envelope(const std::string& command, const Json& config);

}  // namespace esokit::io
