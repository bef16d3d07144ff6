#include "esokit/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "esokit/error.hpp"

namespace esokit::io {

namespace {

Json index_set_json(const IndexSet& s) {
  Json out = Json::array();
  for (int i : s) out.push_back(i + 1);
  return out;
}

const Json& member(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(path + key, "missing required field");
  return j.at(key);
}

int as_int(const Json& j, const std::string& field) {
  if (!j.is_number_integer()) throw ValidationError(field, "expected an integer");
  return j.get<int>();
}

double as_double(const Json& j, const std::string& field) {
  if (!j.is_number()) throw ValidationError(field, "expected a number");
  return j.get<double>();
}

IndexSet index_set_from(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "expected an array of 1-based indices");
  IndexSet s;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const int i = as_int(j[k], field + "[" + std::to_string(k) + "]");
    if (i < 1) throw ValidationError(field + "[" + std::to_string(k) + "]", "indices are 1-based");
    s.push_back(i - 1);
  }
  return s;
}

std::vector<double> doubles_from(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(as_double(j[k], field + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<WeightedSet> members_from(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "expected an array of {set, prob}");
  std::vector<WeightedSet> out;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const std::string path = field + "[" + std::to_string(k) + "].";
    out.push_back({index_set_from(member(j[k], "set", path), path + "set"),
                   as_double(member(j[k], "prob", path), path + "prob")});
  }
  return out;
}

SamplingSpec spec_from(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ValidationError(path.empty() ? "sampling" : path, "expected an object");
  static const std::vector<std::string> known = {"n", "kind", "set", "q", "tau", "partition", "blocks",
                                                 "members", "graph_edges", "weights", "components"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(path + key, "unknown field");
    }
  }
  SamplingSpec s;
  const Json& kind = member(j, "kind", path);
  if (!kind.is_string()) throw ValidationError(path + "kind", "expected a string");
  try {
    s.kind = sampling_kind_from_string(kind.get<std::string>());
  } catch (const ValidationError& e) {
    throw ValidationError(path + "kind", e.what());
  }
  std::vector<std::string> required;
  switch (s.kind) {
    case SamplingKind::Elementary:
      required = {"set"};
      break;
    case SamplingKind::Serial:
    case SamplingKind::DoublyUniform:
      required = {"q"};
      break;
    case SamplingKind::TauNice:
      required = {"tau"};
      break;
    case SamplingKind::CTauDistributed:
      required = {"partition", "tau"};
      break;
    case SamplingKind::Product:
      required = {"blocks"};
      break;
    case SamplingKind::Graph:
    case SamplingKind::Explicit:
      required = {"members"};
      break;
    case SamplingKind::ConvexCombination:
      required = {"weights", "components"};
      break;
    case SamplingKind::Intersection:
      required = {"components"};
      break;
    case SamplingKind::Restriction:
      required = {"set", "components"};
      break;
  }
  for (const auto& key : required) member(j, key, path);
  if (j.contains("set")) s.set = index_set_from(j["set"], path + "set");
  if (j.contains("q")) s.q = doubles_from(j["q"], path + "q");
  if (j.contains("tau")) s.tau = as_int(j["tau"], path + "tau");
  const std::string block_key = s.kind == SamplingKind::CTauDistributed ? "partition" : "blocks";
  if (j.contains(block_key)) {
    const Json& b = j[block_key];
    if (!b.is_array()) throw ValidationError(path + block_key, "expected an array of index arrays");
    for (std::size_t k = 0; k < b.size(); ++k) {
      s.blocks.push_back(index_set_from(b[k], path + block_key + "[" + std::to_string(k) + "]"));
    }
  }
  if (j.contains("members")) s.members = members_from(j["members"], path + "members");
  if (j.contains("graph_edges")) {
    const Json& e = j["graph_edges"];
    if (!e.is_array()) throw ValidationError(path + "graph_edges", "expected an array of [a, b] pairs");
    for (std::size_t k = 0; k < e.size(); ++k) {
      const auto pair = index_set_from(e[k], path + "graph_edges[" + std::to_string(k) + "]");
      if (pair.size() != 2) throw ValidationError(path + "graph_edges[" + std::to_string(k) + "]", "expected two indices");
      s.graph_edges.push_back({pair[0], pair[1]});
    }
  }
  if (j.contains("weights")) s.weights = doubles_from(j["weights"], path + "weights");
  if (j.contains("components")) {
    const Json& c = j["components"];
    if (!c.is_array()) throw ValidationError(path + "components", "expected an array of samplings");
    for (std::size_t k = 0; k < c.size(); ++k) {
      s.components.push_back(spec_from(c[k], path + "components[" + std::to_string(k) + "]."));
    }
  }

  if (j.contains("n")) {
    s.n = as_int(j["n"], path + "n");
  } else {
    switch (s.kind) {
      case SamplingKind::Serial:
        s.n = static_cast<int>(s.q.size());
        break;
      case SamplingKind::DoublyUniform:
        s.n = static_cast<int>(s.q.size()) - 1;
        break;
      case SamplingKind::CTauDistributed:
      case SamplingKind::Product:
        s.n = 0;
        for (const auto& b : s.blocks) s.n += static_cast<int>(b.size());
        break;
      case SamplingKind::ConvexCombination:
      case SamplingKind::Intersection:
      case SamplingKind::Restriction:
        if (!s.components.empty()) s.n = s.components.front().n;
        break;
      default:
        throw ValidationError(path + "n", "missing required field");
    }
  }
  return s;
}

}  // namespace

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    int line = 1, column = 1;
    const std::size_t limit = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < limit; ++k) {
      if (text[k] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    const auto cut = what.find("parse error");
    throw ParseError(source, line, column, cut == std::string::npos ? what : what.substr(cut));
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json read_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("out", "cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("out", "write to '" + path + "' failed");
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const SamplingSpec& spec) {
  Json j;
  j["n"] = spec.n;
  j["kind"] = to_string(spec.kind);
  if (!spec.set.empty() || spec.kind == SamplingKind::Elementary || spec.kind == SamplingKind::Restriction) {
    j["set"] = index_set_json(spec.set);
  }
  if (!spec.q.empty()) j["q"] = spec.q;
  if (spec.tau != 0 || spec.kind == SamplingKind::TauNice || spec.kind == SamplingKind::CTauDistributed) {
    j["tau"] = spec.tau;
  }
  if (!spec.blocks.empty()) {
    Json b = Json::array();
    for (const auto& block : spec.blocks) b.push_back(index_set_json(block));
    j[spec.kind == SamplingKind::CTauDistributed ? "partition" : "blocks"] = b;
  }
  if (!spec.members.empty()) {
    Json m = Json::array();
    for (const auto& w : spec.members) m.push_back({{"set", index_set_json(w.set)}, {"prob", w.prob}});
    j["members"] = m;
  }
  if (!spec.graph_edges.empty()) {
    Json e = Json::array();
    for (const auto& [a, b] : spec.graph_edges) e.push_back({a + 1, b + 1});
    j["graph_edges"] = e;
  }
  if (!spec.weights.empty()) j["weights"] = spec.weights;
  if (!spec.components.empty()) {
    Json c = Json::array();
    for (const auto& s : spec.components) c.push_back(to_json(s));
    j["components"] = c;
  }
  return j;
}

SamplingSpec sampling_from_json(const Json& j) {
  SamplingSpec s = spec_from(j, "");
  validate(s);
  return s;
}

Json to_json(const Eigen::VectorXd& x) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(x(i));
  return out;
}

Eigen::VectorXd vector_from_json(const Json& j, const std::string& field) {
  const auto values = doubles_from(j, field);
  Eigen::VectorXd x(static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k])) throw ValidationError(field, "non-finite entry");
    x(static_cast<Eigen::Index>(k)) = values[k];
  }
  return x;
}

Json to_json(const Eigen::MatrixXd& M) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) out.push_back(to_json(Eigen::VectorXd(M.row(r).transpose())));
  return out;
}

namespace {

Eigen::MatrixXd matrix_from(const Json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError(field, "expected an array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd M(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto row = vector_from_json(j[r], field + "[" + std::to_string(r) + "]");
    if (row.size() != n) throw ValidationError(field + "[" + std::to_string(r) + "]", "matrix is not square");
    M.row(r) = row.transpose();
  }
  return M;
}

void validate_imported(const ProbMatrix& P, const std::string& source) {
  const auto check = check_prob_matrix(P.entries, 1e-9);
  if (!check.symmetric) throw ValidationError(source, "probability matrix is not symmetric");
  if (!check.in_range) throw ValidationError(source, "entries violate 0 <= P_ij <= min(P_ii, P_jj) <= 1");
  if (!check.psd) throw ValidationError(source, "probability matrix is not PSD");
}

}  // namespace

Json to_json(const ProbMatrix& P) {
  Json j;
  j["n"] = P.n();
  j["provenance"] = to_string(P.provenance);
  if (P.provenance == Provenance::MonteCarlo) {
    j["samples"] = P.samples;
    j["max_standard_error"] = P.max_standard_error();
  }
  j["entries"] = to_json(P.entries);
  if (P.provenance == Provenance::MonteCarlo && P.standard_error.size() > 0) {
    j["standard_error"] = to_json(P.standard_error);
  }
  return j;
}

ProbMatrix prob_matrix_from_json(const Json& j) {
  ProbMatrix P;
  P.entries = matrix_from(member(j, "entries", ""), "entries");
  if (j.contains("n") && as_int(j["n"], "n") != P.n()) throw ValidationError("n", "does not match the entries");
  const Json& prov = member(j, "provenance", "");
  if (!prov.is_string()) throw ValidationError("provenance", "expected a string");
  P.provenance = provenance_from_string(prov.get<std::string>());
  if (j.contains("samples")) P.samples = j["samples"].get<std::size_t>();
  if (j.contains("standard_error")) P.standard_error = matrix_from(j["standard_error"], "standard_error");
  validate_imported(P, "prob_matrix");
  return P;
}

void write_prob_matrix_csv(std::ostream& out, const ProbMatrix& P) {
  out << "# prob_matrix n=" << P.n() << " provenance=" << to_string(P.provenance);
  if (P.provenance == Provenance::MonteCarlo) out << " samples=" << P.samples;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < P.entries.rows(); ++r) {
    for (Eigen::Index c = 0; c < P.entries.cols(); ++c) out << (c ? "," : "") << P.entries(r, c);
    out << '\n';
  }
}

ProbMatrix read_prob_matrix_csv(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  ProbMatrix P;
  int n = -1;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (n >= 0) continue;
      std::istringstream ss(line.substr(1));
      std::string tok;
      ss >> tok;
      if (tok != "prob_matrix") throw ParseError(source, line_no, 3, "expected '# prob_matrix n=<n> provenance=<tag>'");
      while (ss >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq), value = tok.substr(eq + 1);
        try {
          if (key == "n") n = std::stoi(value);
          if (key == "provenance") P.provenance = provenance_from_string(value);
          if (key == "samples") P.samples = std::stoull(value);
        } catch (const std::exception&) {
          throw ParseError(source, line_no, 0, "bad header field '" + tok + "'");
        }
      }
      if (n < 1) throw ParseError(source, line_no, 0, "header lacks a positive n");
      continue;
    }
    if (n < 0) throw ParseError(source, line_no, 1, "missing '# prob_matrix' header");
    std::vector<double> row;
    std::size_t start = 0;
    while (start <= line.size()) {
      const auto comma = std::min(line.find(',', start), line.size());
      const std::string cell = line.substr(start, comma - start);
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (cell.empty() || used != cell.size() || !std::isfinite(value)) {
        throw ParseError(source, line_no, static_cast<int>(start) + 1, "expected a finite number, got '" + cell + "'");
      }
      row.push_back(value);
      start = comma + 1;
    }
    if (static_cast<int>(row.size()) != n) {
      throw ParseError(source, line_no, 0, "expected " + std::to_string(n) + " columns, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (n < 0) throw ParseError(source, line_no + 1, 0, "missing '# prob_matrix' header");
  if (static_cast<int>(rows.size()) != n) {
    throw ParseError(source, line_no + 1, 0, "expected " + std::to_string(n) + " rows, found " + std::to_string(rows.size()));
  }
  P.entries.resize(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) P.entries(r, c) = rows[r][c];
  }
  validate_imported(P, source);
  return P;
}

Json to_json(const EsoResult& r) {
  Json j;
  j["formula_id"] = to_string(r.formula);
  j["v"] = to_json(r.v);
  j["p"] = to_json(r.p);
  j["certificate_margin"] = r.certificate_margin ? Json(*r.certificate_margin) : Json(nullptr);
  j["cost_estimate"] = r.cost_estimate;
  if (!r.row_multipliers.empty()) {
    j["row_multipliers"] = r.row_multipliers;
    j["row_sources"] = r.row_sources;
  }
  if (!r.notes.empty()) j["notes"] = r.notes;
  return j;
}

Eigen::VectorXd v_from_json(const Json& j) {
  if (j.is_array()) return vector_from_json(j, "v");
  return vector_from_json(member(j, "v", ""), "v");
}

Json to_json(const EigenEstimate& e) {
  Json j;
  j["value"] = e.value;
  j["method"] = to_string(e.method);
  j["residual"] = e.residual;
  j["bound_source"] = e.bound_source.empty() ? to_string(e.method) : e.bound_source;
  if (e.method == EigenMethod::PowerMethod) {
    j["power_iterations"] = e.power.iterations;
    j["safeguard"] = e.power.safeguard;
  }
  if (!e.candidates.empty()) {
    Json c = Json::object();
    for (const auto& [name, value] : e.candidates) c[name] = value;
    j["candidates"] = c;
  }
  if (e.support_restricted) j["support_restricted"] = true;
  return j;
}

Json to_json(const BoundsReport& b) {
  Json j;
  j["tau"] = b.tau;
  j["lambda_prime_lower"] = b.lambda_prime_lower ? Json(*b.lambda_prime_lower) : Json(nullptr);
  j["lambda_prime_upper"] = b.lambda_prime_upper;
  j["lambda_lower"] = b.lambda_lower;
  j["lambda_upper"] = b.lambda_upper;
  j["uniform_sharpening"] = b.uniform_sharpening;
  if (!b.notes.empty()) j["notes"] = b.notes;
  return j;
}

Json to_json(const EsoCheckReport& r) {
  Json j;
  j["mode"] = to_string(r.mode);
  j["trials"] = r.trials;
  j["lhs_mean"] = r.lhs_mean;
  j["lhs_stderr"] = r.lhs_stderr;
  j["rhs"] = r.rhs;
  j["slack"] = r.slack;
  j["pass"] = r.pass;
  j["points_tested"] = r.points_tested;
  Json pts = Json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"label", p.label}, {"lhs_mean", p.lhs_mean}, {"lhs_stderr", p.lhs_stderr},
                   {"rhs", p.rhs}, {"slack", p.slack}, {"pass", p.pass}});
  }
  j["points"] = pts;
  return j;
}

Json to_json(const MatrixFormReport& r) {
  Json j;
  j["margin"] = r.margin;
  j["tolerance"] = r.tolerance;
  j["pass"] = r.pass;
  if (r.witness) {
    j["witness"] = to_json(*r.witness);
    j["witness_gap"] = r.witness_gap;
  }
  return j;
}

Json to_json(const BatteryReport& r) {
  Json j;
  j["pass"] = r.pass();
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"cases", c.cases}, {"max_discrepancy", c.max_discrepancy},
                      {"tolerance", c.tolerance}, {"pass", c.pass}});
  }
  j["checks"] = checks;
  return j;
}

Json to_json(const TradeoffReport& r) {
  Json j;
  j["tau"] = r.tau;
  j["lambda"] = r.lambda_sc;
  j["epsilon"] = r.epsilon;
  j["power_T"] = r.power_iterations;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"formula_id", to_string(row.formula)},
                    {"preprocessing_passes", row.preprocessing_passes},
                    {"iteration_passes", row.iteration_passes},
                    {"total_passes", row.total_passes},
                    {"max_v_tau_over_p_n", row.max_ratio},
                    {"v_min", row.v_min},
                    {"v_max", row.v_max},
                    {"v_mean", row.v_mean}});
  }
  j["rows"] = rows;
  return j;
}

Json to_json(const SerialDesign& d) {
  Json j;
  j["p"] = to_json(d.p);
  j["d"] = to_json(d.d);
  j["c_opt"] = d.c_opt;
  j["c_unif"] = d.c_unif;
  j["ratio"] = d.ratio;
  return j;
}

Json to_json(const IdentityReport& r) {
  Json j;
  j["exhaustive"] = r.exhaustive;
  j["trials"] = r.trials;
  Json checks = Json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"discrepancy", c.discrepancy}});
  }
  j["checks"] = checks;
  j["max_discrepancy"] = r.max_discrepancy();
  return j;
}

Json to_json(const SolverTrace& t) {
  Json j;
  j["status"] = to_string(t.status);
  if (!t.diagnostic.empty()) j["diagnostic"] = t.diagnostic;
  j["seed"] = t.seed;
  j["iterations"] = t.iterations;
  j["lambda_sc"] = t.lambda_sc;
  j["initial_gap"] = t.initial_gap;
  j["final_gap"] = t.final_gap;
  j["theoretical_iteration_bound"] = t.theoretical_iteration_bound;
  j["sampling"] = to_json(t.spec);
  j["v"] = to_json(t.v);
  j["p"] = to_json(t.p);
  j["x"] = to_json(t.x);
  j["recorded_iterations"] = t.recorded_iterations;
  j["gaps"] = t.gaps;
  return j;
}

void write_trace_csv(std::ostream& out, const SolverTrace& t) {
  out << "iteration,gap\n" << std::setprecision(17);
  for (std::size_t k = 0; k < t.gaps.size(); ++k) out << t.recorded_iterations[k] << ',' << t.gaps[k] << '\n';
}

ProblemSidecar sidecar_from_json(const Json& j, int n) {
  if (!j.is_object()) throw ValidationError("sidecar", "expected an object {lambda, b, x0}");
  for (const auto& [key, value] : j.items()) {
    if (key != "lambda" && key != "b" && key != "x0") throw ValidationError(key, "unknown field");
  }
  ProblemSidecar s;
  s.lambda = j.contains("lambda") ? as_double(j["lambda"], "lambda") : 0.0;
  if (!(s.lambda >= 0.0) || !std::isfinite(s.lambda)) throw ValidationError("lambda", "must be finite and nonnegative");
  s.b = j.contains("b") ? vector_from_json(j["b"], "b") : Eigen::VectorXd::Zero(n);
  s.x0 = j.contains("x0") ? vector_from_json(j["x0"], "x0") : Eigen::VectorXd::Ones(n);
  if (s.b.size() != n) throw ValidationError("b", "expected length " + std::to_string(n));
  if (s.x0.size() != n) throw ValidationError("x0", "expected length " + std::to_string(n));
  return s;
}

Json to_json(const ProblemSidecar& s) {
  return {{"lambda", s.lambda}, {"b", to_json(s.b)}, {"x0", to_json(s.x0)}};
}

Json report_envelope(const std::string& command, const Json& config) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["config"] = config;
  return j;
}

}  // namespace esokit::io
