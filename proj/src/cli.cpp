#include "esokit/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "esokit/data_matrix.hpp"
#include "esokit/error.hpp"
#include "esokit/eso.hpp"
#include "esokit/io.hpp"
#include "esokit/prob_matrix.hpp"
#include "esokit/solver.hpp"
#include "esokit/spectral.hpp"
#include "esokit/verifier.hpp"

namespace esokit {

namespace {

using io::Json;

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  std::optional<double> tolerance;
  std::string out;
};

struct Inputs {
  std::string matrix;
  std::string sampling;
  std::string v;
  std::string sidecar;
  std::string formula = "coupled-exact";
  std::string mode = "exhaustive";
  std::string method = "auto";
  std::string formulas = "conservative,generic,coupled-power";
  std::string trace_csv;
  std::string junit;
  std::size_t trials = 100000;
  std::size_t samples = 100000;
  int power_T = 10;
  int dense_cap = 2000;
  int seeds = 1;
  double epsilon = 1e-6;
  double lambda = 0.0;
  std::size_t max_iter = 1000000;
  std::size_t record_every = 1;
  std::vector<int> sizes = {3, 4, 5, 6};
  int specs = 50;
  int pairs = 1;
};

bool looks_inline(const std::string& s) {
  const auto k = s.find_first_not_of(" \t\r\n");
  return k != std::string::npos && (s[k] == '{' || s[k] == '[');
}

SamplingSpec load_sampling(const std::string& arg) {
  if (arg.empty()) throw ValidationError("sampling", "--sampling is required");
  return io::sampling_from_json(looks_inline(arg) ? io::parse_json(arg, "--sampling") : io::read_json_file(arg));
}

DataMatrix load_matrix(const std::string& path) {
  if (path.empty()) throw ValidationError("matrix", "--matrix is required");
  return read_data_matrix_file(path);
}

Eigen::VectorXd load_v(const std::string& path) {
  if (path.empty()) throw ValidationError("v", "--v is required");
  Json j = looks_inline(path) ? io::parse_json(path, "--v") : io::read_json_file(path);
  if (j.is_object() && j.contains("result")) j = j["result"];
  return io::v_from_json(j);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void emit(const Globals& g, const Json& report, std::ostream& out) {
  if (g.out.empty()) {
    out << io::dump(report);
  } else {
    io::write_text_file(g.out, io::dump(report));
  }
}

Json base_config(const Globals& g, const std::string& command) {
  Json c;
  c["command"] = command;
  c["seed"] = g.seed;
  c["threads"] = g.threads;
  if (g.tolerance) c["tolerance"] = *g.tolerance;
  c["out"] = g.out;
  return c;
}

void print_v_summary(std::ostream& out, const EsoResult& r, int tau) {
  const double n = static_cast<double>(r.v.size());
  const double ratio = (r.v.array() * tau / (r.p.array() * n)).maxCoeff();
  out << std::setprecision(6) << "formula " << to_string(r.formula) << ": v min " << r.v.minCoeff() << ", max "
      << r.v.maxCoeff() << ", mean " << r.v.mean() << "; max_i v_i tau/(p_i n) = " << ratio << '\n';
  if (r.certificate_margin) out << "certificate margin " << *r.certificate_margin << '\n';
}

EsoResult compute_v(const DataMatrix& A, const SamplingSpec& spec, const std::string& formula, const Inputs& in) {
  EsoOptions options;
  options.dense_cap = in.dense_cap;
  options.power.iterations = in.power_T;
  if (formula == "specialized") return eso_specialized(A, spec);
  return compute_eso(A, spec, formula_from_string(formula), options);
}

int cmd_compute_v(const Globals& g, const Inputs& in, std::ostream& out) {
  const DataMatrix A = load_matrix(in.matrix);
  const SamplingSpec spec = load_sampling(in.sampling);
  EsoResult result = compute_v(A, spec, in.formula, in);
  if (!result.certificate_margin && spec.n <= in.dense_cap) {
    result.certificate_margin = certify(A, spec, result.v, in.dense_cap).margin;
  }
  Json config = base_config(g, "compute-v");
  config["matrix"] = in.matrix;
  config["sampling"] = io::to_json(spec);
  config["formula"] = in.formula;
  config["power_T"] = in.power_T;
  config["dense_cap"] = in.dense_cap;
  Json report = io::report_envelope("compute-v", config);
  report["result"] = io::to_json(result);
  emit(g, report, out);
  if (!g.out.empty()) print_v_summary(out, result, cardinality_cap(spec));
  return kExitOk;
}

int cmd_verify(const Globals& g, const Inputs& in, std::ostream& out) {
  const DataMatrix A = load_matrix(in.matrix);
  const SamplingSpec spec = load_sampling(in.sampling);
  const Eigen::VectorXd v = load_v(in.v);
  if (v.size() != spec.n) throw DimensionError("v has length " + std::to_string(v.size()) + ", sampling has n = " + std::to_string(spec.n));
  const double tol = g.tolerance.value_or(1e-8);
  if (!(tol > 0.0)) throw ValidationError("tolerance", "must be positive");

  Json config = base_config(g, "verify");
  config["matrix"] = in.matrix;
  config["sampling"] = io::to_json(spec);
  config["v"] = in.v;
  config["mode"] = in.mode;
  config["trials"] = in.trials;
  Json report = io::report_envelope("verify", config);
  Json result = Json::object();

  bool pass = true;
  std::vector<Eigen::VectorXd> extra;
  if (spec.n <= in.dense_cap) {
    const auto cert = check_eso_matrix_form(A, spec, v, tol, in.dense_cap);
    result["certificate"] = io::to_json(cert);
    pass = pass && cert.pass;
    out << std::setprecision(6) << "certificate margin " << cert.margin << (cert.pass ? " (pass)" : " (FAIL)") << '\n';
    if (cert.witness) {
      extra.push_back(*cert.witness);
      out << "witness";
      for (Eigen::Index i = 0; i < cert.witness->size(); ++i) out << ' ' << (*cert.witness)(i);
      out << '\n';
    }
  }
  if (in.mode != "certificate") {
    CheckOptions options;
    options.mode = check_mode_from_string(in.mode);
    options.trials = in.trials;
    options.seed = g.seed;
    options.threads = g.threads;
    if (g.tolerance && options.mode == CheckMode::Exhaustive) options.exhaustive_tolerance = *g.tolerance;
    const auto points = canonical_points(spec.n, g.seed, extra);
    const auto check = check_eso_quadratic(A, spec, v, points, options);
    result["simulation"] = io::to_json(check);
    pass = pass && check.pass;
    out << std::setprecision(6) << to_string(check.mode) << " check over " << check.points_tested
        << " points: worst slack " << check.slack << " (stderr " << check.lhs_stderr << ")"
        << (check.pass ? " pass" : " FAIL") << '\n';
  }
  result["pass"] = pass;
  report["result"] = result;
  if (!g.out.empty()) io::write_text_file(g.out, io::dump(report));
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_probmatrix(const Globals& g, const Inputs& in, std::ostream& out) {
  const SamplingSpec spec = load_sampling(in.sampling);
  ProbMatrixOptions options;
  options.method = prob_method_from_string(in.method);
  options.samples = in.samples;
  options.seed = g.seed;
  options.threads = g.threads;
  const ProbMatrix P = prob_matrix(spec, options);

  if (!g.out.empty() && !ends_with(g.out, ".json")) {
    std::ostringstream csv;
    io::write_prob_matrix_csv(csv, P);
    io::write_text_file(g.out, csv.str());
  } else {
    Json config = base_config(g, "probmatrix");
    config["sampling"] = io::to_json(spec);
    config["method"] = in.method;
    config["samples"] = in.samples;
    Json report = io::report_envelope("probmatrix", config);
    Json result;
    result["prob_matrix"] = io::to_json(P);
    result["lambda_prime"] = io::to_json(lambda_prime(P.entries));
    result["lambda"] = io::to_json(lambda_max(P.entries));
    result["bounds"] = io::to_json(lambda_bounds(spec));
    report["result"] = result;
    emit(g, report, out);
  }
  if (!g.out.empty()) {
    out << "n " << P.n() << ", provenance " << to_string(P.provenance);
    if (!P.exact()) out << ", max standard error " << P.max_standard_error();
    out << '\n';
  }
  return kExitOk;
}

QuadraticProblem load_problem(const Inputs& in, io::ProblemSidecar& sidecar) {
  QuadraticProblem problem;
  problem.A = load_matrix(in.matrix);
  sidecar = in.sidecar.empty() ? io::sidecar_from_json(Json::object(), problem.A.cols())
                               : io::sidecar_from_json(io::read_json_file(in.sidecar), problem.A.cols());
  problem.ridge = sidecar.lambda;
  problem.b = sidecar.b;
  return problem;
}

int cmd_solve(const Globals& g, const Inputs& in, std::ostream& out) {
  io::ProblemSidecar sidecar;
  const QuadraticProblem problem = load_problem(in, sidecar);
  const SamplingSpec spec = load_sampling(in.sampling);
  Eigen::VectorXd v;
  std::string v_source;
  if (!in.v.empty()) {
    v = load_v(in.v);
    v_source = in.v;
  } else {
    v = compute_v(problem.augmented(), spec, in.formula, in).v;
    v_source = in.formula;
  }
  if (in.seeds < 1) throw ValidationError("seeds", "must be at least 1");
  SolverOptions options;
  options.epsilon = in.epsilon;
  options.max_iterations = in.max_iter;
  options.record_every = in.record_every;
  std::vector<std::uint64_t> seeds;
  for (int s = 0; s < in.seeds; ++s) seeds.push_back(g.seed + static_cast<std::uint64_t>(s));
  const auto traces = solve_many(problem, spec, v, sidecar.x0, seeds, options, g.threads);

  Json config = base_config(g, "solve");
  config["matrix"] = in.matrix;
  config["sidecar"] = io::to_json(sidecar);
  config["sampling"] = io::to_json(spec);
  config["v_source"] = v_source;
  config["epsilon"] = in.epsilon;
  config["max_iter"] = in.max_iter;
  config["record_every"] = in.record_every;
  config["seeds"] = in.seeds;
  Json report = io::report_envelope("solve", config);
  Json runs = Json::array();
  bool diverged = false;
  for (const auto& t : traces) {
    runs.push_back(io::to_json(t));
    diverged = diverged || t.status == SolverStatus::Diverged;
  }
  report["result"] = Json{{"runs", runs}};
  emit(g, report, out);
  if (!in.trace_csv.empty()) {
    std::ostringstream csv;
    io::write_trace_csv(csv, traces.front());
    io::write_text_file(in.trace_csv, csv.str());
  }
  if (!g.out.empty()) {
    for (const auto& t : traces) {
      out << "seed " << t.seed << ": " << to_string(t.status) << " after " << t.iterations << " iterations, gap "
          << std::setprecision(6) << t.final_gap << " (bound " << t.theoretical_iteration_bound << ")\n";
      if (!t.diagnostic.empty()) out << "  " << t.diagnostic << '\n';
    }
  }
  return diverged ? kExitCheckFailed : kExitOk;
}

std::vector<FormulaId> parse_formulas(const std::string& list) {
  std::vector<FormulaId> ids;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) ids.push_back(formula_from_string(item));
  }
  if (ids.empty()) throw ValidationError("formulas", "no formula given");
  return ids;
}

int cmd_tradeoff(const Globals& g, const Inputs& in, std::ostream& out) {
  const DataMatrix A = load_matrix(in.matrix);
  const SamplingSpec spec = load_sampling(in.sampling);
  const double lambda = in.lambda > 0.0 ? in.lambda : 1e-3;
  const auto report_data = tradeoff_report(A, spec, parse_formulas(in.formulas), in.power_T, lambda, in.epsilon);
  Json config = base_config(g, "tradeoff");
  config["matrix"] = in.matrix;
  config["sampling"] = io::to_json(spec);
  config["formulas"] = in.formulas;
  config["power_T"] = in.power_T;
  config["lambda"] = lambda;
  config["epsilon"] = in.epsilon;
  Json report = io::report_envelope("tradeoff", config);
  report["result"] = io::to_json(report_data);
  emit(g, report, out);
  if (!g.out.empty()) {
    out << std::left << std::setw(16) << "formula" << std::setw(14) << "preprocess" << std::setw(14) << "iterate"
        << std::setw(14) << "total" << "max v*tau/(p*n)\n";
    for (const auto& row : report_data.rows) {
      out << std::setprecision(5) << std::setw(16) << to_string(row.formula) << std::setw(14) << row.preprocessing_passes
          << std::setw(14) << row.iteration_passes << std::setw(14) << row.total_passes << row.max_ratio << '\n';
    }
  }
  return kExitOk;
}

int cmd_design_serial(const Globals& g, const Inputs& in, std::ostream& out) {
  io::ProblemSidecar sidecar;
  const QuadraticProblem problem = load_problem(in, sidecar);
  const Optimum opt = solve_optimum(problem);
  // The ridge rows contribute lambda to every w_i.
  const SerialDesign design = optimal_serial_sampling(problem.augmented(), sidecar.x0, opt.x);
  Json config = base_config(g, "design-serial");
  config["matrix"] = in.matrix;
  config["sidecar"] = io::to_json(sidecar);
  Json report = io::report_envelope("design-serial", config);
  report["result"] = io::to_json(design);
  std::vector<double> q(design.p.data(), design.p.data() + design.p.size());
  report["result"]["sampling"] = io::to_json(SamplingSpec::serial(q));
  emit(g, report, out);
  if (!g.out.empty()) {
    out << std::setprecision(6) << "C_opt " << design.c_opt << ", C_unif " << design.c_unif << ", ratio "
        << design.ratio << '\n';
  }
  return kExitOk;
}

int cmd_battery(const Globals& g, const Inputs& in, std::ostream& out) {
  BatteryOptions options;
  options.seeds = {g.seed};
  options.sizes = in.sizes;
  options.specs_per_size = in.specs;
  options.pairs_per_spec = in.pairs;
  const auto result = run_identity_battery(options);
  Json config = base_config(g, "battery");
  config["sizes"] = in.sizes;
  config["specs"] = in.specs;
  config["pairs"] = in.pairs;
  Json report = io::report_envelope("battery", config);
  report["result"] = io::to_json(result);
  emit(g, report, out);
  if (!in.junit.empty()) {
    std::ostringstream xml;
    write_junit(xml, result);
    io::write_text_file(in.junit, xml.str());
  }
  for (const auto& c : result.checks) {
    if (!g.out.empty() || !c.pass) {
      out << (c.pass ? "pass " : "FAIL ") << c.name << " (" << c.cases << " cases, max " << std::setprecision(3)
          << c.max_discrepancy << ")\n";
    }
  }
  return result.pass() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ESO stepsizes for randomized coordinate descent", "esokit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  Inputs in;
  app.add_option("--seed", g.seed, "RNG seed (default 0)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--tolerance", g.tolerance, "check tolerance");
  app.add_option("--out", g.out, "output path (stdout when omitted)");

  auto* compute = app.add_subcommand("compute-v", "compute ESO parameters v");
  compute->add_option("--matrix", in.matrix)->required();
  compute->add_option("--sampling", in.sampling, "JSON file or inline JSON")->required();
  compute->add_option("--formula", in.formula, "formula id or 'specialized'");
  compute->add_option("--power-T", in.power_T);
  compute->add_option("--dense-cap", in.dense_cap);

  auto* verify = app.add_subcommand("verify", "check (f, S) ~ ESO(v)");
  verify->add_option("--matrix", in.matrix)->required();
  verify->add_option("--sampling", in.sampling)->required();
  verify->add_option("--v", in.v)->required();
  verify->add_option("--mode", in.mode, "exhaustive | monte_carlo | certificate");
  verify->add_option("--trials", in.trials);
  verify->add_option("--dense-cap", in.dense_cap);

  auto* prob = app.add_subcommand("probmatrix", "probability matrix of a sampling");
  prob->add_option("--sampling", in.sampling)->required();
  prob->add_option("--method", in.method, "auto | closed_form | enumerate | monte_carlo");
  prob->add_option("--samples", in.samples);

  auto* solve_cmd = app.add_subcommand("solve", "run coordinate descent");
  solve_cmd->add_option("--matrix", in.matrix)->required();
  solve_cmd->add_option("--sidecar", in.sidecar, "JSON {lambda, b, x0}");
  solve_cmd->add_option("--sampling", in.sampling)->required();
  solve_cmd->add_option("--v", in.v, "precomputed v; otherwise --formula on the ridge-augmented matrix");
  solve_cmd->add_option("--formula", in.formula);
  solve_cmd->add_option("--power-T", in.power_T);
  solve_cmd->add_option("--epsilon", in.epsilon);
  solve_cmd->add_option("--max-iter", in.max_iter);
  solve_cmd->add_option("--record-every", in.record_every);
  solve_cmd->add_option("--seeds", in.seeds, "number of seeds, starting at --seed");
  solve_cmd->add_option("--trace-csv", in.trace_csv);

  auto* trade = app.add_subcommand("tradeoff", "preprocessing vs iteration passes");
  trade->add_option("--matrix", in.matrix)->required();
  trade->add_option("--sampling", in.sampling)->required();
  trade->add_option("--formulas", in.formulas, "comma-separated formula ids");
  trade->add_option("--power-T", in.power_T);
  trade->add_option("--lambda", in.lambda, "strong convexity (default 1e-3)");
  trade->add_option("--epsilon", in.epsilon);

  auto* design = app.add_subcommand("design-serial", "optimal serial sampling");
  design->add_option("--matrix", in.matrix)->required();
  design->add_option("--sidecar", in.sidecar, "JSON {lambda, b, x0}");

  auto* battery = app.add_subcommand("battery", "probability-matrix identity battery");
  battery->add_option("--sizes", in.sizes)->delimiter(',');
  battery->add_option("--specs", in.specs);
  battery->add_option("--pairs", in.pairs);
  battery->add_option("--junit", in.junit);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  try {
    if (compute->parsed()) return cmd_compute_v(g, in, out);
    if (verify->parsed()) return cmd_verify(g, in, out);
    if (prob->parsed()) return cmd_probmatrix(g, in, out);
    if (solve_cmd->parsed()) return cmd_solve(g, in, out);
    if (trade->parsed()) return cmd_tradeoff(g, in, out);
    if (design->parsed()) return cmd_design_serial(g, in, out);
    if (battery->parsed()) return cmd_battery(g, in, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitInputError;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInputError;
  } catch (const DimensionError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInputError;
  } catch (const UnsupportedError& e) {
    err << "unsupported: " << e.what() << '\n';
    return kExitUnsupported;
  } catch (const CapacityError& e) {
    err << "unsupported: " << e.what() << '\n';
    return kExitUnsupported;
  } catch (const nlohmann::json::exception& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitInputError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitInputError;
}

}  // namespace esokit
