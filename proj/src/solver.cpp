#include "esokit/solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "esokit/error.hpp"
#include "esokit/parallel.hpp"
#include "esokit/rng.hpp"

namespace esokit {

namespace {

Eigen::MatrixXd hessian(const QuadraticProblem& problem) {
  Eigen::MatrixXd H = problem.A.gram();
  H.diagonal().array() += problem.ridge;
  return H;
}

void require_length(const Eigen::VectorXd& x, int n, const char* field) {
  if (x.size() != n) {
    throw DimensionError(std::string(field) + " has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(n));
  }
  if (!x.allFinite()) throw ValidationError(field, "non-finite entries");
}

}  // namespace

DataMatrix QuadraticProblem::augmented() const { return A.with_ridge_rows(ridge); }

double QuadraticProblem::objective(const Eigen::VectorXd& x) const {
  return 0.5 * A.multiply(x).squaredNorm() + 0.5 * ridge * x.squaredNorm() - b.dot(x);
}

Eigen::VectorXd QuadraticProblem::gradient(const Eigen::VectorXd& x) const {
  return A.multiply_transpose(A.multiply(x)) + ridge * x - b;
}

double QuadraticProblem::strong_convexity() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hessian(*this), Eigen::EigenvaluesOnly);
  const double low = solver.eigenvalues()(0);
  const double scale = std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
  if (!(low > 1e-12 * scale)) {
    throw ValidationError("problem", "objective is not strongly convex (ridge is 0 and A lacks full column rank)");
  }
  return low;
}

void validate(const QuadraticProblem& problem) {
  if (!(problem.ridge >= 0.0) || !std::isfinite(problem.ridge)) {
    throw ValidationError("lambda", "ridge must be finite and nonnegative");
  }
  require_length(problem.b, problem.n(), "b");
  if (problem.ridge == 0.0) problem.strong_convexity();
}

Optimum solve_optimum(const QuadraticProblem& problem) {
  validate(problem);
  const Eigen::MatrixXd H = hessian(problem);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError("direct solve failed: Hessian is not positive definite");
  }
  Optimum opt;
  opt.x = ldlt.solve(problem.b);
  const double scale = std::max({1.0, problem.b.cwiseAbs().maxCoeff(), H.cwiseAbs().maxCoeff()});
  for (int k = 0; k < 10; ++k) {
    const Eigen::VectorXd r = problem.b - H * opt.x;
    opt.residual = r.cwiseAbs().maxCoeff();
    if (opt.residual <= 1e-12 * scale) break;
    opt.x += ldlt.solve(r);
    ++opt.refinements;
  }
  opt.residual = (problem.b - H * opt.x).cwiseAbs().maxCoeff();
  opt.value = problem.objective(opt.x);
  return opt;
}

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::Converged:
      return "converged";
    case SolverStatus::MaxIterations:
      return "max_iterations";
    case SolverStatus::Diverged:
      return "diverged";
  }
  return "unknown";
}

SolverTrace solve(const QuadraticProblem& problem, const SamplingSpec& spec, const Eigen::VectorXd& v,
                  const Eigen::VectorXd& x0, const SolverOptions& options) {
  return solve(problem, solve_optimum(problem), spec, v, x0, options);
}

SolverTrace solve(const QuadraticProblem& problem, const Optimum& optimum, const SamplingSpec& spec,
                  const Eigen::VectorXd& v, const Eigen::VectorXd& x0, const SolverOptions& options) {
  validate(problem);
  validate(spec);
  const int n = problem.n();
  if (spec.n != n) throw DimensionError("sampling is over " + std::to_string(spec.n) + " coordinates, problem has " + std::to_string(n));
  require_length(v, n, "v");
  require_length(x0, n, "x0");
  if ((v.array() <= 0.0).any()) throw ValidationError("v", "stepsize parameters must be positive");
  if (!is_proper(spec)) throw ValidationError("sampling", "sampling is not proper (some p_i = 0)");
  if (!(options.epsilon > 0.0)) throw ValidationError("epsilon", "must be positive");
  if (options.record_every == 0) throw ValidationError("record_every", "must be at least 1");

  const DataMatrix Aug = problem.augmented();
  SolverTrace trace;
  trace.seed = options.seed;
  trace.spec = spec;
  trace.v = v;
  trace.p = marginals(spec);
  trace.lambda_sc = options.lambda_sc.value_or(problem.ridge > 0.0 ? problem.ridge : problem.strong_convexity());

  // Gap is 1/2 |A_aug (x - x*)|^2, exact for a quadratic with H x* = b.
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = Aug.multiply(x);
  const Eigen::VectorXd r_star = Aug.multiply(optimum.x);
  auto gap_of = [&] { return 0.5 * (r - r_star).squaredNorm(); };

  double gap = gap_of();
  trace.initial_gap = gap;
  trace.theoretical_iteration_bound = nsync_iteration_bound(v, trace.p, trace.lambda_sc, std::max(gap, options.epsilon), options.epsilon);
  trace.recorded_iterations.push_back(0);
  trace.gaps.push_back(gap);

  Rng rng(options.seed, 0);
  std::deque<double> window{gap};
  std::vector<double> step;
  std::size_t k = 0;
  trace.status = SolverStatus::MaxIterations;
  if (options.stop_at_epsilon && gap <= options.epsilon) trace.status = SolverStatus::Converged;

  while (trace.status == SolverStatus::MaxIterations && k < options.max_iterations) {
    const IndexSet S = draw(spec, rng);
    step.assign(S.size(), 0.0);
    for (std::size_t a = 0; a < S.size(); ++a) {
      const int i = S[a];
      double g = -problem.b(i);
      for (const auto& e : Aug.column(i)) g += e.value * r(e.index);
      step[a] = -g / v(i);
    }
    for (std::size_t a = 0; a < S.size(); ++a) {
      const int i = S[a];
      x(i) += step[a];
      for (const auto& e : Aug.column(i)) r(e.index) += e.value * step[a];
    }
    ++k;
    gap = gap_of();
    if (!std::isfinite(gap)) {
      trace.status = SolverStatus::Diverged;
      trace.diagnostic = "non-finite objective at iteration " + std::to_string(k) + "; v is likely too small";
    }
    window.push_back(gap);
    if (window.size() > 11) window.pop_front();
    if (window.size() == 11 && gap > 10.0 * window.front() && gap > 1e-12 * trace.initial_gap) {
      trace.status = SolverStatus::Diverged;
      trace.diagnostic = "objective gap grew more than 10x over the 10 iterations ending at " +
                         std::to_string(k) + "; v does not satisfy the ESO";
    }
    if (k % options.record_every == 0 || trace.status == SolverStatus::Diverged ||
        (options.stop_at_epsilon && gap <= options.epsilon) || k == options.max_iterations) {
      trace.recorded_iterations.push_back(k);
      trace.gaps.push_back(gap);
    }
    if (trace.status != SolverStatus::Diverged && options.stop_at_epsilon && gap <= options.epsilon) {
      trace.status = SolverStatus::Converged;
    }
  }
  if (trace.status == SolverStatus::MaxIterations && gap <= options.epsilon) trace.status = SolverStatus::Converged;
  trace.iterations = k;
  trace.final_gap = gap;
  trace.x = x;
  return trace;
}

std::vector<SolverTrace> solve_many(const QuadraticProblem& problem, const SamplingSpec& spec,
                                    const Eigen::VectorXd& v, const Eigen::VectorXd& x0,
                                    const std::vector<std::uint64_t>& seeds, SolverOptions options,
                                    int threads) {
  const Optimum optimum = solve_optimum(problem);
  std::vector<SolverTrace> traces(seeds.size());
  if (seeds.empty()) return traces;
  // Validate once on the calling thread so workers cannot throw.
  options.seed = seeds.front();
  traces[0] = solve(problem, optimum, spec, v, x0, options);
  parallel_chunks(seeds.size() - 1, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      SolverOptions local = options;
      local.seed = seeds[s + 1];
      traces[s + 1] = solve(problem, optimum, spec, v, x0, local);
    }
  });
  return traces;
}

std::vector<double> mean_gaps(const std::vector<SolverTrace>& traces) {
  if (traces.empty()) return {};
  const auto& grid = traces.front().recorded_iterations;
  std::vector<double> mean(grid.size(), 0.0);
  for (const auto& t : traces) {
    if (t.recorded_iterations != grid) throw ValidationError("traces", "traces do not share a recording grid");
    for (std::size_t k = 0; k < grid.size(); ++k) mean[k] += t.gaps[k];
  }
  for (auto& g : mean) g /= static_cast<double>(traces.size());
  return mean;
}

std::string to_string(ComplexityKind k) {
  switch (k) {
    case ComplexityKind::NSync:
      return "nsync";
    case ComplexityKind::Quartz:
      return "quartz";
    case ComplexityKind::Alpha:
      return "alpha";
  }
  return "unknown";
}

ComplexityKind complexity_kind_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "nsync") return ComplexityKind::NSync;
  if (s == "quartz") return ComplexityKind::Quartz;
  if (s == "alpha") return ComplexityKind::Alpha;
  throw ValidationError("kind", "unknown complexity kind '" + name + "'");
}

namespace {

void check_vp(const Eigen::VectorXd& v, const Eigen::VectorXd& p) {
  if (v.size() != p.size() || v.size() == 0) throw DimensionError("v and p must be nonempty and of equal length");
  if (!v.allFinite() || (v.array() < 0.0).any()) throw ValidationError("v", "must be finite and nonnegative");
  if (!p.allFinite() || (p.array() < 0.0).any() || (p.array() > 1.0).any()) {
    throw ValidationError("p", "probabilities must lie in [0, 1]");
  }
}

double max_v_over_p(const Eigen::VectorXd& v, const Eigen::VectorXd& p) {
  if ((p.array() <= 0.0).any()) throw ValidationError("p", "zero inclusion probability");
  return (v.array() / p.array()).maxCoeff();
}

}  // namespace

double complexity_estimate(ComplexityKind kind, const ComplexityInput& in) {
  check_vp(in.v, in.p);
  if (!(in.epsilon > 0.0)) throw ValidationError("epsilon", "must be positive");
  const auto n = static_cast<double>(in.v.size());
  switch (kind) {
    case ComplexityKind::NSync: {
      if (!(in.lambda_sc > 0.0)) throw ValidationError("lambda", "strong convexity must be positive");
      const double log_term = std::log((in.initial_gap ? *in.initial_gap : 1.0) / in.epsilon);
      return max_v_over_p(in.v, in.p) / in.lambda_sc * log_term;
    }
    case ComplexityKind::Quartz: {
      if (!(in.lambda_sc > 0.0)) throw ValidationError("lambda", "strong convexity must be positive");
      if ((in.p.array() <= 0.0).any()) throw ValidationError("p", "zero inclusion probability");
      const double worst =
          (in.p.array().inverse() + in.v.array() / (in.p.array() * in.lambda_sc * n)).maxCoeff();
      return worst * std::log(1.0 / in.epsilon);
    }
    case ComplexityKind::Alpha: {
      if (in.x0.size() != in.v.size() || in.xstar.size() != in.v.size()) {
        throw DimensionError("alpha estimate needs x0 and x* of length n");
      }
      double total = 0.0;
      for (Eigen::Index i = 0; i < in.v.size(); ++i) {
        const double d = in.x0(i) - in.xstar(i);
        if (d == 0.0) continue;  // coordinates already optimal contribute nothing, even with p_i = 0
        if (in.p(i) <= 0.0) throw ValidationError("p", "zero probability on a coordinate that must move");
        total += in.v(i) * d * d / (in.p(i) * in.p(i));
      }
      return std::sqrt(2.0 * total) / std::sqrt(in.epsilon);
    }
  }
  return 0.0;
}

std::size_t nsync_iteration_bound(const Eigen::VectorXd& v, const Eigen::VectorXd& p, double lambda_sc,
                                  double initial_gap, double epsilon) {
  ComplexityInput in;
  in.v = v;
  in.p = p;
  in.lambda_sc = lambda_sc;
  in.epsilon = epsilon;
  in.initial_gap = initial_gap;
  const double k = std::ceil(complexity_estimate(ComplexityKind::NSync, in));
  return static_cast<std::size_t>(std::max(1.0, k));
}

SerialDesign optimal_serial_sampling(const Eigen::VectorXd& w, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& xstar) {
  const auto n = w.size();
  if (n == 0 || x0.size() != n || xstar.size() != n) throw DimensionError("w, x0 and x* must share a nonzero length");
  if (!w.allFinite() || (w.array() < 0.0).any()) throw ValidationError("w", "must be finite and nonnegative");
  if (!x0.allFinite() || !xstar.allFinite()) throw ValidationError("x0", "non-finite entries");
  SerialDesign out;
  out.d.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.d(i) = std::pow(w(i), 1.0 / 6.0) * std::cbrt(std::abs(x0(i) - xstar(i)));
  }
  const Eigen::ArrayXd d2 = out.d.array().square();
  const double s2 = d2.sum();
  if (!(s2 > 0.0)) {
    throw ValidationError("x0", "all w_i (x0_i - x*_i)^2 are zero; nothing to optimize");
  }
  out.p = d2 / s2;
  out.c_opt = std::pow(s2, 1.5);
  out.c_unif = static_cast<double>(n) * std::sqrt(d2.cube().sum());
  out.ratio = out.c_unif / out.c_opt;
  return out;
}

SerialDesign optimal_serial_sampling(const DataMatrix& A, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& xstar) {
  return optimal_serial_sampling(A.column_sq_norms(), x0, xstar);
}

TradeoffReport tradeoff_report(const DataMatrix& A, const SamplingSpec& spec,
                               const std::vector<FormulaId>& formulas, int power_iterations,
                               double lambda_sc, double epsilon) {
  validate(spec);
  if (power_iterations < 1) throw ValidationError("power_T", "must be at least 1");
  if (!(lambda_sc > 0.0)) throw ValidationError("lambda", "strong convexity must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("epsilon", "must lie in (0, 1)");
  TradeoffReport report;
  report.tau = cardinality_cap(spec);
  report.lambda_sc = lambda_sc;
  report.epsilon = epsilon;
  report.power_iterations = power_iterations;
  const double n = spec.n;
  const double nnz = std::max<double>(1.0, static_cast<double>(A.nnz()));
  const double coupled_passes = power_iterations * A.sum_sq_supports() / nnz;

  EsoOptions options;
  options.power.iterations = power_iterations;
  for (FormulaId id : formulas) {
    const EsoResult eso = compute_eso(A, spec, id, options);
    TradeoffRow row;
    row.formula = id;
    switch (id) {
      case FormulaId::Conservative:
        row.preprocessing_passes = 1.0;
        break;
      case FormulaId::Uncoupled:
        row.preprocessing_passes = 2.0 * power_iterations;
        break;
      case FormulaId::CoupledExact:
      case FormulaId::CoupledBound:
      case FormulaId::CoupledFormula:
      case FormulaId::CoupledPower:
        row.preprocessing_passes = coupled_passes;
        break;
      default:
        row.preprocessing_passes = 2.0;
    }
    row.max_ratio = (eso.v.array() * report.tau / (eso.p.array() * n)).maxCoeff();
    row.iteration_passes = row.max_ratio / lambda_sc * std::log(1.0 / epsilon);
    row.total_passes = row.preprocessing_passes + row.iteration_passes;
    row.v_min = eso.v.minCoeff();
    row.v_max = eso.v.maxCoeff();
    row.v_mean = eso.v.mean();
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace esokit
