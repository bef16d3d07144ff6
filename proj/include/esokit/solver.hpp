#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "esokit/data_matrix.hpp"
#include "esokit/eso.hpp"
#include "esokit/sampling.hpp"

namespace esokit {

// f(x) = 1/2 |Ax|^2 + (ridge/2) |x|^2 - b'x
struct QuadraticProblem {
  DataMatrix A;
  double ridge = 0.0;
  Eigen::VectorXd b;

  int n() const { return A.cols(); }
  // A stacked on sqrt(ridge) I, so that f(x) = 1/2 |A_aug x|^2 - b'x.
  DataMatrix augmented() const;
  double objective(const Eigen::VectorXd& x) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
  // lambda_min(A'A + ridge I); throws if the problem is not strongly convex.
  double strong_convexity() const;
};

void validate(const QuadraticProblem& problem);

struct Optimum {
  Eigen::VectorXd x;
  double value = 0.0;
  double residual = 0.0;  // |H x - b|_inf after refinement
  int refinements = 0;
};

// Direct LDLT solve of (A'A + ridge I) x = b with iterative refinement.
Optimum solve_optimum(const QuadraticProblem& problem);

enum class SolverStatus { Converged, MaxIterations, Diverged };
std::string to_string(SolverStatus s);

struct SolverOptions {
  double epsilon = 1e-6;
  std::size_t max_iterations = 1000000;
  std::uint64_t seed = 0;
  // Keep running after the gap drops below epsilon (for fixed-horizon experiments).
  bool stop_at_epsilon = true;
  std::size_t record_every = 1;
  // Strong convexity used for the iteration bound; defaults to the ridge.
  std::optional<double> lambda_sc;
};

struct SolverTrace {
  std::size_t iterations = 0;
  std::vector<std::size_t> recorded_iterations;
  std::vector<double> gaps;  // f(x_k) - f(x*) at recorded_iterations
  std::uint64_t seed = 0;
  SamplingSpec spec;
  Eigen::VectorXd v;
  Eigen::VectorXd p;
  Eigen::VectorXd x;  // final iterate
  double lambda_sc = 0.0;
  double initial_gap = 0.0;
  double final_gap = 0.0;
  std::size_t theoretical_iteration_bound = 0;
  SolverStatus status = SolverStatus::MaxIterations;
  std::string diagnostic;
};

// NSync-style method: draw S, then x_i <- x_i - grad_i f(x) / v_i for i in S.
SolverTrace solve(const QuadraticProblem& problem, const SamplingSpec& spec, const Eigen::VectorXd& v,
                  const Eigen::VectorXd& x0, const SolverOptions& options = {});
SolverTrace solve(const QuadraticProblem& problem, const Optimum& optimum, const SamplingSpec& spec,
                  const Eigen::VectorXd& v, const Eigen::VectorXd& x0, const SolverOptions& options);

// One run per seed (seeds run concurrently); traces returned in seed order.
std::vector<SolverTrace> solve_many(const QuadraticProblem& problem, const SamplingSpec& spec,
                                    const Eigen::VectorXd& v, const Eigen::VectorXd& x0,
                                    const std::vector<std::uint64_t>& seeds, SolverOptions options,
                                    int threads = 1);

// Pointwise mean of the recorded gaps; traces must share a recording grid.
std::vector<double> mean_gaps(const std::vector<SolverTrace>& traces);

enum class ComplexityKind { NSync, Quartz, Alpha };
std::string to_string(ComplexityKind k);
ComplexityKind complexity_kind_from_string(const std::string& name);

struct ComplexityInput {
  Eigen::VectorXd v;
  Eigen::VectorXd p;
  double lambda_sc = 0.0;  // NSync, Quartz
  double epsilon = 1e-6;
  // NSync: when set, log(1/eps) becomes log(initial_gap/eps).
  std::optional<double> initial_gap;
  Eigen::VectorXd x0;     // Alpha
  Eigen::VectorXd xstar;  // Alpha
};

double complexity_estimate(ComplexityKind kind, const ComplexityInput& input);
// ceil(max_i v_i/(p_i lambda) log(gap0/eps)), never below 1.
std::size_t nsync_iteration_bound(const Eigen::VectorXd& v, const Eigen::VectorXd& p, double lambda_sc,
                                  double initial_gap, double epsilon);

struct SerialDesign {
  Eigen::VectorXd p;
  Eigen::VectorXd d;  // w_i^{1/6} |x0_i - x*_i|^{1/3}
  double c_opt = 0.0;   // |d|_2^3
  double c_unif = 0.0;  // n |d|_6^3
  double ratio = 0.0;   // c_unif / c_opt
};

SerialDesign optimal_serial_sampling(const Eigen::VectorXd& w, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& xstar);
SerialDesign optimal_serial_sampling(const DataMatrix& A, const Eigen::VectorXd& x0,
                                     const Eigen::VectorXd& xstar);

struct TradeoffRow {
  FormulaId formula = FormulaId::GenericTau;
  double preprocessing_passes = 0.0;
  double iteration_passes = 0.0;
  double total_passes = 0.0;
  double max_ratio = 0.0;  // max_i v_i tau / (p_i n)
  double v_min = 0.0;
  double v_max = 0.0;
  double v_mean = 0.0;
};

struct TradeoffReport {
  int tau = 0;
  double lambda_sc = 0.0;
  double epsilon = 0.0;
  int power_iterations = 0;
  std::vector<TradeoffRow> rows;
};

TradeoffReport tradeoff_report(const DataMatrix& A, const SamplingSpec& spec,
                               const std::vector<FormulaId>& formulas, int power_iterations,
                               double lambda_sc, double epsilon);

}  // namespace esokit
