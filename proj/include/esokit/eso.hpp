#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "esokit/data_matrix.hpp"
#include "esokit/prob_matrix.hpp"
#include "esokit/sampling.hpp"
#include "esokit/spectral.hpp"

namespace esokit {

// v_i for columns with w_i = 0; keeps v > 0 without affecting the objective.
inline constexpr double kVFloor = 1e-12;

enum class FormulaId {
  Uncoupled,       // min{lambda'(P), lambda'(A'A)} w_i
  CoupledExact,    // sum_j lambda'(J_j n S) A_ji^2, dense eigen-solves
  CoupledBound,    // ... with the tightest closed-form upper bound per row
  CoupledFormula,  // ... with the tau-nice closed form per row
  CoupledPower,    // ... with safeguarded power iterations per row
  GenericTau,      // case (i): sum_j min{|J_j|, tau} A_ji^2
  CTauDistributed, // case (ii)
  TauNice,         // case (iii)
  DoublyUniform,   // case (iv)
  Graph,           // case (v): w_i
  Serial,          // case (vi): w_i
  Conservative,    // min{tau, omega} w_i
};

std::string to_string(FormulaId id);
FormulaId formula_from_string(const std::string& name);

struct EsoResult {
  Eigen::VectorXd v;
  Eigen::VectorXd p;
  FormulaId formula = FormulaId::Uncoupled;
  std::optional<double> certificate_margin;
  double cost_estimate = 0.0;  // arithmetic operations spent computing v
  // Coupled formulas: lambda'(J_j n S) per row and which method produced it.
  std::vector<double> row_multipliers;
  std::vector<std::string> row_sources;
  std::vector<std::string> notes;
};

struct EsoOptions {
  // Largest n for which dense n x n matrices (P, A'A) are formed.
  int dense_cap = 2000;
  PowerOptions power;
  // lambda'(A'A) supplied by the caller when n exceeds the dense cap.
  std::optional<double> data_lambda_prime;
};

// min{lambda'(P), lambda'(A'A)} w; no coupling between the sampling and the data.
EsoResult eso_uncoupled(const DataMatrix& A, const SamplingSpec& spec, const EsoOptions& options = {});

// v_i = sum_j lambda'(J_j n S) A_ji^2 with the restricted eigenvalue computed by `method`.
EsoResult eso_coupled(const DataMatrix& A, const SamplingSpec& spec, RestrictedMethod method,
                      const EsoOptions& options = {});

// Eigenvalue-free closed forms. `formula` must be one of GenericTau,
// CTauDistributed, TauNice, DoublyUniform, Graph, Serial, Conservative.
EsoResult eso_formula(const DataMatrix& A, const SamplingSpec& spec, FormulaId formula);

// Dispatches on the sampling kind to the sharpest applicable closed form.
EsoResult eso_specialized(const DataMatrix& A, const SamplingSpec& spec);

// Any formula by id.
EsoResult compute_eso(const DataMatrix& A, const SamplingSpec& spec, FormulaId formula,
                      const EsoOptions& options = {});

struct Certificate {
  double margin = 0.0;      // lambda_min(Diag(v o p) - P o A'A)
  Eigen::VectorXd witness;  // unit eigenvector achieving the margin
  double witness_gap = 0.0; // witness' (Diag(v o p) - P o A'A) witness
};

// Exact P only; Monte-Carlo estimates are refused.
Certificate certify(const DataMatrix& A, const ProbMatrix& P, const Eigen::VectorXd& v,
                    int dense_cap = 2000);
Certificate certify(const DataMatrix& A, const SamplingSpec& spec, const Eigen::VectorXd& v,
                    int dense_cap = 2000);

// --- composite functions f(x) = sum_j phi_j(M_j x), phi_j gamma_j-smooth ---

enum class CompositionCase { General, PartialSeparability, SingleLinearMap, RowwiseScalar };

struct FunctionPiece {
  double gamma = 1.0;
  Eigen::MatrixXd map;  // d x n
};

struct ComposedFunction {
  int n = 0;
  CompositionCase structure = CompositionCase::General;
  std::vector<FunctionPiece> pieces;

  static ComposedFunction general(int n, std::vector<FunctionPiece> pieces);
  // phi_j depends on the coordinates in C_j only.
  static ComposedFunction partially_separable(int n, const std::vector<IndexSet>& supports,
                                              const std::vector<double>& gammas);
  static ComposedFunction single_map(double gamma, Eigen::MatrixXd map);
  // phi_j(e_j' M x), one scalar loss per row of M.
  static ComposedFunction rowwise(const std::vector<double>& gammas, const Eigen::MatrixXd& M);

  // sum_j gamma_j M_j' M_j
  Eigen::MatrixXd gram() const;
};

// A with A'A = sum_j gamma_j M_j' M_j; diagonal / scaled / row-scaled in the special cases.
DataMatrix assemble_from_pieces(const ComposedFunction& f);

}  // namespace esokit
