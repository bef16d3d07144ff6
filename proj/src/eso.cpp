#include "esokit/eso.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/Eigenvalues>

#include "esokit/error.hpp"

namespace esokit {

namespace {

const std::pair<FormulaId, const char*> kFormulaNames[] = {
    {FormulaId::Uncoupled, "uncoupled"},
    {FormulaId::CoupledExact, "coupled-exact"},
    {FormulaId::CoupledBound, "coupled-bound"},
    {FormulaId::CoupledFormula, "coupled-formula"},
    {FormulaId::CoupledPower, "coupled-power"},
    {FormulaId::GenericTau, "generic"},
    {FormulaId::CTauDistributed, "ctau"},
    {FormulaId::TauNice, "tau-nice"},
    {FormulaId::DoublyUniform, "doubly-uniform"},
    {FormulaId::Graph, "graph"},
    {FormulaId::Serial, "serial"},
    {FormulaId::Conservative, "conservative"},
};

void require_compatible(const DataMatrix& A, const SamplingSpec& spec) {
  validate(spec);
  if (A.cols() != spec.n) {
    throw DimensionError("data matrix has " + std::to_string(A.cols()) +
                         " columns but the sampling is over n = " + std::to_string(spec.n));
  }
}

Eigen::VectorXd require_proper(const SamplingSpec& spec) {
  Eigen::VectorXd p = marginals(spec);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p(i) > 0.0)) {
      throw ValidationError("sampling", "improper sampling: coordinate " + std::to_string(i) +
                                            " is never selected");
    }
  }
  return p;
}

void apply_floor(Eigen::VectorXd& v, const DataMatrix& A) {
  const auto& w = A.column_sq_norms();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (w(i) == 0.0) v(i) = kVFloor;
  }
}

// v_i = sum_j multiplier(j) A_ji^2.
template <class Multiplier>
Eigen::VectorXd accumulate_rows(const DataMatrix& A, Multiplier&& multiplier) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(A.cols());
  for (int j = 0; j < A.rows(); ++j) {
    const auto row = A.row(j);
    if (row.empty()) continue;
    const double mult = multiplier(j);
    for (const auto& e : row) v(e.index) += mult * e.value * e.value;
  }
  return v;
}

}  // namespace

std::string to_string(FormulaId id) {
  for (const auto& [f, name] : kFormulaNames) {
    if (f == id) return name;
  }
  return "unknown";
}

FormulaId formula_from_string(const std::string& name) {
  for (const auto& [f, text] : kFormulaNames) {
    if (name == text) return f;
  }
  throw ValidationError("formula", "unknown formula '" + name + "'");
}

EsoResult eso_uncoupled(const DataMatrix& A, const SamplingSpec& spec, const EsoOptions& options) {
  require_compatible(A, spec);
  EsoResult result;
  result.formula = FormulaId::Uncoupled;
  result.p = require_proper(spec);
  const int n = spec.n;

  double sampling_lp = 0.0;
  double data_lp = 0.0;
  double cost = static_cast<double>(A.nnz());
  if (n <= options.dense_cap) {
    sampling_lp = lambda_prime(InclusionProbabilities(spec).full()).value;
    data_lp = lambda_prime(A.gram()).value;
    cost += A.sum_sq_supports() + 2.0 * std::pow(static_cast<double>(n), 3);
  } else {
    sampling_lp = cardinality_cap(spec);
    result.notes.push_back("n above dense cap: lambda'(P) replaced by its upper bound tau");
    if (options.data_lambda_prime) {
      data_lp = *options.data_lambda_prime;
    } else {
      data_lp = A.max_row_support();
      result.notes.push_back("lambda'(A'A) replaced by its upper bound max_j |J_j|");
    }
  }
  const double factor = std::min(sampling_lp, data_lp);
  result.v = factor * A.column_sq_norms();
  apply_floor(result.v, A);
  result.cost_estimate = cost;
  return result;
}

EsoResult eso_coupled(const DataMatrix& A, const SamplingSpec& spec, RestrictedMethod method,
                      const EsoOptions& options) {
  require_compatible(A, spec);
  EsoResult result;
  result.p = require_proper(spec);
  switch (method) {
    case RestrictedMethod::Exact:
      result.formula = FormulaId::CoupledExact;
      break;
    case RestrictedMethod::Bound:
      result.formula = FormulaId::CoupledBound;
      break;
    case RestrictedMethod::Formula:
      result.formula = FormulaId::CoupledFormula;
      break;
    case RestrictedMethod::Power:
      result.formula = FormulaId::CoupledPower;
      break;
  }
  const RestrictedEigenvalues restricted(spec, options.power);
  // Rows sharing a support share the multiplier.
  std::map<IndexSet, std::pair<double, std::string>> cache;
  result.row_multipliers.assign(A.rows(), 0.0);
  result.row_sources.assign(A.rows(), "empty");
  double cost = static_cast<double>(A.nnz());
  const auto& supports = A.row_supports();
  result.v = accumulate_rows(A, [&](int j) {
    const auto& J = supports[j];
    const double size = static_cast<double>(J.size());
    switch (method) {
      case RestrictedMethod::Exact:
        cost += size * size + size * size * size;
        break;
      case RestrictedMethod::Power:
        cost += size * size * (options.power.iterations + 1);
        break;
      default:
        cost += size;
        break;
    }
    auto it = cache.find(J);
    if (it == cache.end()) {
      auto est = restricted.evaluate(J, method);
      // the safeguarded power estimate can exceed min{|J|, tau}
      if (method == RestrictedMethod::Power && restricted.generic_bound(J.size()) < est.value) {
        est.value = restricted.generic_bound(J.size());
        est.bound_source = "generic";
      }
      it = cache.emplace(J, std::make_pair(est.value, est.bound_source)).first;
    }
    result.row_multipliers[j] = it->second.first;
    result.row_sources[j] = it->second.second;
    return it->second.first;
  });
  apply_floor(result.v, A);
  result.cost_estimate = cost;
  return result;
}

EsoResult eso_formula(const DataMatrix& A, const SamplingSpec& spec, FormulaId formula) {
  require_compatible(A, spec);
  EsoResult result;
  result.formula = formula;
  result.p = require_proper(spec);
  const int n = spec.n;
  const auto& supports = A.row_supports();
  auto size_of = [&](int j) { return static_cast<double>(supports[j].size()); };
  // Two passes: supports (and block counts), then accumulation.
  result.cost_estimate = 2.0 * static_cast<double>(A.nnz());

  switch (formula) {
    case FormulaId::GenericTau: {
      const double tau = cardinality_cap(spec);
      result.v = accumulate_rows(A, [&](int j) { return std::min(size_of(j), tau); });
      break;
    }
    case FormulaId::CTauDistributed: {
      if (spec.kind != SamplingKind::CTauDistributed) {
        throw UnsupportedError("ctau formula requires a (c, tau)-distributed sampling, got " +
                               to_string(spec.kind));
      }
      const RestrictedEigenvalues restricted(spec);
      result.v = accumulate_rows(A, [&](int j) { return *restricted.ctau_bound(supports[j]); });
      break;
    }
    case FormulaId::TauNice: {
      if (spec.kind != SamplingKind::TauNice) {
        throw UnsupportedError("tau-nice formula requires a tau-nice sampling, got " +
                               to_string(spec.kind));
      }
      const double tau = spec.tau;
      const double denom = std::max(n - 1, 1);
      result.v = accumulate_rows(A, [&](int j) { return 1.0 + (size_of(j) - 1.0) * (tau - 1.0) / denom; });
      break;
    }
    case FormulaId::DoublyUniform: {
      if (spec.kind != SamplingKind::DoublyUniform && spec.kind != SamplingKind::TauNice) {
        throw UnsupportedError("doubly-uniform formula requires a doubly uniform sampling, got " +
                               to_string(spec.kind));
      }
      const auto m = cardinality_moments(spec);
      const double excess = m.second / m.mean - 1.0;
      const double denom = std::max(n - 1, 1);
      result.v = accumulate_rows(A, [&](int j) { return 1.0 + (size_of(j) - 1.0) * excess / denom; });
      break;
    }
    case FormulaId::Graph: {
      if (spec.kind != SamplingKind::Graph) {
        throw UnsupportedError("graph formula requires a graph sampling, got " + to_string(spec.kind));
      }
      const auto conflicts = build_conflict_graph(A);
      for (std::size_t k = 0; k < spec.members.size(); ++k) {
        if (spec.members[k].prob > 0.0 && !conflicts.is_independent(spec.members[k].set)) {
          throw UnsupportedError("graph sampling member " + std::to_string(k) +
                                 " is not an independent set of this data's conflict graph");
        }
      }
      result.v = A.column_sq_norms();
      break;
    }
    case FormulaId::Serial:
      if (cardinality_cap(spec) > 1) {
        throw UnsupportedError("serial formula requires |S| <= 1 surely, got " +
                               to_string(spec.kind) + " sampling with cap " +
                               std::to_string(cardinality_cap(spec)));
      }
      result.v = A.column_sq_norms();
      break;
    case FormulaId::Conservative: {
      const double factor = std::min(cardinality_cap(spec), A.max_row_support());
      result.v = factor * A.column_sq_norms();
      result.cost_estimate = static_cast<double>(A.nnz());
      break;
    }
    default:
      throw UnsupportedError("formula '" + to_string(formula) + "' is not an eigenvalue-free closed form");
  }
  apply_floor(result.v, A);
  return result;
}

EsoResult eso_specialized(const DataMatrix& A, const SamplingSpec& spec) {
  switch (spec.kind) {
    case SamplingKind::Serial:
      return eso_formula(A, spec, FormulaId::Serial);
    case SamplingKind::Graph:
      return eso_formula(A, spec, FormulaId::Graph);
    case SamplingKind::TauNice:
      return eso_formula(A, spec, FormulaId::TauNice);
    case SamplingKind::CTauDistributed:
      return eso_formula(A, spec, FormulaId::CTauDistributed);
    case SamplingKind::DoublyUniform:
      return eso_formula(A, spec, FormulaId::DoublyUniform);
    default: {
      auto result = eso_formula(A, spec, FormulaId::GenericTau);
      result.notes.push_back("no specialized formula for " + to_string(spec.kind) +
                             " sampling; generic cardinality-cap formula used");
      return result;
    }
  }
}

EsoResult compute_eso(const DataMatrix& A, const SamplingSpec& spec, FormulaId formula,
                      const EsoOptions& options) {
  switch (formula) {
    case FormulaId::Uncoupled:
      return eso_uncoupled(A, spec, options);
    case FormulaId::CoupledExact:
      return eso_coupled(A, spec, RestrictedMethod::Exact, options);
    case FormulaId::CoupledBound:
      return eso_coupled(A, spec, RestrictedMethod::Bound, options);
    case FormulaId::CoupledFormula:
      return eso_coupled(A, spec, RestrictedMethod::Formula, options);
    case FormulaId::CoupledPower:
      return eso_coupled(A, spec, RestrictedMethod::Power, options);
    default:
      return eso_formula(A, spec, formula);
  }
}

Certificate certify(const DataMatrix& A, const ProbMatrix& P, const Eigen::VectorXd& v, int dense_cap) {
  if (!P.exact()) {
    throw UnsupportedError("certificate refused: a Monte-Carlo probability matrix cannot certify a "
                           "matrix inequality; use the statistical verifier instead");
  }
  const int n = A.cols();
  if (P.n() != n || v.size() != n) throw DimensionError("certify: P, v and A must agree on n");
  if (n > dense_cap) {
    throw CapacityError("certify: n = " + std::to_string(n) + " exceeds the dense cap " +
                        std::to_string(dense_cap));
  }
  const Eigen::VectorXd p = P.entries.diagonal();
  Eigen::MatrixXd D = -P.entries.cwiseProduct(A.gram());
  D.diagonal() += v.cwiseProduct(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (D + D.transpose()));
  if (solver.info() != Eigen::Success) throw NumericalError("certify: eigen-solve failed");
  Certificate cert;
  cert.margin = solver.eigenvalues()(0);
  cert.witness = solver.eigenvectors().col(0);
  cert.witness_gap = cert.witness.dot(D * cert.witness);
  return cert;
}

Certificate certify(const DataMatrix& A, const SamplingSpec& spec, const Eigen::VectorXd& v, int dense_cap) {
  require_compatible(A, spec);
  if (spec.n > dense_cap) {
    throw CapacityError("certify: n = " + std::to_string(spec.n) + " exceeds the dense cap " +
                        std::to_string(dense_cap));
  }
  return certify(A, prob_matrix(spec), v, dense_cap);
}

// ---------------------------------------------------------------------------

ComposedFunction ComposedFunction::general(int n, std::vector<FunctionPiece> pieces) {
  return {n, CompositionCase::General, std::move(pieces)};
}

ComposedFunction ComposedFunction::partially_separable(int n, const std::vector<IndexSet>& supports,
                                                       const std::vector<double>& gammas) {
  if (supports.size() != gammas.size()) {
    throw DimensionError("partially_separable: one gamma per support set required");
  }
  ComposedFunction f{n, CompositionCase::PartialSeparability, {}};
  for (std::size_t j = 0; j < supports.size(); ++j) {
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
    for (int i : supports[j]) {
      if (i < 0 || i >= n) throw ValidationError("supports", "index outside [0, n)");
      mask(i, i) = 1.0;
    }
    f.pieces.push_back({gammas[j], std::move(mask)});
  }
  return f;
}

ComposedFunction ComposedFunction::single_map(double gamma, Eigen::MatrixXd map) {
  const int n = static_cast<int>(map.cols());
  return {n, CompositionCase::SingleLinearMap, {{gamma, std::move(map)}}};
}

ComposedFunction ComposedFunction::rowwise(const std::vector<double>& gammas, const Eigen::MatrixXd& M) {
  if (static_cast<Eigen::Index>(gammas.size()) != M.rows()) {
    throw DimensionError("rowwise: one gamma per row of M required");
  }
  ComposedFunction f{static_cast<int>(M.cols()), CompositionCase::RowwiseScalar, {}};
  for (Eigen::Index j = 0; j < M.rows(); ++j) f.pieces.push_back({gammas[j], M.row(j)});
  return f;
}

Eigen::MatrixXd ComposedFunction::gram() const {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (const auto& piece : pieces) G += piece.gamma * piece.map.transpose() * piece.map;
  return G;
}

DataMatrix assemble_from_pieces(const ComposedFunction& f) {
  if (f.n <= 0) throw ValidationError("n", "must be positive");
  for (std::size_t j = 0; j < f.pieces.size(); ++j) {
    if (!(f.pieces[j].gamma > 0.0)) {
      throw ValidationError("pieces[" + std::to_string(j) + "].gamma", "must be positive");
    }
    if (f.pieces[j].map.cols() != f.n) {
      throw DimensionError("pieces[" + std::to_string(j) + "]: map has " +
                           std::to_string(f.pieces[j].map.cols()) + " columns, expected " +
                           std::to_string(f.n));
    }
  }
  switch (f.structure) {
    case CompositionCase::PartialSeparability: {
      Eigen::VectorXd diag = Eigen::VectorXd::Zero(f.n);
      for (const auto& piece : f.pieces) diag += piece.gamma * piece.map.diagonal().cwiseAbs2();
      return DataMatrix::from_dense(Eigen::MatrixXd(diag.cwiseSqrt().asDiagonal()));
    }
    case CompositionCase::SingleLinearMap:
      if (f.pieces.size() != 1) throw DimensionError("single linear map takes exactly one piece");
      return DataMatrix::from_dense(std::sqrt(f.pieces[0].gamma) * f.pieces[0].map);
    case CompositionCase::RowwiseScalar: {
      Eigen::MatrixXd A(static_cast<Eigen::Index>(f.pieces.size()), f.n);
      for (std::size_t j = 0; j < f.pieces.size(); ++j) {
        if (f.pieces[j].map.rows() != 1) throw DimensionError("row-wise pieces must be single rows");
        A.row(j) = std::sqrt(f.pieces[j].gamma) * f.pieces[j].map;
      }
      return DataMatrix::from_dense(A);
    }
    case CompositionCase::General:
      break;
  }
  Eigen::Index rows = 0;
  for (const auto& piece : f.pieces) rows += piece.map.rows();
  Eigen::MatrixXd stacked(rows, f.n);
  Eigen::Index at = 0;
  for (const auto& piece : f.pieces) {
    stacked.middleRows(at, piece.map.rows()) = std::sqrt(piece.gamma) * piece.map;
    at += piece.map.rows();
  }
  return DataMatrix::from_dense(stacked);
}

}  // namespace esokit
