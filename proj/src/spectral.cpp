#include "esokit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "esokit/error.hpp"

namespace esokit {

namespace {

double scale_of(const Eigen::MatrixXd& M) {
  return M.size() == 0 ? 1.0 : std::max(1.0, M.cwiseAbs().maxCoeff());
}

void require_symmetric(const Eigen::MatrixXd& M) {
  if (M.rows() != M.cols()) throw DimensionError("matrix must be square");
  if (!M.allFinite()) throw NumericalError("matrix has NaN or infinite entries");
  if (M.size() != 0 && (M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale_of(M)) {
    throw ValidationError("M", "matrix is not symmetric within 1e-10");
  }
}

EigenEstimate dense_top(const Eigen::MatrixXd& M) {
  EigenEstimate est;
  est.method = EigenMethod::DenseExact;
  if (M.rows() == 0) return est;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (M + M.transpose()));
  if (solver.info() != Eigen::Success) throw NumericalError("symmetric eigen-solve failed");
  const auto& values = solver.eigenvalues();
  const double top = values(values.size() - 1);
  if (values(0) < -1e-8 * std::max(1.0, std::abs(top))) {
    throw ValidationError("M", "matrix is not positive semidefinite (min eigenvalue " +
                                   std::to_string(values(0)) + ")");
  }
  const Eigen::VectorXd x = solver.eigenvectors().col(values.size() - 1);
  est.value = std::max(top, 0.0);
  est.residual = (M * x - top * x).norm() / x.norm();
  return est;
}

EigenEstimate power_top(const Eigen::MatrixXd& M, const PowerOptions& power) {
  if (power.iterations < 1) throw ValidationError("power.iterations", "must be at least 1");
  if (power.safeguard < 1.0) throw ValidationError("power.safeguard", "must be at least 1");
  EigenEstimate est;
  est.method = EigenMethod::PowerMethod;
  est.power = power;
  const auto k = M.rows();
  if (k == 0) return est;
  Eigen::VectorXd x = Eigen::VectorXd::Ones(k) / std::sqrt(static_cast<double>(k));
  if ((M * x).norm() <= 1e-12 * scale_of(M)) {
    // All-ones start lies in the null space; tilt it deterministically.
    for (Eigen::Index i = 0; i < k; ++i) x(i) = 1.0 + static_cast<double>(i + 1) / (k + 1);
    x.normalize();
  }
  double previous = x.dot(M * x);
  double current = previous;
  for (int t = 0; t < power.iterations; ++t) {
    Eigen::VectorXd y = M * x;
    const double norm = y.norm();
    if (norm == 0.0) {
      current = 0.0;
      break;
    }
    x = y / norm;
    previous = current;
    current = x.dot(M * x);
  }
  est.value = std::max(current, 0.0) * power.safeguard;
  est.residual = std::abs(current - previous) / std::max(std::abs(current), 1e-300);
  return est;
}

// Support of the diagonal; throws when a zero-diagonal row carries off-diagonal mass.
std::vector<Eigen::Index> diagonal_support(const Eigen::MatrixXd& M) {
  const double tol = 1e-12 * scale_of(M);
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    if (M(i, i) > tol) {
      support.push_back(i);
      continue;
    }
    if (M(i, i) < -tol) {
      throw ValidationError("M", "negative diagonal entry at " + std::to_string(i));
    }
    if (M.row(i).cwiseAbs().maxCoeff() > tol) {
      throw ValidationError("M", "invalid PSD matrix: zero diagonal at " + std::to_string(i) +
                                     " with nonzero off-diagonal entries");
    }
  }
  return support;
}

}  // namespace

std::string to_string(EigenMethod m) {
  return m == EigenMethod::DenseExact ? "dense_exact" : "power_method";
}

EigenEstimate lambda_max(const Eigen::MatrixXd& M, EigenMethod method, const PowerOptions& power) {
  require_symmetric(M);
  return method == EigenMethod::DenseExact ? dense_top(M) : power_top(M, power);
}

Eigen::MatrixXd normalized_on_support(const Eigen::MatrixXd& M) {
  const auto support = diagonal_support(M);
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::VectorXd inv_root(k);
  for (Eigen::Index a = 0; a < k; ++a) inv_root(a) = 1.0 / std::sqrt(M(support[a], support[a]));
  Eigen::MatrixXd N(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      N(a, b) = inv_root(a) * M(support[a], support[b]) * inv_root(b);
    }
  }
  return N;
}

EigenEstimate lambda_prime(const Eigen::MatrixXd& M, EigenMethod method, const PowerOptions& power) {
  require_symmetric(M);
  const Eigen::MatrixXd N = normalized_on_support(M);
  auto est = method == EigenMethod::DenseExact ? dense_top(N) : power_top(N, power);
  est.support_restricted = N.rows() != M.rows();
  return est;
}

double normalized_gap_ratio(const Eigen::MatrixXd& M) {
  const Eigen::MatrixXd N = normalized_on_support(M);
  if (N.rows() < 2) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(N, Eigen::EigenvaluesOnly);
  const auto& v = solver.eigenvalues();
  const double top = v(v.size() - 1);
  return top > 0.0 ? std::max(v(v.size() - 2), 0.0) / top : 0.0;
}

BoundsReport lambda_bounds(const SamplingSpec& spec, std::optional<int> tau_cap) {
  validate(spec);
  BoundsReport report;
  const auto moments = cardinality_moments(spec);
  report.tau = tau_cap.value_or(cardinality_cap(spec));
  if (tau_cap && *tau_cap < cardinality_cap(spec)) {
    report.notes.push_back("supplied tau is below the structural cardinality cap " +
                           std::to_string(cardinality_cap(spec)) + "; bounds assume it holds");
  }
  if (moments.mean > 0.0) {
    report.lambda_prime_lower = moments.second / moments.mean;
  } else {
    report.notes.push_back("nil sampling: lambda' lower bound undefined");
  }
  report.lambda_prime_upper = report.tau;
  report.lambda_lower = moments.second / spec.n;
  report.lambda_upper = moments.mean;
  if (is_certified_uniform(spec)) {
    report.uniform_sharpening = true;
    report.lambda_upper = std::min(report.lambda_upper, moments.mean * report.tau / spec.n);
  }
  return report;
}

std::string to_string(RestrictedMethod m) {
  switch (m) {
    case RestrictedMethod::Exact:
      return "exact";
    case RestrictedMethod::Formula:
      return "formula";
    case RestrictedMethod::Bound:
      return "bound";
    case RestrictedMethod::Power:
      return "power";
  }
  return "unknown";
}

RestrictedMethod restricted_method_from_string(const std::string& name) {
  if (name == "exact") return RestrictedMethod::Exact;
  if (name == "formula") return RestrictedMethod::Formula;
  if (name == "bound") return RestrictedMethod::Bound;
  if (name == "power") return RestrictedMethod::Power;
  throw ValidationError("method", "unknown restricted-eigenvalue method '" + name + "'");
}

RestrictedEigenvalues::RestrictedEigenvalues(const SamplingSpec& spec, PowerOptions power)
    : spec_(spec), power_(power), probs_(spec), moments_(cardinality_moments(spec)),
      cap_(cardinality_cap(spec)) {
  if (spec.kind == SamplingKind::CTauDistributed) {
    block_of_.assign(spec.n, 0);
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
      for (int i : spec.blocks[b]) block_of_[i] = static_cast<int>(b);
    }
  }
}

std::optional<double> RestrictedEigenvalues::tau_nice_formula(std::size_t size_J) const {
  if (spec_.kind != SamplingKind::TauNice || spec_.tau < 1) return std::nullopt;
  return 1.0 + (static_cast<double>(size_J) - 1.0) * (spec_.tau - 1.0) / std::max(spec_.n - 1, 1);
}

std::optional<double> RestrictedEigenvalues::ctau_bound(const IndexSet& J) const {
  if (spec_.kind != SamplingKind::CTauDistributed || spec_.tau < 1) return std::nullopt;
  const double s = static_cast<double>(spec_.blocks.front().size());
  const double s1 = std::max(s - 1.0, 1.0);
  const double tau = spec_.tau;
  std::vector<char> touched(spec_.blocks.size(), 0);
  for (int i : J) touched[block_of_[i]] = 1;
  const double omega = static_cast<double>(std::count(touched.begin(), touched.end(), 1));
  const double size = static_cast<double>(J.size());
  return 1.0 + (size - 1.0) * (tau - 1.0) / s1 + size * (tau / s - (tau - 1.0) / s1) * (omega - 1.0) / omega;
}

std::optional<double> RestrictedEigenvalues::doubly_uniform_bound(std::size_t size_J) const {
  if (spec_.kind != SamplingKind::DoublyUniform || moments_.mean <= 0.0) return std::nullopt;
  return 1.0 + (static_cast<double>(size_J) - 1.0) * (moments_.second / moments_.mean - 1.0) /
                   std::max(spec_.n - 1, 1);
}

double RestrictedEigenvalues::generic_bound(std::size_t size_J) const {
  return static_cast<double>(std::min<std::size_t>(size_J, static_cast<std::size_t>(cap_)));
}

EigenEstimate RestrictedEigenvalues::evaluate(const IndexSet& J, RestrictedMethod method) const {
  if (J.empty()) throw ValidationError("J", "restriction set must be nonempty");
  for (std::size_t k = 0; k < J.size(); ++k) {
    if (J[k] < 0 || J[k] >= spec_.n || (k > 0 && J[k] <= J[k - 1])) {
      throw ValidationError("J", "indices must be sorted, unique and inside [0, n)");
    }
  }
  switch (method) {
    case RestrictedMethod::Exact: {
      auto est = lambda_prime(probs_.submatrix(J), EigenMethod::DenseExact);
      est.bound_source = "exact";
      return est;
    }
    case RestrictedMethod::Power: {
      auto est = lambda_prime(probs_.submatrix(J), EigenMethod::PowerMethod, power_);
      est.bound_source = "power";
      return est;
    }
    case RestrictedMethod::Formula: {
      const auto value = tau_nice_formula(J.size());
      if (!value) {
        throw UnsupportedError("closed-form lambda'(J n S) is only available for tau-nice samplings "
                               "with tau >= 1, not " + to_string(spec_.kind));
      }
      EigenEstimate est;
      est.value = *value;
      est.bound_source = "tau_nice";
      est.candidates = {{"tau_nice", *value}};
      return est;
    }
    case RestrictedMethod::Bound:
      break;
  }
  EigenEstimate est;
  est.candidates.push_back({"generic", generic_bound(J.size())});
  if (auto v = ctau_bound(J)) est.candidates.push_back({"ctau_distributed", *v});
  if (auto v = tau_nice_formula(J.size())) est.candidates.push_back({"tau_nice", *v});
  if (auto v = doubly_uniform_bound(J.size())) est.candidates.push_back({"doubly_uniform", *v});
  const auto best = std::min_element(est.candidates.begin(), est.candidates.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; });
  est.value = best->second;
  est.bound_source = best->first;
  return est;
}

EigenEstimate lambda_prime_restricted(const SamplingSpec& spec, const IndexSet& J,
                                      RestrictedMethod method, const PowerOptions& power) {
  return RestrictedEigenvalues(spec, power).evaluate(J, method);
}

}  // namespace esokit
