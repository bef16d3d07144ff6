#include "esokit/prob_matrix.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "esokit/error.hpp"
#include "esokit/parallel.hpp"
#include "esokit/rng.hpp"

namespace esokit {

namespace {

void require_same_size(const ProbMatrix& a, const ProbMatrix& b, const char* op) {
  if (a.n() != b.n()) {
    throw DimensionError(std::string(op) + ": dimension mismatch (" + std::to_string(a.n()) +
                         " vs " + std::to_string(b.n()) + ")");
  }
}

Provenance worst(Provenance a, Provenance b) {
  return static_cast<int>(a) > static_cast<int>(b) ? a : b;
}

ProbMatrix monte_carlo(const SamplingSpec& spec, const ProbMatrixOptions& options) {
  if (options.samples < 2) throw ValidationError("samples", "Monte-Carlo needs at least 2 samples");
  const int n = spec.n;
  const auto threads = std::max(options.threads, 1);
  // Integer pair counts per chunk: the merge is exact, hence thread-count independent.
  std::vector<Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>> counts(
      threads, Eigen::Matrix<std::uint64_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, n));
  parallel_chunks(options.samples, threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& c = counts[chunk];
    for (std::size_t k = begin; k < end; ++k) {
      Rng rng(options.seed, k);
      const auto s = draw(spec, rng);
      for (int i : s) {
        for (int j : s) ++c(i, j);
      }
    }
  });
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
  for (const auto& c : counts) mean += c.cast<double>();
  const double N = static_cast<double>(options.samples);
  mean /= N;
  ProbMatrix P;
  P.entries = (0.5 * (mean + mean.transpose())).cwiseMax(0.0).cwiseMin(1.0);
  P.provenance = Provenance::MonteCarlo;
  P.samples = options.samples;
  P.standard_error = (P.entries.array() * (1.0 - P.entries.array()) / N).sqrt().matrix();
  return P;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::ClosedForm:
      return "closed_form";
    case Provenance::Enumerated:
      return "enumerated";
    case Provenance::MonteCarlo:
      return "monte_carlo";
  }
  return "unknown";
}

Provenance provenance_from_string(const std::string& name) {
  if (name == "closed_form") return Provenance::ClosedForm;
  if (name == "enumerated") return Provenance::Enumerated;
  if (name == "monte_carlo") return Provenance::MonteCarlo;
  throw ValidationError("provenance", "unknown provenance '" + name + "'");
}

ProbMethod prob_method_from_string(const std::string& name) {
  if (name == "auto") return ProbMethod::Auto;
  if (name == "closed_form" || name == "closed-form") return ProbMethod::ClosedForm;
  if (name == "enumerate") return ProbMethod::Enumerate;
  if (name == "monte_carlo" || name == "monte-carlo") return ProbMethod::MonteCarlo;
  throw ValidationError("method", "unknown probability-matrix method '" + name + "'");
}

double ProbMatrix::max_standard_error() const {
  return standard_error.size() == 0 ? 0.0 : standard_error.maxCoeff();
}

bool has_closed_form(SamplingKind kind) {
  switch (kind) {
    case SamplingKind::Elementary:
    case SamplingKind::Serial:
    case SamplingKind::TauNice:
    case SamplingKind::CTauDistributed:
    case SamplingKind::DoublyUniform:
    case SamplingKind::Product:
      return true;
    default:
      return false;
  }
}

Eigen::MatrixXd prob_matrix_from_law(int n, const Distribution& law) {
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [s, p] : law) {
    for (int i : s) {
      for (int j : s) P(i, j) += p;
    }
  }
  return P;
}

ProbMatrix prob_matrix(const SamplingSpec& spec, const ProbMatrixOptions& options) {
  validate(spec);
  ProbMatrix P;
  switch (options.method) {
    case ProbMethod::ClosedForm:
      if (!has_closed_form(spec.kind)) {
        throw UnsupportedError("no closed-form probability matrix for " + to_string(spec.kind) +
                               " sampling");
      }
      P.entries = InclusionProbabilities(spec).full();
      P.provenance = Provenance::ClosedForm;
      return P;
    case ProbMethod::Enumerate:
      P.entries = prob_matrix_from_law(spec.n, enumerate(spec, options.enumeration));
      P.provenance = Provenance::Enumerated;
      return P;
    case ProbMethod::MonteCarlo:
      return monte_carlo(spec, options);
    case ProbMethod::Auto:
      break;
  }
  if (spec.kind == SamplingKind::Graph || spec.kind == SamplingKind::Explicit) {
    P.entries = prob_matrix_from_law(spec.n, enumerate(spec, options.enumeration));
    P.provenance = Provenance::Enumerated;
    return P;
  }
  P.entries = InclusionProbabilities(spec).full();
  P.provenance = Provenance::ClosedForm;
  return P;
}

ProbMatrix combine_convex(const std::vector<std::pair<double, ProbMatrix>>& terms) {
  if (terms.empty()) throw ValidationError("terms", "empty convex combination");
  ProbMatrix out;
  out.entries = Eigen::MatrixXd::Zero(terms.front().second.n(), terms.front().second.n());
  out.provenance = Provenance::ClosedForm;
  double total = 0.0;
  bool has_error = false;
  for (const auto& [w, P] : terms) {
    require_same_size(terms.front().second, P, "combine_convex");
    if (!(w >= 0.0)) throw ValidationError("weights", "weights must be nonnegative");
    total += w;
    out.entries += w * P.entries;
    out.provenance = worst(out.provenance, P.provenance);
    has_error = has_error || P.standard_error.size() != 0;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ValidationError("weights", "weights must sum to 1");
  if (has_error) {
    // Independent estimates: variances add with squared weights.
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(out.n(), out.n());
    for (const auto& [w, P] : terms) {
      if (P.standard_error.size() != 0) var += (w * w) * P.standard_error.cwiseAbs2();
      out.samples = std::max(out.samples, P.samples);
    }
    out.standard_error = var.cwiseSqrt();
  }
  return out;
}

ProbMatrix intersect(const ProbMatrix& a, const ProbMatrix& b) {
  require_same_size(a, b, "intersect");
  ProbMatrix out;
  out.entries = a.entries.cwiseProduct(b.entries);
  out.provenance = worst(a.provenance, b.provenance);
  if (a.standard_error.size() != 0 || b.standard_error.size() != 0) {
    // First-order propagation of the entrywise product.
    Eigen::MatrixXd var = Eigen::MatrixXd::Zero(a.n(), a.n());
    if (a.standard_error.size() != 0) var += (a.standard_error.cwiseProduct(b.entries)).cwiseAbs2();
    if (b.standard_error.size() != 0) var += (b.standard_error.cwiseProduct(a.entries)).cwiseAbs2();
    out.standard_error = var.cwiseSqrt();
    out.samples = std::max(a.samples, b.samples);
  }
  return out;
}

ProbMatrix restrict(const ProbMatrix& P, const IndexSet& J) {
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(P.n());
  for (int i : J) {
    if (i < 0 || i >= P.n()) {
      throw ValidationError("J", "index " + std::to_string(i) + " outside [0, " +
                                     std::to_string(P.n()) + ")");
    }
    mask(i) = 1.0;
  }
  ProbMatrix out = P;
  out.entries = mask.asDiagonal() * P.entries * mask.asDiagonal();
  if (P.standard_error.size() != 0) {
    out.standard_error = mask.asDiagonal() * P.standard_error * mask.asDiagonal();
  }
  return out;
}

ProbMatrixCheck check_prob_matrix(const Eigen::MatrixXd& P, double tolerance) {
  ProbMatrixCheck check;
  const auto n = P.rows();
  if (P.cols() != n) throw DimensionError("probability matrix must be square");
  check.symmetric = (P - P.transpose()).cwiseAbs().maxCoeff() <= tolerance;
  for (Eigen::Index i = 0; i < n && check.in_range; ++i) {
    if (P(i, i) < -tolerance || P(i, i) > 1.0 + tolerance) check.in_range = false;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (P(i, j) < -tolerance || P(i, j) > std::min(P(i, i), P(j, j)) + tolerance) {
        check.in_range = false;
        break;
      }
    }
  }
  if (n > 0) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (P + P.transpose()),
                                                          Eigen::EigenvaluesOnly);
    check.min_eigenvalue = solver.eigenvalues()(0);
  }
  check.psd = check.min_eigenvalue >= -tolerance;
  return check;
}

double IdentityReport::max_discrepancy() const {
  double worst_gap = 0.0;
  for (const auto& c : checks) worst_gap = std::max(worst_gap, c.discrepancy);
  return worst_gap;
}

IdentityReport check_identities(const SamplingSpec& spec, const Eigen::MatrixXd& M,
                                const Eigen::VectorXd& h, std::size_t trials, std::uint64_t seed,
                                const EnumerationOptions& enumeration) {
  validate(spec);
  const int n = spec.n;
  if (M.rows() != n || M.cols() != n || h.size() != n) {
    throw DimensionError("check_identities: M must be n x n and h of length n");
  }
  const Eigen::MatrixXd P = prob_matrix(spec).entries;

  IdentityReport report;
  report.exhaustive = is_enumerable(spec, enumeration);
  Distribution law;
  if (report.exhaustive) {
    law = enumerate(spec, enumeration);
  } else {
    if (trials < 1000) throw ValidationError("trials", "Monte-Carlo identity check needs >= 1000 trials");
    report.trials = trials;
    const double w = 1.0 / static_cast<double>(trials);
    for (std::size_t k = 0; k < trials; ++k) law.push_back({draw(spec, seed, k), w});
  }

  // Right-hand sides: expectations over the law.
  Eigen::MatrixXd masked_M = Eigen::MatrixXd::Zero(n, n);
  double quad_masked = 0.0, square_sum = 0.0, linear_sum = 0.0, card_sq = 0.0, card = 0.0;
  for (const auto& [s, p] : law) {
    double sum_h = 0.0, quad = 0.0;
    for (int i : s) {
      sum_h += h(i);
      for (int j : s) {
        masked_M(i, j) += p * M(i, j);
        quad += h(i) * M(i, j) * h(j);
      }
    }
    const double size = static_cast<double>(s.size());
    quad_masked += p * quad;
    square_sum += p * sum_h * sum_h;
    linear_sum += p * sum_h;
    card_sq += p * size * size;
    card += p * size;
  }

  const Eigen::MatrixXd PM = P.cwiseProduct(M);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  auto scalar = [](std::string name, double lhs, double rhs) {
    return IdentityCheck{std::move(name), lhs, rhs, std::abs(lhs - rhs)};
  };
  report.checks.push_back({"P o M = E[M_[S]]", PM.norm(), masked_M.norm(),
                           (PM - masked_M).cwiseAbs().maxCoeff()});
  report.checks.push_back(scalar("h'(P o M)h = E[h_[S]' M h_[S]]", h.dot(PM * h), quad_masked));
  report.checks.push_back(scalar("h'Ph = E[(sum_{i in S} h_i)^2]", h.dot(P * h), square_sum));
  report.checks.push_back(scalar("sum_i P_ii h_i = E[sum_{i in S} h_i]", P.diagonal().dot(h), linear_sum));
  report.checks.push_back(scalar("e'Pe = E[|S|^2]", ones.dot(P * ones), card_sq));
  report.checks.push_back(scalar("Tr(P) = E[|S|]", P.trace(), card));
  return report;
}

}  // namespace esokit
