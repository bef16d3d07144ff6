#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "esokit/sampling.hpp"

namespace esokit {

enum class Provenance { ClosedForm, Enumerated, MonteCarlo };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& name);

// P_ij = Prob({i, j} subset of S).
struct ProbMatrix {
  Eigen::MatrixXd entries;
  Provenance provenance = Provenance::ClosedForm;
  std::size_t samples = 0;         // Monte-Carlo only
  Eigen::MatrixXd standard_error;  // Monte-Carlo only, per entry

  int n() const { return static_cast<int>(entries.rows()); }
  bool exact() const { return provenance != Provenance::MonteCarlo; }
  double max_standard_error() const;
};

enum class ProbMethod { Auto, ClosedForm, Enumerate, MonteCarlo };

ProbMethod prob_method_from_string(const std::string& name);

struct ProbMatrixOptions {
  ProbMethod method = ProbMethod::Auto;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  int threads = 1;
  EnumerationOptions enumeration;
};

bool has_closed_form(SamplingKind kind);

// Auto resolves to the closed form for the basic kinds, to an exact
// composition (mixture / Hadamard / masking) for the derived kinds, and to a
// sum over the listed support for Graph and Explicit laws.
ProbMatrix prob_matrix(const SamplingSpec& spec, const ProbMatrixOptions& options = {});

// Sum of q_S * e_S e_S' over an exact law.
Eigen::MatrixXd prob_matrix_from_law(int n, const Distribution& law);

// sum_t w_t P_t.
ProbMatrix combine_convex(const std::vector<std::pair<double, ProbMatrix>>& terms);

// P1 o P2: the probability matrix of the intersection of two independent samplings.
ProbMatrix intersect(const ProbMatrix& a, const ProbMatrix& b);

// I_J P I_J: the probability matrix of J intersected with the sampling.
ProbMatrix restrict(const ProbMatrix& P, const IndexSet& J);

struct ProbMatrixCheck {
  bool symmetric = true;
  bool in_range = true;         // 0 <= P_ij <= min(P_ii, P_jj) <= 1
  double min_eigenvalue = 0.0;
  bool psd = true;
};

// Structural invariants; tolerance applies to symmetry, range and the PSD test.
ProbMatrixCheck check_prob_matrix(const Eigen::MatrixXd& P, double tolerance = 1e-10);

// The six expectation identities every probability matrix satisfies.
struct IdentityCheck {
  std::string name;
  double lhs = 0.0;   // matrix identity: Frobenius norm of the left side
  double rhs = 0.0;
  double discrepancy = 0.0;  // max absolute entrywise difference
};

struct IdentityReport {
  bool exhaustive = true;
  std::size_t trials = 0;
  std::vector<IdentityCheck> checks;
  double max_discrepancy() const;
};

// Exact mode when the spec is enumerable (expectations summed over the
// support), Monte-Carlo otherwise with `trials` draws.
IdentityReport check_identities(const SamplingSpec& spec, const Eigen::MatrixXd& M,
                                const Eigen::VectorXd& h, std::size_t trials, std::uint64_t seed,
                                const EnumerationOptions& enumeration = {});

}  // namespace esokit
