#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "esokit/sampling.hpp"

namespace esokit {

enum class EigenMethod { DenseExact, PowerMethod };

struct PowerOptions {
  int iterations = 10;
  double safeguard = 1.01;
};

struct EigenEstimate {
  double value = 0.0;
  EigenMethod method = EigenMethod::DenseExact;
  PowerOptions power;  // meaningful for PowerMethod
  // Dense: |Mx - value x| / |x| for the returned eigenpair.
  // Power: relative gap between the last two Rayleigh quotients.
  double residual = 0.0;
  // Which formula or proposition produced the value (restricted bounds).
  std::string bound_source;
  // (source, value) of every bound considered; the minimum is reported.
  std::vector<std::pair<std::string, double>> candidates;
  // lambda' only: the matrix had zero-diagonal rows and was evaluated on its support.
  bool support_restricted = false;
};

std::string to_string(EigenMethod m);

// lambda(M) = max { h'Mh : h'h <= 1 } for symmetric PSD M.
EigenEstimate lambda_max(const Eigen::MatrixXd& M, EigenMethod method = EigenMethod::DenseExact,
                         const PowerOptions& power = {});

// lambda'(M) = max { h'Mh : h' Diag(M) h <= 1 }: the top eigenvalue of
// D^{-1/2} M D^{-1/2} on the support {i : M_ii > 0}. Zero for the zero matrix.
EigenEstimate lambda_prime(const Eigen::MatrixXd& M, EigenMethod method = EigenMethod::DenseExact,
                           const PowerOptions& power = {});

// D^{-1/2} M D^{-1/2} restricted to the support of diag(M).
Eigen::MatrixXd normalized_on_support(const Eigen::MatrixXd& M);

// lambda_2 / lambda_1 of the normalized matrix (0 when it has fewer than two rows).
double normalized_gap_ratio(const Eigen::MatrixXd& M);

struct BoundsReport {
  std::optional<double> lambda_prime_lower;  // E|S|^2 / E|S|, undefined for nil samplings
  double lambda_prime_upper = 0.0;           // tau
  double lambda_lower = 0.0;                 // E|S|^2 / n
  double lambda_upper = 0.0;                 // E|S|, or E|S| tau / n for uniform samplings
  int tau = 0;
  bool uniform_sharpening = false;
  std::vector<std::string> notes;
};

BoundsReport lambda_bounds(const SamplingSpec& spec, std::optional<int> tau_cap = std::nullopt);

enum class RestrictedMethod { Exact, Formula, Bound, Power };

std::string to_string(RestrictedMethod m);
RestrictedMethod restricted_method_from_string(const std::string& name);

// lambda'(J n S) for many sets J against one sampling; the inclusion
// probabilities and the sampling moments are computed once.
class RestrictedEigenvalues {
 public:
  explicit RestrictedEigenvalues(const SamplingSpec& spec, PowerOptions power = {});

  EigenEstimate evaluate(const IndexSet& J, RestrictedMethod method) const;

  // Individual closed forms; nullopt when the spec kind does not carry it.
  std::optional<double> tau_nice_formula(std::size_t size_J) const;
  std::optional<double> ctau_bound(const IndexSet& J) const;
  std::optional<double> doubly_uniform_bound(std::size_t size_J) const;
  double generic_bound(std::size_t size_J) const;

  const SamplingSpec& spec() const { return spec_; }
  const InclusionProbabilities& inclusion() const { return probs_; }

 private:
  SamplingSpec spec_;
  PowerOptions power_;
  InclusionProbabilities probs_;
  CardinalityMoments moments_;
  int cap_ = 0;
  std::vector<int> block_of_;  // CTauDistributed
};

EigenEstimate lambda_prime_restricted(const SamplingSpec& spec, const IndexSet& J,
                                      RestrictedMethod method, const PowerOptions& power = {});

}  // namespace esokit
