#include <doctest.h>

#include <cmath>

#include "esokit/error.hpp"
#include "esokit/fixtures.hpp"
#include "esokit/prob_matrix.hpp"
#include "esokit/rng.hpp"
#include "esokit/spectral.hpp"
#include "oracles.hpp"

using namespace esokit;

TEST_CASE("lambda_max: examples") {
  CHECK(lambda_max(Eigen::MatrixXd::Identity(4, 4)).value == doctest::Approx(1.0));
  const auto P = prob_matrix(SamplingSpec::tau_nice(3, 2)).entries;
  const auto e = lambda_max(P);
  CHECK(e.value == doctest::Approx(4.0 / 3).epsilon(1e-14));
  CHECK(e.residual <= 1e-12);
  CHECK(lambda_max(Eigen::MatrixXd::Ones(5, 5)).value == doctest::Approx(5.0));
  CHECK(lambda_max(Eigen::MatrixXd::Zero(0, 0)).value == 0.0);
}

TEST_CASE("lambda_max: input checks") {
  Eigen::MatrixXd A(2, 2);
  A << 1, 2, 0, 1;
  CHECK_THROWS_AS(lambda_max(A), ValidationError);
  A << 1, std::nan(""), std::nan(""), 1;
  CHECK_THROWS_AS(lambda_max(A), NumericalError);
  A << 1, 0, 0, -1;
  CHECK_THROWS_AS(lambda_max(A), ValidationError);
  CHECK_THROWS_AS(lambda_max(Eigen::MatrixXd::Ones(2, 3)), DimensionError);
}

TEST_CASE("lambda_prime: examples") {
  const Eigen::Vector3d x(1, 0, -2);
  CHECK(lambda_prime(x * x.transpose()).value == doctest::Approx(2.0));
  CHECK(lambda_prime(x * x.transpose()).support_restricted);
  CHECK(lambda_prime(prob_matrix(SamplingSpec::tau_nice(3, 2)).entries).value == doctest::Approx(2.0));
  Eigen::MatrixXd M(3, 3);
  M << 1, 1, 0, 1, 5, 0, 0, 0, 0;
  CHECK(lambda_prime(M).value == doctest::Approx(1.0 + 1.0 / std::sqrt(5.0)).epsilon(1e-13));
  CHECK(lambda_prime(Eigen::MatrixXd::Zero(3, 3)).value == 0.0);
  M << 0, 1, 0, 1, 5, 0, 0, 0, 0;
  CHECK_THROWS_AS(lambda_prime(M), ValidationError);
}

TEST_CASE("dense solver agrees with the Jacobi oracle") {
  Rng rng(31, 0);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + static_cast<int>(rng.below(15));
    const Eigen::MatrixXd M = fixtures::random_psd(n, 1 + static_cast<int>(rng.below(n)), rng);
    CHECK(std::abs(lambda_max(M).value - oracle::lambda_max(M)) <= 1e-10 * std::max(1.0, oracle::lambda_max(M)));
    CHECK(std::abs(lambda_prime(M).value - oracle::lambda_prime(M)) <= 1e-10 * n);
    CHECK(lambda_max(M).residual <= 1e-8);
  }
}

TEST_CASE("lambda_prime of a nonzero PSD matrix lies in [1, support size]") {
  Rng rng(32, 0);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + static_cast<int>(rng.below(12));
    const Eigen::MatrixXd M = fixtures::random_psd(n, 1 + static_cast<int>(rng.below(n)), rng);
    const double v = lambda_prime(M).value;
    CHECK(v >= 1.0 - 1e-10);
    CHECK(v <= n + 1e-10);
  }
}

TEST_CASE("power method: safeguarded estimate and residual") {
  const auto P = prob_matrix(SamplingSpec::tau_nice(6, 3)).entries;
  const auto e = lambda_max(P, EigenMethod::PowerMethod);
  CHECK(e.method == EigenMethod::PowerMethod);
  CHECK(e.power.iterations == 10);
  // all-ones is the top eigenvector here, so the estimate is exactly 1.01 * lambda
  CHECK(e.value == doctest::Approx(1.01 * lambda_max(P).value).epsilon(1e-13));
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(2, 2);
  N << 1, -1, -1, 1;  // all-ones start lies in the null space
  CHECK(lambda_max(N, EigenMethod::PowerMethod).value >= 2.0 - 1e-9);
  PowerOptions bad;
  bad.iterations = 0;
  CHECK_THROWS_AS(lambda_max(N, EigenMethod::PowerMethod, bad), ValidationError);
}

TEST_CASE("bounds: examples") {
  const auto b = lambda_bounds(SamplingSpec::tau_nice(4, 2));
  CHECK(*b.lambda_prime_lower == doctest::Approx(2.0));
  CHECK(b.lambda_prime_upper == doctest::Approx(2.0));
  CHECK(b.uniform_sharpening);
  CHECK(b.lambda_upper == doctest::Approx(1.0));
  CHECK(lambda_max(prob_matrix(SamplingSpec::tau_nice(4, 2)).entries).value == doctest::Approx(1.0));
  CHECK(*lambda_bounds(SamplingSpec::doubly_uniform({0, 0.5, 0, 0.5})).lambda_prime_lower == doctest::Approx(2.5));
  const auto full = SamplingSpec::elementary(5, {0, 1, 2, 3, 4});
  CHECK(lambda_bounds(full).lambda_upper == doctest::Approx(5.0));
  CHECK(lambda_max(prob_matrix(full).entries).value == doctest::Approx(5.0));
  const auto nil = lambda_bounds(SamplingSpec::tau_nice(3, 0));
  CHECK_FALSE(nil.lambda_prime_lower.has_value());
  CHECK_FALSE(nil.notes.empty());
}

TEST_CASE("bounds sandwich exact eigenvalues on random specs") {
  Rng rng(33, 3);
  for (int k = 0; k < 150; ++k) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const auto spec = fixtures::random_spec(n, rng, 1);
    const auto P = oracle::prob_matrix(spec);
    const auto b = lambda_bounds(spec);
    const double lp = oracle::lambda_prime(P), l = oracle::lambda_max(P);
    if (b.lambda_prime_lower) CHECK(*b.lambda_prime_lower <= lp + 1e-9);
    if (!is_nil(spec)) CHECK(lp <= b.lambda_prime_upper + 1e-9);
    CHECK(b.lambda_lower <= l + 1e-9);
    CHECK(l <= b.lambda_upper + 1e-9);
  }
}

TEST_CASE("uniform link lambda' = n / E|S| lambda") {
  for (const auto& s : {SamplingSpec::tau_nice(6, 2), SamplingSpec::doubly_uniform({0.2, 0.1, 0.3, 0.4}),
                        SamplingSpec::ctau_distributed({{0, 1}, {2, 3}, {4, 5}}, 1)}) {
    const auto P = prob_matrix(s).entries;
    CHECK(std::abs(lambda_prime(P).value - s.n / cardinality_moments(s).mean * lambda_max(P).value) <= 1e-10);
  }
}

TEST_CASE("restricted: tau-nice formula equals exact") {
  for (int n = 1; n <= 6; ++n) {
    for (int tau = 1; tau <= n; ++tau) {
      const RestrictedEigenvalues R(SamplingSpec::tau_nice(n, tau));
      for (oracle::Mask m = 1; m < (1u << n); ++m) {
        const auto J = oracle::set_of(m, n);
        const double formula = R.evaluate(J, RestrictedMethod::Formula).value;
        CHECK(std::abs(R.evaluate(J, RestrictedMethod::Exact).value - formula) <= 1e-8 * formula);
        // the lower bound E|J n S|^2 / E|J n S| coincides
        const auto l = oracle::law(SamplingSpec::restriction(SamplingSpec::tau_nice(n, tau), J));
        const auto [m1, m2] = oracle::moments(l);
        CHECK(std::abs(m2 / m1 - formula) <= 1e-12 * formula);
      }
    }
  }
}

TEST_CASE("restricted: spec examples") {
  const auto t = lambda_prime_restricted(SamplingSpec::tau_nice(4, 2), {0, 1, 2}, RestrictedMethod::Formula);
  CHECK(t.value == doctest::Approx(5.0 / 3));
  CHECK(lambda_prime_restricted(SamplingSpec::tau_nice(4, 2), {0, 1, 2}, RestrictedMethod::Exact).value ==
        doctest::Approx(5.0 / 3));

  const auto ctau = SamplingSpec::ctau_distributed({{0, 1}, {2, 3}}, 1);
  const auto cb = lambda_prime_restricted(ctau, {0, 2}, RestrictedMethod::Bound);
  CHECK(cb.value == doctest::Approx(1.5));
  CHECK(cb.bound_source == "ctau_distributed");
  CHECK(lambda_prime_restricted(ctau, {0, 2}, RestrictedMethod::Exact).value == doctest::Approx(1.5));

  const auto du = SamplingSpec::doubly_uniform({0, 0.5, 0, 0.5});
  const auto db = lambda_prime_restricted(du, {0, 1}, RestrictedMethod::Bound);
  CHECK(db.value == doctest::Approx(1.75));
  CHECK(db.bound_source == "doubly_uniform");
  CHECK(lambda_prime_restricted(du, {0, 1}, RestrictedMethod::Exact).value == doctest::Approx(1.75));
  CHECK(db.candidates.size() == 2);

  CHECK_THROWS_AS(lambda_prime_restricted(du, {0, 1}, RestrictedMethod::Formula), UnsupportedError);
  CHECK_THROWS_AS(lambda_prime_restricted(du, {}, RestrictedMethod::Exact), ValidationError);
}

TEST_CASE("restricted: graph sampling on a row support is at most 1") {
  Rng rng(34, 0);
  for (int k = 0; k < 10; ++k) {
    const auto A = fixtures::random_sparse(10, 8, 0.25, rng);
    const auto spec = fixtures::random_graph_sampling(A, rng);
    const RestrictedEigenvalues R(spec);
    for (const auto& J : A.row_supports()) CHECK(R.evaluate(J, RestrictedMethod::Exact).value <= 1.0 + 1e-12);
  }
}

TEST_CASE("restricted: every bound dominates the exact value") {
  Rng rng(35, 0);
  for (int k = 0; k < 150; ++k) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const auto spec = fixtures::random_proper_spec(n, rng);
    const RestrictedEigenvalues R(spec);
    IndexSet J;
    for (int i = 0; i < n; ++i) {
      if (rng.uniform() < 0.6) J.push_back(i);
    }
    if (J.empty()) J.push_back(0);
    const double exact_value = R.evaluate(J, RestrictedMethod::Exact).value;
    const auto bound = R.evaluate(J, RestrictedMethod::Bound);
    for (const auto& [name, value] : bound.candidates) CHECK(exact_value <= value + 1e-9);
  }
}
