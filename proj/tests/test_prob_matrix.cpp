#include <doctest.h>

#include "esokit/error.hpp"
#include "esokit/fixtures.hpp"
#include "esokit/prob_matrix.hpp"
#include "esokit/rng.hpp"
#include "oracles.hpp"

using namespace esokit;

namespace {

double max_abs(const Eigen::MatrixXd& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

ProbMatrix exact(const SamplingSpec& s) {
  ProbMatrixOptions o;
  o.method = ProbMethod::Enumerate;
  return prob_matrix(s, o);
}

}  // namespace

TEST_CASE("closed form: tau-nice n=3 tau=2") {
  ProbMatrixOptions o;
  o.method = ProbMethod::ClosedForm;
  const auto P = prob_matrix(SamplingSpec::tau_nice(3, 2), o);
  CHECK(P.provenance == Provenance::ClosedForm);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(P.entries(i, j) == doctest::Approx(i == j ? 2.0 / 3 : 1.0 / 3));
  }
}

TEST_CASE("closed form: (2,1)-distributed on 4") {
  const auto P = prob_matrix(SamplingSpec::ctau_distributed({{0, 1}, {2, 3}}, 1)).entries;
  CHECK(P(0, 0) == doctest::Approx(0.5));
  CHECK(P(0, 1) == doctest::Approx(0.0));
  CHECK(P(2, 3) == doctest::Approx(0.0));
  CHECK(P(0, 2) == doctest::Approx(0.25));
  CHECK(P(1, 3) == doctest::Approx(0.25));
}

TEST_CASE("closed form: doubly uniform n=3 q=(0,.5,0,.5)") {
  const auto P = prob_matrix(SamplingSpec::doubly_uniform({0, 0.5, 0, 0.5})).entries;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(P(i, j) == doctest::Approx(i == j ? 2.0 / 3 : 0.5));
  }
}

TEST_CASE("closed form: elementary is the rank-one indicator") {
  const auto P = prob_matrix(SamplingSpec::elementary(3, {0, 2})).entries;
  Eigen::MatrixXd expected(3, 3);
  expected << 1, 0, 1, 0, 0, 0, 1, 0, 1;
  CHECK(max_abs(P - expected) == 0.0);
}

TEST_CASE("closed form agrees with the oracle for every basic kind") {
  for (int n = 1; n <= 8; ++n) {
    for (int tau = 0; tau <= n; ++tau) {
      CHECK(max_abs(prob_matrix(SamplingSpec::tau_nice(n, tau)).entries - oracle::prob_matrix(SamplingSpec::tau_nice(n, tau))) <= 1e-12);
    }
  }
  Rng rng(12, 0);
  for (int k = 0; k < 300; ++k) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const auto spec = fixtures::random_spec(n, rng, 2);
    const auto P = prob_matrix(spec);
    CHECK(P.exact());
    CHECK(max_abs(P.entries - oracle::prob_matrix(spec)) <= 1e-12);
  }
}

TEST_CASE("closed form refused for derived kinds") {
  ProbMatrixOptions o;
  o.method = ProbMethod::ClosedForm;
  const auto mix = SamplingSpec::convex({0.5, 0.5}, {SamplingSpec::tau_nice(3, 1), SamplingSpec::tau_nice(3, 2)});
  CHECK_THROWS_AS(prob_matrix(mix, o), UnsupportedError);
  CHECK_THROWS_AS(prob_matrix(SamplingSpec::explicit_law(2, {{{0}, 1.0}}), o), UnsupportedError);
  CHECK(prob_matrix(mix).exact());
}

TEST_CASE("Monte-Carlo estimate is within a few standard errors and symmetric") {
  ProbMatrixOptions o;
  o.method = ProbMethod::MonteCarlo;
  o.samples = 40000;
  o.seed = 3;
  const auto spec = SamplingSpec::ctau_distributed({{0, 1, 2}, {3, 4, 5}}, 2);
  const auto P = prob_matrix(spec, o);
  CHECK(P.provenance == Provenance::MonteCarlo);
  CHECK(P.samples == 40000);
  CHECK(max_abs(P.entries - P.entries.transpose()) == 0.0);
  const Eigen::MatrixXd truth = oracle::prob_matrix(spec);
  CHECK(((P.entries - truth).cwiseAbs().array() <= 5.0 * P.standard_error.array() + 1e-12).all());
  CHECK(P.max_standard_error() < 0.01);
  // thread count does not change the estimate
  o.threads = 3;
  CHECK(max_abs(prob_matrix(spec, o).entries - P.entries) == 0.0);
}

TEST_CASE("combine_convex") {
  const auto P = exact(SamplingSpec::tau_nice(4, 2));
  CHECK(max_abs(combine_convex({{1.0, P}}).entries - P.entries) == 0.0);
  const auto du = combine_convex({{0.5, exact(SamplingSpec::tau_nice(3, 1))}, {0.5, exact(SamplingSpec::tau_nice(3, 3))}});
  CHECK(max_abs(du.entries - prob_matrix(SamplingSpec::doubly_uniform({0, 0.5, 0, 0.5})).entries) <= 1e-15);
  const auto two = combine_convex({{0.5, exact(SamplingSpec::elementary(2, {0}))}, {0.5, exact(SamplingSpec::elementary(2, {1}))}});
  CHECK(max_abs(two.entries - Eigen::MatrixXd(Eigen::Vector2d(0.5, 0.5).asDiagonal())) == 0.0);
  CHECK_THROWS_AS(combine_convex({{0.5, P}, {0.5, exact(SamplingSpec::tau_nice(3, 1))}}), DimensionError);
  ProbMatrixOptions mc;
  mc.method = ProbMethod::MonteCarlo;
  mc.samples = 1000;
  CHECK(combine_convex({{0.5, P}, {0.5, prob_matrix(SamplingSpec::tau_nice(4, 1), mc)}}).provenance == Provenance::MonteCarlo);
}

TEST_CASE("intersect") {
  const auto P = exact(SamplingSpec::tau_nice(3, 2));
  CHECK(max_abs(intersect(P, exact(SamplingSpec::elementary(3, {0, 1, 2}))).entries - P.entries) == 0.0);
  const auto H = intersect(P, exact(SamplingSpec::elementary(3, {0, 1}))).entries;
  Eigen::MatrixXd expected(3, 3);
  expected << 2.0 / 3, 1.0 / 3, 0, 1.0 / 3, 2.0 / 3, 0, 0, 0, 0;
  CHECK(max_abs(H - expected) <= 1e-15);
  const std::vector<double> q = {0.2, 0.3, 0.5}, r = {0.6, 0.1, 0.3};
  const auto D = intersect(exact(SamplingSpec::serial(q)), exact(SamplingSpec::serial(r))).entries;
  CHECK(max_abs(D - Eigen::MatrixXd(Eigen::Vector3d(0.12, 0.03, 0.15).asDiagonal())) <= 1e-15);
}

TEST_CASE("restrict") {
  const auto P = exact(SamplingSpec::tau_nice(4, 2));
  CHECK(max_abs(restrict(P, {0, 1, 2, 3}).entries - P.entries) == 0.0);
  const auto R = restrict(P, {0, 1, 2}).entries;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const double e = (i == 3 || j == 3) ? 0.0 : (i == j ? 0.5 : 1.0 / 6);
      CHECK(R(i, j) == doctest::Approx(e));
    }
  }
  CHECK(max_abs(restrict(P, {}).entries) == 0.0);
  CHECK_THROWS_AS(restrict(P, {0, 7}), ValidationError);
}

TEST_CASE("structural checks: symmetric, range, PSD") {
  Rng rng(5, 5);
  for (int k = 0; k < 100; ++k) {
    const auto spec = fixtures::random_spec(6, rng, 2);
    const auto c = check_prob_matrix(prob_matrix(spec).entries);
    CHECK(c.symmetric);
    CHECK(c.in_range);
    CHECK(c.psd);
    CHECK(c.min_eigenvalue >= -1e-10);
  }
  Eigen::MatrixXd bad(2, 2);
  bad << 0.5, 0.6, 0.6, 0.5;
  CHECK_FALSE(check_prob_matrix(bad).in_range);
  bad << 0.5, 0.1, 0.2, 0.5;
  CHECK_FALSE(check_prob_matrix(bad).symmetric);
}

TEST_CASE("uniform specs have constant diagonal E|S|/n") {
  for (const auto& s : {SamplingSpec::tau_nice(5, 3), SamplingSpec::doubly_uniform({0.1, 0.2, 0.3, 0.4}),
                        SamplingSpec::ctau_distributed({{0, 1, 2}, {3, 4, 5}}, 1)}) {
    const Eigen::VectorXd d = prob_matrix(s).entries.diagonal();
    CHECK(max_abs(d.array() - cardinality_moments(s).mean / s.n) <= 1e-15);
  }
}

TEST_CASE("identities: tau-nice n=3 tau=2") {
  Eigen::MatrixXd M = Eigen::MatrixXd::Ones(3, 3);
  const auto r = check_identities(SamplingSpec::tau_nice(3, 2), M, Eigen::VectorXd::Ones(3), 0, 0);
  CHECK(r.exhaustive);
  for (const auto& c : r.checks) {
    CHECK(c.discrepancy <= 1e-12);
    if (c.name == "Tr(P) = E[|S|]") CHECK(c.lhs == doctest::Approx(2.0));
    if (c.name == "e'Pe = E[|S|^2]") CHECK(c.lhs == doctest::Approx(4.0));
  }
  CHECK(r.checks.size() == 6);
}

TEST_CASE("identities: elementary sampling gives M_[S]") {
  Rng rng(1, 1);
  const Eigen::MatrixXd M = fixtures::random_symmetric(4, rng);
  const auto r = check_identities(SamplingSpec::elementary(4, {1, 3}), M, fixtures::random_unit(4, rng), 0, 0);
  CHECK(r.max_discrepancy() <= 1e-14);
}

TEST_CASE("identities: Monte-Carlo mode on a large sampling") {
  Rng rng(2, 2);
  const int n = 24;
  const Eigen::MatrixXd M = fixtures::random_symmetric(n, rng);
  const Eigen::VectorXd h = fixtures::random_unit(n, rng);
  const auto r = check_identities(SamplingSpec::tau_nice(n, 12), M, h, 20000, 4);
  CHECK_FALSE(r.exhaustive);
  CHECK(r.trials == 20000);
  CHECK(r.max_discrepancy() < 0.2);
  CHECK_THROWS_AS(check_identities(SamplingSpec::tau_nice(n, 12), M, h, 10, 4), ValidationError);
}
