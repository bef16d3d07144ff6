#include <doctest.h>

#include <cmath>

#include "esokit/eso.hpp"
#include "esokit/error.hpp"
#include "esokit/fixtures.hpp"
#include "esokit/rng.hpp"
#include "oracles.hpp"

using namespace esokit;

namespace {

DataMatrix small_A() {
  Eigen::MatrixXd A(2, 3);
  A << 1, 1, 0, 0, 2, 0;
  return DataMatrix::from_dense(A);
}

double max_abs(const Eigen::VectorXd& x) { return x.size() ? x.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("uncoupled: spec examples") {
  const auto r = eso_uncoupled(small_A(), SamplingSpec::tau_nice(3, 2));
  const double f = 1.0 + 1.0 / std::sqrt(5.0);
  CHECK(r.v(0) == doctest::Approx(f).epsilon(1e-12));
  CHECK(r.v(1) == doctest::Approx(5.0 * f).epsilon(1e-12));
  CHECK(r.v(2) == kVFloor);
  CHECK(r.v(0) == doctest::Approx(1.4472).epsilon(1e-4));
  CHECK(r.v(1) == doctest::Approx(7.2361).epsilon(1e-4));

  const auto I = DataMatrix::from_dense(Eigen::MatrixXd::Identity(3, 3));
  CHECK(max_abs(eso_uncoupled(I, SamplingSpec::uniform_serial(3)).v - Eigen::VectorXd::Ones(3)) <= 1e-12);

  const auto e = DataMatrix::from_dense(Eigen::MatrixXd::Ones(1, 4));
  CHECK(max_abs(eso_uncoupled(e, SamplingSpec::tau_nice(4, 2)).v - Eigen::VectorXd::Constant(4, 2.0)) <= 1e-12);
}

TEST_CASE("uncoupled: above the dense cap falls back to bounds") {
  EsoOptions o;
  o.dense_cap = 2;
  const auto r = eso_uncoupled(small_A(), SamplingSpec::tau_nice(3, 2), o);
  CHECK(r.v(1) == doctest::Approx(2.0 * 5.0));
  CHECK(r.notes.size() == 2);
  o.data_lambda_prime = 1.1;
  CHECK(eso_uncoupled(small_A(), SamplingSpec::tau_nice(3, 2), o).v(0) == doctest::Approx(1.1));
}

TEST_CASE("coupled: spec example, every method") {
  for (auto m : {RestrictedMethod::Exact, RestrictedMethod::Formula, RestrictedMethod::Bound}) {
    const auto r = eso_coupled(small_A(), SamplingSpec::tau_nice(3, 2), m);
    CHECK(r.v(0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(r.v(1) == doctest::Approx(5.5).epsilon(1e-12));
    CHECK(r.v(2) == kVFloor);
    CHECK(r.row_multipliers.size() == 2);
    CHECK(r.row_multipliers[1] == doctest::Approx(1.0));
  }
}

TEST_CASE("coupled: serial sampling gives v = w") {
  Rng rng(41, 0);
  for (int k = 0; k < 20; ++k) {
    const auto A = fixtures::random_sparse(9, 7, 0.3, rng);
    std::vector<double> q(7);
    double total = 0.0;
    for (auto& x : q) total += (x = 0.1 + rng.uniform());
    for (auto& x : q) x /= total;
    for (const auto& spec : {SamplingSpec::serial(q), SamplingSpec::uniform_serial(7)}) {
      const auto r = eso_coupled(A, spec, RestrictedMethod::Exact);
      CHECK(max_abs(r.v - A.column_sq_norms()) <= 1e-12);
      CHECK(max_abs(eso_formula(A, spec, FormulaId::Serial).v - A.column_sq_norms()) == 0.0);
    }
  }
}

TEST_CASE("coupled: diagonal A gives v_i = A_ii^2") {
  const Eigen::Vector4d d(1, -2, 0.5, 3);
  const auto A = DataMatrix::from_dense(Eigen::MatrixXd(d.asDiagonal()));
  Rng rng(42, 0);
  for (int k = 0; k < 20; ++k) {
    const auto spec = fixtures::random_proper_spec(4, rng);
    CHECK(max_abs(eso_coupled(A, spec, RestrictedMethod::Exact).v - d.cwiseAbs2()) <= 1e-12);
  }
}

TEST_CASE("specialized: spec examples") {
  const auto iii = eso_specialized(small_A(), SamplingSpec::tau_nice(3, 2));
  CHECK(iii.formula == FormulaId::TauNice);
  CHECK(max_abs(iii.v - eso_coupled(small_A(), SamplingSpec::tau_nice(3, 2), RestrictedMethod::Formula).v) == 0.0);

  Eigen::MatrixXd G(2, 3);
  G << 1, 1, 0, 0, 1, 1;
  const auto A = DataMatrix::from_dense(G);
  const auto graph = SamplingSpec::graph(3, {{0, 1}, {1, 2}}, {{{0, 2}, 0.5}, {{1}, 0.5}});
  const auto v = eso_specialized(A, graph);
  CHECK(v.formula == FormulaId::Graph);
  CHECK(max_abs(v.v - Eigen::Vector3d(1, 2, 1)) == 0.0);
  CHECK(certify(A, graph, v.v).margin >= -1e-8);
  // a member violating the data's conflict graph is refused
  const auto bad = SamplingSpec::graph(3, {}, {{{0, 1}, 0.5}, {{2}, 0.5}});
  CHECK_THROWS_AS(eso_formula(A, bad, FormulaId::Graph), UnsupportedError);

  Rng rng(43, 0);
  const auto R = fixtures::random_sparse(8, 6, 0.3, rng);
  const auto t1 = eso_formula(R, SamplingSpec::tau_nice(6, 1), FormulaId::GenericTau).v;
  CHECK(max_abs(t1 - eso_formula(R, SamplingSpec::uniform_serial(6), FormulaId::Serial).v) == 0.0);

  Eigen::MatrixXd C(2, 4);
  C << 1, 2, 0, 0, 0, 0, 3, 0;
  const auto cons = eso_formula(DataMatrix::from_dense(C), SamplingSpec::tau_nice(4, 3), FormulaId::Conservative);
  CHECK(max_abs(cons.v - Eigen::Vector4d(2, 8, 18, kVFloor)) <= 1e-15);
}

TEST_CASE("specialized: refusals and fallbacks") {
  const auto A = small_A();
  CHECK_THROWS_AS(eso_formula(A, SamplingSpec::uniform_serial(3), FormulaId::TauNice), UnsupportedError);
  CHECK_THROWS_AS(eso_formula(A, SamplingSpec::tau_nice(3, 2), FormulaId::Serial), UnsupportedError);
  CHECK_THROWS_AS(eso_formula(A, SamplingSpec::tau_nice(3, 2), FormulaId::CTauDistributed), UnsupportedError);
  CHECK_THROWS_AS(eso_formula(A, SamplingSpec::tau_nice(3, 2), FormulaId::CoupledExact), UnsupportedError);
  const auto prod = eso_specialized(A, SamplingSpec::product({{0, 1}, {2}}));
  CHECK(prod.formula == FormulaId::GenericTau);
  CHECK_FALSE(prod.notes.empty());
  CHECK_THROWS_AS(eso_uncoupled(A, SamplingSpec::elementary(3, {0})), ValidationError);
  CHECK_THROWS_AS(eso_uncoupled(A, SamplingSpec::tau_nice(4, 2)), DimensionError);
}

TEST_CASE("formula names round-trip") {
  for (auto id : {FormulaId::Uncoupled, FormulaId::CoupledExact, FormulaId::CoupledBound, FormulaId::CoupledFormula,
                  FormulaId::CoupledPower, FormulaId::GenericTau, FormulaId::CTauDistributed, FormulaId::TauNice,
                  FormulaId::DoublyUniform, FormulaId::Graph, FormulaId::Serial, FormulaId::Conservative}) {
    CHECK(formula_from_string(to_string(id)) == id);
  }
  CHECK_THROWS_AS(formula_from_string("nope"), ValidationError);
}

TEST_CASE("certify: spec examples") {
  const auto A = small_A();
  const auto spec = SamplingSpec::tau_nice(3, 2);
  CHECK(certify(A, spec, Eigen::VectorXd::Zero(3)).margin < 0.0);
  const auto Z = DataMatrix::from_triplets(2, 3, {});
  CHECK(certify(Z, spec, Eigen::VectorXd::Constant(3, kVFloor)).margin > 0.0);
  const auto I = DataMatrix::from_dense(Eigen::MatrixXd::Identity(5, 5));
  CHECK(std::abs(certify(I, SamplingSpec::uniform_serial(5), Eigen::VectorXd::Ones(5)).margin) <= 1e-12);
  const auto c = certify(A, spec, eso_coupled(A, spec, RestrictedMethod::Exact).v);
  CHECK(c.margin >= -1e-8);
  CHECK(std::abs(c.witness.norm() - 1.0) <= 1e-12);
  CHECK(std::abs(c.witness_gap - c.margin) <= 1e-12);
}

TEST_CASE("certify: refuses Monte-Carlo P and oversize n") {
  ProbMatrixOptions o;
  o.method = ProbMethod::MonteCarlo;
  o.samples = 1000;
  const auto spec = SamplingSpec::tau_nice(3, 2);
  CHECK_THROWS_AS(certify(small_A(), prob_matrix(spec, o), Eigen::VectorXd::Ones(3)), UnsupportedError);
  CHECK_THROWS_AS(certify(small_A(), spec, Eigen::VectorXd::Ones(3), 2), CapacityError);
  CHECK_THROWS_AS(certify(small_A(), spec, Eigen::VectorXd::Ones(4)), DimensionError);
}

TEST_CASE("certificate holds for every formula on random fixtures") {
  Rng rng(44, 0);
  for (int k = 0; k < 30; ++k) {
    const int n = 2 + static_cast<int>(rng.below(6));
    const auto A = fixtures::random_sparse(3 + static_cast<int>(rng.below(6)), n, 0.4, rng);
    const auto spec = fixtures::random_proper_spec(n, rng);
    const auto P = prob_matrix(spec);
    for (auto f : {FormulaId::Uncoupled, FormulaId::CoupledExact, FormulaId::CoupledBound, FormulaId::CoupledPower,
                   FormulaId::GenericTau, FormulaId::Conservative}) {
      const auto r = compute_eso(A, spec, f);
      CHECK((r.v.array() > 0).all());
      CHECK(max_abs(r.p - P.entries.diagonal()) <= 1e-12);
      CHECK(certify(A, P, r.v).margin >= -1e-8);
    }
    const auto s = eso_specialized(A, spec);
    CHECK(certify(A, P, s.v).margin >= -1e-8);
  }
}

TEST_CASE("dominance chain: exact <= bound <= generic <= conservative") {
  Rng rng(45, 0);
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const auto A = fixtures::random_sparse(2 + static_cast<int>(rng.below(8)), n, 0.35, rng);
    const auto spec = fixtures::random_proper_spec(n, rng);
    const auto exact = eso_coupled(A, spec, RestrictedMethod::Exact).v;
    const auto bound = eso_coupled(A, spec, RestrictedMethod::Bound).v;
    const auto generic = eso_formula(A, spec, FormulaId::GenericTau).v;
    const auto cons = eso_formula(A, spec, FormulaId::Conservative).v;
    CHECK(((exact - bound).array() <= 1e-10).all());
    CHECK(((bound - generic).array() <= 1e-10).all());
    CHECK(((generic - cons).array() <= 1e-10).all());
  }
}

TEST_CASE("coupled exact matches the oracle restricted eigenvalue") {
  Rng rng(46, 0);
  for (int k = 0; k < 20; ++k) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const auto A = fixtures::random_sparse(4, n, 0.4, rng);
    const auto spec = fixtures::random_proper_spec(n, rng);
    const auto r = eso_coupled(A, spec, RestrictedMethod::Exact);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < A.rows(); ++j) {
      const double lp = oracle::lambda_prime(oracle::prob_matrix(SamplingSpec::restriction(spec, A.row_supports()[j])));
      for (const auto& e : A.row(j)) v(e.index) += lp * e.value * e.value;
    }
    for (int i = 0; i < n; ++i) {
      if (A.column_sq_norms()(i) == 0.0) v(i) = kVFloor;
    }
    CHECK(max_abs(r.v - v) <= 1e-9 * std::max(1.0, max_abs(v)));
  }
}

TEST_CASE("scaling A by 2 multiplies v by 4") {
  Rng rng(47, 0);
  const auto A = fixtures::random_sparse(7, 5, 0.4, rng);
  const auto spec = SamplingSpec::tau_nice(5, 3);
  for (auto f : {FormulaId::Uncoupled, FormulaId::CoupledExact, FormulaId::CoupledFormula, FormulaId::GenericTau,
                 FormulaId::TauNice, FormulaId::DoublyUniform, FormulaId::Conservative}) {
    const auto v1 = compute_eso(A, spec, f).v;
    const auto v2 = compute_eso(A.scaled(2.0), spec, f).v;
    CHECK(max_abs(v2 - 4.0 * v1) <= 1e-12 * max_abs(v1));
  }
}

TEST_CASE("case (iv) with a point mass equals case (iii)") {
  Rng rng(48, 0);
  for (int tau = 1; tau <= 6; ++tau) {
    const auto A = fixtures::random_sparse(8, 6, 0.4, rng);
    std::vector<double> q(7, 0.0);
    q[tau] = 1.0;
    const auto a = eso_formula(A, SamplingSpec::doubly_uniform(q), FormulaId::DoublyUniform).v;
    const auto b = eso_formula(A, SamplingSpec::tau_nice(6, tau), FormulaId::TauNice).v;
    CHECK(max_abs(a - b) <= 1e-12 * max_abs(b));
  }
}

TEST_CASE("case (iii) equals coupled formula bit for bit") {
  Rng rng(49, 0);
  for (int k = 0; k < 20; ++k) {
    const int n = 2 + static_cast<int>(rng.below(30));
    const auto A = fixtures::random_sparse(10, n, 0.2, rng);
    const auto spec = SamplingSpec::tau_nice(n, 1 + static_cast<int>(rng.below(n)));
    CHECK(max_abs(eso_formula(A, spec, FormulaId::TauNice).v -
                  eso_coupled(A, spec, RestrictedMethod::Formula).v) == 0.0);
  }
}

TEST_CASE("assemble_from_pieces: spec examples") {
  const auto ps = assemble_from_pieces(ComposedFunction::partially_separable(3, {{0, 1}, {1}}, {1.0, 3.0}));
  CHECK((ps.dense() - Eigen::Vector3d(1, 2, 0).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() <= 1e-15);

  const auto sm = assemble_from_pieces(ComposedFunction::single_map(4.0, Eigen::MatrixXd::Identity(3, 3)));
  CHECK((sm.dense() - 2.0 * Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() == 0.0);

  const auto rw = assemble_from_pieces(ComposedFunction::rowwise({1.0, 4.0}, Eigen::MatrixXd::Identity(2, 2)));
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 0, 0, 2;
  CHECK((rw.dense() - expected).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(assemble_from_pieces(ComposedFunction::general(3, {{1.0, Eigen::MatrixXd::Ones(2, 2)}})),
                  DimensionError);
  CHECK_THROWS_AS(assemble_from_pieces(ComposedFunction::general(2, {{-1.0, Eigen::MatrixXd::Ones(2, 2)}})),
                  ValidationError);
}

TEST_CASE("assemble_from_pieces: Gram matrix matches the sum of pieces") {
  Rng rng(50, 0);
  for (int k = 0; k < 20; ++k) {
    const int n = 1 + static_cast<int>(rng.below(6));
    std::vector<FunctionPiece> pieces;
    for (int j = 0; j < 3; ++j) {
      Eigen::MatrixXd M(1 + static_cast<int>(rng.below(3)), n);
      for (Eigen::Index a = 0; a < M.size(); ++a) M.data()[a] = rng.normal();
      pieces.push_back({0.1 + rng.uniform(), M});
    }
    const auto f = ComposedFunction::general(n, pieces);
    CHECK((assemble_from_pieces(f).gram() - f.gram()).cwiseAbs().maxCoeff() <= 1e-12);

    std::vector<IndexSet> supports;
    std::vector<double> gammas;
    for (int j = 0; j < 4; ++j) {
      IndexSet C;
      for (int i = 0; i < n; ++i) {
        if (rng.uniform() < 0.5) C.push_back(i);
      }
      supports.push_back(C);
      gammas.push_back(0.5 + rng.uniform());
    }
    const auto ps = ComposedFunction::partially_separable(n, supports, gammas);
    CHECK((assemble_from_pieces(ps).gram() - ps.gram()).cwiseAbs().maxCoeff() <= 1e-12);
  }
}
