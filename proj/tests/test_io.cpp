#include <doctest.h>

#include <sstream>

#include "esokit/data_matrix.hpp"
#include "esokit/error.hpp"
#include "esokit/fixtures.hpp"
#include "esokit/io.hpp"
#include "esokit/rng.hpp"

using namespace esokit;

namespace {

ParseError parse_error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    read_data_matrix(in, "A.mtx");
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("no ParseError for: " << text);
  return ParseError("", 0, 0, "");
}

}  // namespace

TEST_CASE("sampling JSON round-trips random specs") {
  Rng rng(80, 0);
  for (int k = 0; k < 300; ++k) {
    const int n = 1 + static_cast<int>(rng.below(8));
    const auto spec = fixtures::random_spec(n, rng, 2);
    const auto j = io::to_json(spec);
    CHECK(io::sampling_from_json(j) == spec);
    CHECK(io::sampling_from_json(io::parse_json(io::dump(j), "s.json")) == spec);
  }
  const auto A = fixtures::random_sparse(10, 8, 0.25, rng);
  const auto g = fixtures::random_graph_sampling(A, rng);
  CHECK(io::sampling_from_json(io::to_json(g)) == g);
}

TEST_CASE("sampling JSON: 1-based indices and inferred n") {
  const auto s = io::sampling_from_json(io::Json::parse(R"({"kind":"ctau_distributed","partition":[[1,2],[3,4]],"tau":1})"));
  CHECK(s == SamplingSpec::ctau_distributed({{0, 1}, {2, 3}}, 1));
  const auto t = io::sampling_from_json(io::Json::parse(R"({"kind":"tau_nice","n":5,"tau":2})"));
  CHECK(t == SamplingSpec::tau_nice(5, 2));
  CHECK(io::to_json(SamplingSpec::elementary(4, {0, 3}))["set"] == io::Json::parse("[1,4]"));
}

TEST_CASE("sampling JSON: errors name the field") {
  auto field_of = [](const std::string& text) {
    try {
      io::sampling_from_json(io::Json::parse(text));
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(R"({"kind":"tau_nice","n":3,"tau":2,"bogus":1})") == "bogus");
  CHECK(field_of(R"({"kind":"tau_nice","n":3})") == "tau");
  CHECK(field_of(R"({"kind":"nonsense","n":3})") == "kind");
  CHECK(field_of(R"({"kind":"elementary","n":3,"set":[0]})") == "set[0]");
  CHECK(field_of(R"({"kind":"tau_nice","n":3,"tau":5})") == "tau");
  CHECK(field_of(R"({"kind":"convex_combination","weights":[1],"components":[{"kind":"tau_nice","tau":1}]})") ==
        "components[0].n");
}

TEST_CASE("parse_json reports line and column") {
  try {
    io::parse_json("{\n  \"a\": 1,\n  \"b\": ]\n}", "cfg.json");
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.column() >= 8);
    CHECK(std::string(e.what()).rfind("cfg.json:3:", 0) == 0);
  }
}

TEST_CASE("data matrix text format round-trips") {
  Rng rng(81, 0);
  const auto A = fixtures::random_sparse(12, 9, 0.3, rng);
  std::ostringstream out;
  write_data_matrix(out, A);
  std::istringstream in(out.str());
  const auto B = read_data_matrix(in);
  CHECK(B.rows() == 12);
  CHECK(B.cols() == 9);
  CHECK((A.dense() - B.dense()).cwiseAbs().maxCoeff() == 0.0);

  std::istringstream commented("% a comment\n%another\n2 3 2\n1 1 1.5\n% mid\n2 3 -2\n");
  const auto C = read_data_matrix(commented);
  CHECK(C.dense()(0, 0) == 1.5);
  CHECK(C.dense()(1, 2) == -2.0);
}

TEST_CASE("data matrix reader errors carry line numbers") {
  CHECK(parse_error_of("2 2 2\n1 1 1\n1 x 2\n").line() == 3);
  CHECK(parse_error_of("2 2 2\n1 1 1\n3 1 2\n").line() == 3);
  CHECK(parse_error_of("2 2 2\n1 1 1\n1 1 2\n").line() == 3);
  CHECK(parse_error_of("2 2 3\n1 1 1\n2 2 2\n").line() == 4);
  CHECK(parse_error_of("% only comments\n").line() == 2);
  CHECK(parse_error_of("2 2 1\n1 1 nan\n").line() == 2);
  const auto e = parse_error_of("2 2 1\n1  7 1\n");
  CHECK(e.line() == 2);
  CHECK(e.column() == 4);
}

TEST_CASE("prob matrix CSV and JSON round-trip") {
  Rng rng(82, 0);
  for (int k = 0; k < 30; ++k) {
    const auto spec = fixtures::random_spec(1 + static_cast<int>(rng.below(7)), rng, 2);
    const auto P = prob_matrix(spec);
    std::ostringstream out;
    io::write_prob_matrix_csv(out, P);
    std::istringstream in(out.str());
    const auto Q = io::read_prob_matrix_csv(in, "P.csv");
    CHECK(Q.entries == P.entries);
    CHECK(Q.provenance == P.provenance);
    const auto R = io::prob_matrix_from_json(io::to_json(P));
    CHECK(R.entries == P.entries);
  }
  ProbMatrixOptions mc;
  mc.method = ProbMethod::MonteCarlo;
  mc.samples = 2000;
  const auto M = prob_matrix(SamplingSpec::tau_nice(4, 2), mc);
  std::ostringstream out;
  io::write_prob_matrix_csv(out, M);
  CHECK(out.str().rfind("# prob_matrix n=4 provenance=monte_carlo samples=2000", 0) == 0);
  std::istringstream in(out.str());
  const auto back = io::read_prob_matrix_csv(in, "P.csv");
  CHECK(back.samples == 2000);
  CHECK_FALSE(back.exact());
}

TEST_CASE("prob matrix import rejects invalid matrices") {
  std::istringstream asym("# prob_matrix n=2 provenance=enumerated\n0.5,0.1\n0.2,0.5\n");
  CHECK_THROWS_AS(io::read_prob_matrix_csv(asym, "P.csv"), ValidationError);
  std::istringstream range("# prob_matrix n=2 provenance=enumerated\n0.5,0.6\n0.6,0.5\n");
  CHECK_THROWS_AS(io::read_prob_matrix_csv(range, "P.csv"), ValidationError);
  std::istringstream shape("# prob_matrix n=2 provenance=enumerated\n0.5,0.1\n");
  CHECK_THROWS_AS(io::read_prob_matrix_csv(shape, "P.csv"), ParseError);
  std::istringstream junk("# prob_matrix n=2 provenance=enumerated\n0.5,abc\n0.1,0.5\n");
  try {
    io::read_prob_matrix_csv(junk, "P.csv");
    FAIL("expected a ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(e.column() == 5);
  }
}

TEST_CASE("v from JSON accepts arrays and EsoResult objects") {
  CHECK(io::v_from_json(io::Json::parse("[1, 2.5]")) == Eigen::Vector2d(1, 2.5));
  EsoResult r;
  r.v = Eigen::Vector3d(1, 2, 3);
  r.p = Eigen::Vector3d(0.5, 0.5, 0.5);
  r.formula = FormulaId::TauNice;
  const auto j = io::to_json(r);
  CHECK(j["formula_id"] == "tau-nice");
  CHECK(io::v_from_json(j) == r.v);
  CHECK_THROWS_AS(io::v_from_json(io::Json::parse(R"({"w":[1]})")), ValidationError);
}

TEST_CASE("sidecar defaults and errors") {
  const auto s = io::sidecar_from_json(io::Json::parse(R"({"lambda":0.1})"), 3);
  CHECK(s.lambda == 0.1);
  CHECK(s.b == Eigen::VectorXd::Zero(3));
  CHECK(s.x0 == Eigen::VectorXd::Ones(3));
  const auto t = io::sidecar_from_json(io::Json::parse(R"({"lambda":1,"b":[1,2],"x0":[0,0]})"), 2);
  CHECK(t.b == Eigen::Vector2d(1, 2));
  CHECK(t.x0 == Eigen::Vector2d(0, 0));
  CHECK_THROWS_AS(io::sidecar_from_json(io::Json::parse(R"({"lambda":-1})"), 2), ValidationError);
  CHECK_THROWS_AS(io::sidecar_from_json(io::Json::parse(R"({"lambda":1,"b":[1]})"), 2), ValidationError);
  CHECK_THROWS_AS(io::sidecar_from_json(io::Json::parse(R"({"mu":1})"), 2), ValidationError);
}

TEST_CASE("report envelope and dump are stable") {
  const auto env = io::report_envelope("probmatrix", io::Json{{"seed", 0}});
  CHECK(env["schema_version"] == 1);
  CHECK(env["command"] == "probmatrix");
  const auto text = io::dump(env);
  CHECK(text.back() == '\n');
  CHECK(text == io::dump(io::parse_json(text, "x")));
  CHECK(text.find("timestamp") == std::string::npos);
}
