#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "esokit/data_matrix.hpp"
#include "esokit/eso.hpp"
#include "esokit/sampling.hpp"

namespace esokit {

enum class CheckMode { Exhaustive, MonteCarlo };

std::string to_string(CheckMode mode);
CheckMode check_mode_from_string(const std::string& name);

struct TestPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd h;
  std::string label;
};

struct PointResult {
  std::string label;
  double lhs_mean = 0.0;
  double lhs_stderr = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs_mean
  bool pass = true;
};

// ESO inequality for f(x) = 1/2 |Ax|^2:
//   E f(x + h_[S]) <= f(x) + sum_i p_i grad_i f(x) h_i + 1/2 sum_i p_i v_i h_i^2.
// The scalar fields describe the point with the smallest (standardized) slack.
struct EsoCheckReport {
  CheckMode mode = CheckMode::Exhaustive;
  std::size_t trials = 0;
  double lhs_mean = 0.0;
  double lhs_stderr = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool pass = true;
  std::size_t points_tested = 0;
  std::vector<PointResult> points;
};

struct CheckOptions {
  CheckMode mode = CheckMode::Exhaustive;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;
  int threads = 1;
  double exhaustive_tolerance = 1e-10;
  double z_tolerance = 3.0;  // Monte-Carlo: pass iff slack >= -z * stderr
  EnumerationOptions enumeration;
};

// x in {0, e, random unit} crossed with h in {e_i, e, random unit, extra...}.
std::vector<TestPoint> canonical_points(int n, std::uint64_t seed,
                                        const std::vector<Eigen::VectorXd>& extra_directions = {});

EsoCheckReport check_eso_quadratic(const DataMatrix& A, const SamplingSpec& spec,
                                   const Eigen::VectorXd& v, const std::vector<TestPoint>& points,
                                   const CheckOptions& options = {});

struct MatrixFormReport {
  double margin = 0.0;
  bool pass = true;
  double tolerance = 1e-8;
  // Present when margin < -tolerance: direction violating the inequality.
  std::optional<Eigen::VectorXd> witness;
  double witness_gap = 0.0;
};

MatrixFormReport check_eso_matrix_form(const DataMatrix& A, const SamplingSpec& spec,
                                       const Eigen::VectorXd& v, double tolerance = 1e-8,
                                       int dense_cap = 2000);

struct BatteryCheck {
  std::string name;
  std::size_t cases = 0;
  double max_discrepancy = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct BatteryReport {
  std::vector<BatteryCheck> checks;
  bool pass() const;
};

struct BatteryOptions {
  std::vector<std::uint64_t> seeds = {0};
  std::vector<int> sizes = {5};
  int specs_per_size = 50;
  int pairs_per_spec = 1;  // random (M, h) pairs per spec
  EnumerationOptions enumeration;
};

// Structural identities of probability matrices against enumeration oracles.
BatteryReport run_identity_battery(const BatteryOptions& options = {});

void write_junit(std::ostream& out, const BatteryReport& report, const std::string& suite = "identity_battery");

}  // namespace esokit
