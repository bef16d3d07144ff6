#include "esokit/verifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "esokit/error.hpp"
#include "esokit/fixtures.hpp"
#include "esokit/parallel.hpp"
#include "esokit/prob_matrix.hpp"
#include "esokit/rng.hpp"

namespace esokit {

namespace {

// Draws are grouped in fixed-size blocks so the merged sums do not depend on the thread count.
constexpr std::size_t kBlock = 4096;

// Evaluates 1/2 |A x + A h_[S]|^2 for many (x, h) pairs sharing one A.
class QuadraticEvaluator {
 public:
  QuadraticEvaluator(const DataMatrix& A, const std::vector<TestPoint>& points) : A_(A), points_(points) {
    for (const auto& pt : points) {
      residuals_.push_back(A.multiply(pt.x));
      base_.push_back(residuals_.back().squaredNorm());
    }
  }

  // Scratch buffers are per call so one evaluator serves many threads.
  double value(std::size_t point, const IndexSet& S, std::vector<double>& delta,
               std::vector<int>& touched) const {
    const auto& h = points_[point].h;
    const auto& r = residuals_[point];
    for (int i : S) {
      if (h(i) == 0.0) continue;
      for (const auto& e : A_.column(i)) {
        if (delta[e.index] == 0.0) touched.push_back(e.index);
        delta[e.index] += h(i) * e.value;
        if (delta[e.index] == 0.0) delta[e.index] = std::numeric_limits<double>::denorm_min();
      }
    }
    double total = base_[point];
    for (int row : touched) {
      const double d = delta[row];
      total += 2.0 * r(row) * d + d * d;
      delta[row] = 0.0;
    }
    touched.clear();
    return 0.5 * total;
  }

 private:
  const DataMatrix& A_;
  const std::vector<TestPoint>& points_;
  std::vector<Eigen::VectorXd> residuals_;
  std::vector<double> base_;
};

double rhs_of(const DataMatrix& A, const TestPoint& pt, const Eigen::VectorXd& p, const Eigen::VectorXd& v) {
  const Eigen::VectorXd r = A.multiply(pt.x);
  const Eigen::VectorXd grad = A.multiply_transpose(r);
  return 0.5 * r.squaredNorm() + (p.array() * grad.array() * pt.h.array()).sum() +
         0.5 * (p.array() * v.array() * pt.h.array().square()).sum();
}

}  // namespace

std::string to_string(CheckMode mode) {
  return mode == CheckMode::Exhaustive ? "exhaustive" : "monte_carlo";
}

CheckMode check_mode_from_string(const std::string& name) {
  if (name == "exhaustive") return CheckMode::Exhaustive;
  if (name == "monte_carlo" || name == "monte-carlo") return CheckMode::MonteCarlo;
  throw ValidationError("mode", "unknown check mode '" + name + "'");
}

std::vector<TestPoint> canonical_points(int n, std::uint64_t seed,
                                        const std::vector<Eigen::VectorXd>& extra_directions) {
  Rng rng(seed, 0x7e57);
  const std::vector<std::pair<std::string, Eigen::VectorXd>> xs = {
      {"x=0", Eigen::VectorXd::Zero(n)},
      {"x=e", Eigen::VectorXd::Ones(n)},
      {"x=rand", fixtures::random_unit(n, rng)},
  };
  std::vector<std::pair<std::string, Eigen::VectorXd>> hs;
  for (int i = 0; i < n; ++i) hs.push_back({"h=e_" + std::to_string(i), Eigen::VectorXd::Unit(n, i)});
  hs.push_back({"h=e", Eigen::VectorXd::Ones(n)});
  hs.push_back({"h=rand", fixtures::random_unit(n, rng)});
  for (std::size_t k = 0; k < extra_directions.size(); ++k) {
    hs.push_back({"h=extra_" + std::to_string(k), extra_directions[k]});
  }
  std::vector<TestPoint> points;
  for (const auto& [xl, x] : xs) {
    for (const auto& [hl, h] : hs) points.push_back({x, h, xl + "," + hl});
  }
  return points;
}

EsoCheckReport check_eso_quadratic(const DataMatrix& A, const SamplingSpec& spec,
                                   const Eigen::VectorXd& v, const std::vector<TestPoint>& points,
                                   const CheckOptions& options) {
  validate(spec);
  const int n = spec.n;
  if (A.cols() != n || v.size() != n) throw DimensionError("check_eso_quadratic: A, v and n disagree");
  if ((v.array() <= 0.0).any()) throw ValidationError("v", "ESO parameters must be positive");
  for (const auto& pt : points) {
    if (pt.x.size() != n || pt.h.size() != n) throw DimensionError("test point of wrong length");
    if (!pt.x.allFinite() || !pt.h.allFinite()) throw ValidationError("points", "non-finite test point");
  }

  const Eigen::VectorXd p = marginals(spec);
  const QuadraticEvaluator eval(A, points);
  std::vector<double> rhs(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) rhs[k] = rhs_of(A, points[k], p, v);

  EsoCheckReport report;
  report.mode = options.mode;
  report.points_tested = points.size();
  std::vector<double> mean(points.size(), 0.0), stderr_(points.size(), 0.0);

  if (options.mode == CheckMode::Exhaustive) {
    if (!is_enumerable(spec, options.enumeration)) {
      throw CapacityError("exhaustive ESO check needs an enumerable sampling; use monte_carlo mode");
    }
    const auto law = enumerate(spec, options.enumeration);
    std::vector<double> delta(A.rows(), 0.0);
    std::vector<int> touched;
    for (std::size_t k = 0; k < points.size(); ++k) {
      double total = 0.0;
      for (const auto& [s, prob] : law) total += prob * eval.value(k, s, delta, touched);
      mean[k] = total;
    }
  } else {
    if (options.trials < 2) throw ValidationError("trials", "Monte-Carlo check needs at least 2 trials");
    report.trials = options.trials;
    const std::size_t blocks = (options.trials + kBlock - 1) / kBlock;
    const std::size_t P = points.size();
    // Per block: sum and sum of squares of (value - rhs) for every point.
    std::vector<double> sums(blocks * P, 0.0), squares(blocks * P, 0.0);
    parallel_chunks(blocks, options.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
      std::vector<double> delta(A.rows(), 0.0);
      std::vector<int> touched;
      for (std::size_t b = begin; b < end; ++b) {
        const std::size_t first = b * kBlock;
        const std::size_t last = std::min(options.trials, first + kBlock);
        for (std::size_t t = first; t < last; ++t) {
          Rng rng(options.seed, t);
          const auto s = draw(spec, rng);
          for (std::size_t k = 0; k < P; ++k) {
            const double d = eval.value(k, s, delta, touched) - rhs[k];
            sums[b * P + k] += d;
            squares[b * P + k] += d * d;
          }
        }
      }
    });
    const double N = static_cast<double>(options.trials);
    for (std::size_t k = 0; k < P; ++k) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t b = 0; b < blocks; ++b) {
        s1 += sums[b * P + k];
        s2 += squares[b * P + k];
      }
      const double m = s1 / N;
      const double var = std::max(0.0, (s2 - N * m * m) / (N - 1.0));
      mean[k] = rhs[k] + m;
      stderr_[k] = std::sqrt(var / N);
    }
  }

  double worst_score = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < points.size(); ++k) {
    PointResult r;
    r.label = points[k].label;
    r.lhs_mean = mean[k];
    r.lhs_stderr = stderr_[k];
    r.rhs = rhs[k];
    r.slack = rhs[k] - mean[k];
    double score = 0.0;
    if (options.mode == CheckMode::Exhaustive) {
      r.pass = r.slack >= -options.exhaustive_tolerance;
      score = r.slack;
    } else {
      r.pass = r.slack >= -options.z_tolerance * r.lhs_stderr;
      score = r.lhs_stderr > 0.0 ? r.slack / r.lhs_stderr
                                 : (r.slack >= 0.0 ? std::numeric_limits<double>::max() / 2 : -1e300);
    }
    report.pass = report.pass && r.pass;
    if (score < worst_score || k == 0) {
      worst_score = score;
      report.lhs_mean = r.lhs_mean;
      report.lhs_stderr = r.lhs_stderr;
      report.rhs = r.rhs;
      report.slack = r.slack;
    }
    report.points.push_back(std::move(r));
  }
  return report;
}

MatrixFormReport check_eso_matrix_form(const DataMatrix& A, const SamplingSpec& spec,
                                       const Eigen::VectorXd& v, double tolerance, int dense_cap) {
  const auto cert = certify(A, spec, v, dense_cap);
  MatrixFormReport report;
  report.margin = cert.margin;
  report.tolerance = tolerance;
  report.pass = cert.margin >= -tolerance;
  if (!report.pass) {
    report.witness = cert.witness;
    report.witness_gap = cert.witness_gap;
  }
  return report;
}

bool BatteryReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const BatteryCheck& c) { return c.pass; });
}

namespace {

double max_abs(const Eigen::MatrixXd& M) { return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff(); }

double law_distance(const Distribution& a, const Distribution& b) {
  std::map<IndexSet, double> diff;
  for (const auto& [s, p] : a) diff[s] += p;
  for (const auto& [s, p] : b) diff[s] -= p;
  double worst = 0.0;
  for (const auto& [s, d] : diff) worst = std::max(worst, std::abs(d));
  return worst;
}

class BatteryAccumulator {
 public:
  void record(const std::string& name, double discrepancy, double tolerance) {
    auto it = index_.find(name);
    if (it == index_.end()) {
      it = index_.emplace(name, report_.checks.size()).first;
      report_.checks.push_back({name, 0, 0.0, tolerance, true});
    }
    auto& c = report_.checks[it->second];
    ++c.cases;
    c.max_discrepancy = std::max(c.max_discrepancy, discrepancy);
    c.pass = c.max_discrepancy <= c.tolerance;
  }
  BatteryReport report() const { return report_; }

 private:
  BatteryReport report_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace

BatteryReport run_identity_battery(const BatteryOptions& options) {
  BatteryAccumulator acc;
  for (int n : options.sizes) {
    if (n < 1 || n > options.enumeration.cap) {
      throw ValidationError("sizes", "battery sizes must lie in [1, enumeration cap]");
    }
  }
  for (auto seed : options.seeds) {
    for (int n : options.sizes) {
      Rng rng(seed, 0xba77e + static_cast<std::uint64_t>(n));
      for (int k = 0; k < options.specs_per_size; ++k) {
        const auto spec = fixtures::random_spec(n, rng, 1);
        const auto law = enumerate(spec, options.enumeration);
        const Eigen::MatrixXd P_enum = prob_matrix_from_law(n, law);
        const Eigen::MatrixXd P_auto = prob_matrix(spec).entries;

        double total = 0.0;
        for (const auto& w : law) total += w.prob;
        acc.record("law sums to 1", std::abs(total - 1.0), 1e-12);
        acc.record("P(auto) = P(enumerate)", max_abs(P_auto - P_enum), 1e-12);
        acc.record("marginals = diag P(enumerate)",
                   (marginals(spec) - P_enum.diagonal()).cwiseAbs().maxCoeff(), 1e-12);
        const auto check = check_prob_matrix(P_enum, 1e-10);
        acc.record("P symmetric, in range, PSD",
                   std::max({check.symmetric ? 0.0 : 1.0, check.in_range ? 0.0 : 1.0,
                             std::max(0.0, -check.min_eigenvalue)}),
                   1e-10);

        for (int t = 0; t < options.pairs_per_spec; ++t) {
          const auto M = fixtures::random_symmetric(n, rng);
          const auto h = fixtures::random_unit(n, rng);
          const auto identities = check_identities(spec, M, h, 0, seed, options.enumeration);
          for (const auto& c : identities.checks) acc.record(c.name, c.discrepancy, 1e-10);
        }

        // Intersection of independent samplings.
        const auto other = fixtures::random_spec(n, rng, 0);
        const Eigen::MatrixXd P_inter =
            prob_matrix_from_law(n, enumerate(SamplingSpec::intersection(spec, other), options.enumeration));
        const ProbMatrix P1{P_enum, Provenance::Enumerated, 0, {}};
        const ProbMatrix P2{prob_matrix_from_law(n, enumerate(other, options.enumeration)),
                            Provenance::Enumerated, 0, {}};
        acc.record("P(S1 n S2) = P(S1) o P(S2)", max_abs(P_inter - intersect(P1, P2).entries), 1e-12);

        // Mixture and restriction, in both orders.
        const double w = rng.uniform();
        const auto mix = SamplingSpec::convex({w, 1.0 - w}, {spec, other});
        const auto combined = combine_convex({{w, P1}, {1.0 - w, P2}});
        const Eigen::MatrixXd P_mix = prob_matrix_from_law(n, enumerate(mix, options.enumeration));
        acc.record("P(sum q_t S_t) = sum q_t P(S_t)", max_abs(P_mix - combined.entries), 1e-12);

        IndexSet J;
        for (int i = 0; i < n; ++i) {
          if (rng.uniform() < 0.6) J.push_back(i);
        }
        const Eigen::MatrixXd restricted_first =
            combine_convex({{w, restrict(P1, J)}, {1.0 - w, restrict(P2, J)}}).entries;
        const Eigen::MatrixXd mixed_first = restrict(combined, J).entries;
        const Eigen::MatrixXd by_law =
            prob_matrix_from_law(n, enumerate(SamplingSpec::restriction(mix, J), options.enumeration));
        acc.record("P(J n sum q_t S_t) = sum q_t P(J n S_t)",
                   std::max(max_abs(restricted_first - mixed_first), max_abs(mixed_first - by_law)), 1e-12);
      }

      // Doubly uniform law as a mixture of tau-nice laws.
      for (int k = 0; k < std::max(1, options.specs_per_size / 5); ++k) {
        std::vector<double> q(n + 1);
        double total = 0.0;
        for (auto& x : q) total += (x = rng.uniform() < 0.3 ? 0.0 : rng.uniform());
        if (total == 0.0) {
          q[n] = total = 1.0;
        }
        for (auto& x : q) x /= total;
        double rest = 0.0;
        for (int t = 0; t < n; ++t) rest += q[t];
        q[n] = 1.0 - rest;
        if (q[n] < 0.0) continue;
        std::vector<double> weights;
        std::vector<SamplingSpec> parts;
        for (int t = 0; t <= n; ++t) {
          weights.push_back(q[t]);
          parts.push_back(SamplingSpec::tau_nice(n, t));
        }
        const auto du = enumerate(SamplingSpec::doubly_uniform(q), options.enumeration);
        const auto mixture = enumerate(SamplingSpec::convex(weights, parts), options.enumeration);
        acc.record("doubly uniform = sum_tau q_tau (tau-nice)", law_distance(du, mixture), 1e-12);
      }
    }
  }
  return acc.report();
}

void write_junit(std::ostream& out, const BatteryReport& report, const std::string& suite) {
  std::size_t failures = 0;
  for (const auto& c : report.checks) failures += c.pass ? 0 : 1;
  auto escape = [](const std::string& s) {
    std::string o;
    for (char ch : s) {
      switch (ch) {
        case '&': o += "&amp;"; break;
        case '<': o += "&lt;"; break;
        case '>': o += "&gt;"; break;
        case '"': o += "&quot;"; break;
        case '\'': o += "&apos;"; break;
        default: o += ch;
      }
    }
    return o;
  };
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<testsuite name=\"" << escape(suite) << "\" tests=\"" << report.checks.size()
      << "\" failures=\"" << failures << "\">\n";
  for (const auto& c : report.checks) {
    out << "  <testcase classname=\"" << escape(suite) << "\" name=\"" << escape(c.name) << "\">";
    if (!c.pass) {
      out << "<failure message=\"max discrepancy " << c.max_discrepancy << " exceeds " << c.tolerance
          << "\"/>";
    }
    out << "<system-out>cases=" << c.cases << " max_discrepancy=" << c.max_discrepancy << "</system-out>";
    out << "</testcase>\n";
  }
  out << "</testsuite>\n";
}

}  // namespace esokit
