#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace esokit {

// Sorted, duplicate-free list of 0-based coordinate indices.
using IndexSet = std::vector<int>;
using Edge = std::pair<int, int>;

struct WeightedSet {
  IndexSet set;
  double prob = 0.0;
  friend bool operator==(const WeightedSet&, const WeightedSet&) = default;
};

// Exact law of a sampling: support sets with positive probability.
using Distribution = std::vector<WeightedSet>;

enum class SamplingKind {
  Elementary,
  Serial,
  TauNice,
  CTauDistributed,
  DoublyUniform,
  Product,
  Graph,
  ConvexCombination,
  Intersection,
  Restriction,
  Explicit,
};

std::string to_string(SamplingKind kind);
SamplingKind sampling_kind_from_string(const std::string& name);

// Declarative description of a random subset of {0, ..., n-1}. Only the
// fields relevant to `kind` are populated; use the factories.
struct SamplingSpec {
  int n = 0;
  SamplingKind kind = SamplingKind::Elementary;

  IndexSet set;                      // Elementary: the set; Restriction: J
  std::vector<double> q;             // Serial: q_i (size n); DoublyUniform: q_tau (size n+1)
  int tau = 0;                       // TauNice, CTauDistributed
  std::vector<IndexSet> blocks;      // CTauDistributed partition, Product blocks
  std::vector<WeightedSet> members;  // Graph, Explicit
  std::vector<Edge> graph_edges;     // Graph: conflict graph the members must respect
  std::vector<double> weights;       // ConvexCombination
  std::vector<SamplingSpec> components;  // ConvexCombination (k), Intersection (2), Restriction (1)

  static SamplingSpec elementary(int n, IndexSet s);
  static SamplingSpec serial(std::vector<double> q);
  static SamplingSpec uniform_serial(int n);
  static SamplingSpec tau_nice(int n, int tau);
  static SamplingSpec ctau_distributed(std::vector<IndexSet> partition, int tau);
  static SamplingSpec doubly_uniform(std::vector<double> cardinality_probs);
  static SamplingSpec product(std::vector<IndexSet> blocks);
  static SamplingSpec graph(int n, std::vector<Edge> edges, std::vector<WeightedSet> members);
  static SamplingSpec convex(std::vector<double> weights, std::vector<SamplingSpec> components);
  static SamplingSpec intersection(SamplingSpec a, SamplingSpec b);
  static SamplingSpec restriction(SamplingSpec base, IndexSet J);
  static SamplingSpec explicit_law(int n, std::vector<WeightedSet> members);

  friend bool operator==(const SamplingSpec&, const SamplingSpec&) = default;
};

struct EnumerationOptions {
  // Ground-set cap for kinds whose support grows exponentially in n.
  int cap = 16;
  // Hard limit on the number of support sets of any enumeration.
  std::size_t max_support = std::size_t{1} << 22;
};

struct CardinalityMoments {
  double mean = 0.0;         // E|S|
  double second = 0.0;       // E|S|^2
};

// Throws ValidationError naming the offending field.
void validate(const SamplingSpec& spec);

// One realization; deterministic in (spec, seed, stream_index).
IndexSet draw(const SamplingSpec& spec, std::uint64_t seed, std::uint64_t stream_index);

class Rng;
IndexSet draw(const SamplingSpec& spec, Rng& rng);

// Exact law. Throws CapacityError when the support is too large.
Distribution enumerate(const SamplingSpec& spec, const EnumerationOptions& options = {});

// True when enumerate() would succeed under `options` without building the support.
bool is_enumerable(const SamplingSpec& spec, const EnumerationOptions& options = {});

// Exact pairwise inclusion probabilities P_ij = Prob({i, j} subset of S) for
// every kind: closed forms for the basic samplings, composed through the
// mixture, intersection and restriction rules for the derived ones. Built
// once per spec; evaluation never touches the (possibly exponential) support.
class InclusionProbabilities {
 public:
  explicit InclusionProbabilities(const SamplingSpec& spec);
  ~InclusionProbabilities();
  InclusionProbabilities(InclusionProbabilities&&) noexcept;
  InclusionProbabilities& operator=(InclusionProbabilities&&) noexcept;

  int n() const { return n_; }
  double marginal(int i) const;
  double pair(int i, int j) const;
  // Principal submatrix of P on the rows/columns listed in J.
  Eigen::MatrixXd submatrix(const IndexSet& J) const;
  Eigen::MatrixXd full() const;

  struct Node;

 private:
  int n_;
  std::unique_ptr<Node> root_;
};

// p_i = Prob(i in S); exact for every kind.
Eigen::VectorXd marginals(const SamplingSpec& spec);

double pair_probability(const SamplingSpec& spec, int i, int j);

CardinalityMoments cardinality_moments(const SamplingSpec& spec);

bool is_proper(const SamplingSpec& spec);
bool is_nil(const SamplingSpec& spec);

// Smallest tau certified by the structure of the spec with |S| <= tau surely.
int cardinality_cap(const SamplingSpec& spec);

// TauNice, DoublyUniform and CTauDistributed are uniform by construction.
bool is_certified_uniform(const SamplingSpec& spec);

// All C(n, k) subsets in lexicographic order.
std::vector<IndexSet> all_subsets_of_size(int n, int k);

IndexSet intersect(const IndexSet& a, const IndexSet& b);

}  // namespace esokit
