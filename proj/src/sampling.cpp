#include "esokit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "esokit/error.hpp"
#include "esokit/rng.hpp"

namespace esokit {

namespace {

constexpr double kProbTol = 1e-12;

const std::pair<SamplingKind, const char*> kKindNames[] = {
    {SamplingKind::Elementary, "elementary"},
    {SamplingKind::Serial, "serial"},
    {SamplingKind::TauNice, "tau_nice"},
    {SamplingKind::CTauDistributed, "ctau_distributed"},
    {SamplingKind::DoublyUniform, "doubly_uniform"},
    {SamplingKind::Product, "product"},
    {SamplingKind::Graph, "graph"},
    {SamplingKind::ConvexCombination, "convex_combination"},
    {SamplingKind::Intersection, "intersection"},
    {SamplingKind::Restriction, "restriction"},
    {SamplingKind::Explicit, "explicit"},
};

std::string at(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string at(const std::string& path, const std::string& key, std::size_t index) {
  return at(path, key) + "[" + std::to_string(index) + "]";
}

void check_set(const IndexSet& s, int n, const std::string& field) {
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (s[k] < 0 || s[k] >= n) {
      throw ValidationError(field, "index " + std::to_string(s[k]) + " outside [0, " +
                                       std::to_string(n) + ")");
    }
    if (k > 0 && s[k] <= s[k - 1]) {
      throw ValidationError(field, "indices must be strictly increasing (sorted, no duplicates)");
    }
  }
}

void check_probabilities(const std::vector<double>& q, const std::string& field) {
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (!std::isfinite(q[k]) || q[k] < 0.0) {
      throw ValidationError(field + "[" + std::to_string(k) + "]",
                            "probability must be finite and nonnegative");
    }
    total += q[k];
  }
  if (std::abs(total - 1.0) > kProbTol) {
    throw ValidationError(field, "probabilities sum to " + std::to_string(total) + ", not 1");
  }
}

// Blocks must be nonempty, pairwise disjoint and cover [n].
void check_partition(const std::vector<IndexSet>& blocks, int n, const std::string& field) {
  if (blocks.empty()) throw ValidationError(field, "partition has no blocks");
  std::vector<char> seen(n, 0);
  int covered = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto name = field + "[" + std::to_string(b) + "]";
    if (blocks[b].empty()) throw ValidationError(name, "empty block");
    check_set(blocks[b], n, name);
    for (int i : blocks[b]) {
      if (seen[i]) throw ValidationError(name, "index " + std::to_string(i) + " in two blocks");
      seen[i] = 1;
      ++covered;
    }
  }
  if (covered != n) throw ValidationError(field, "blocks do not cover all n indices");
}

void check_members(const std::vector<WeightedSet>& members, int n, const std::string& field) {
  if (members.empty()) throw ValidationError(field, "no support sets given");
  std::vector<double> probs;
  for (std::size_t k = 0; k < members.size(); ++k) {
    check_set(members[k].set, n, field + "[" + std::to_string(k) + "].set");
    probs.push_back(members[k].prob);
  }
  check_probabilities(probs, field + ".prob");
}

void validate_at(const SamplingSpec& spec, const std::string& path) {
  if (spec.n <= 0) throw ValidationError(at(path, "n"), "must be a positive integer");
  const int n = spec.n;
  switch (spec.kind) {
    case SamplingKind::Elementary:
      check_set(spec.set, n, at(path, "set"));
      break;
    case SamplingKind::Serial:
      if (static_cast<int>(spec.q.size()) != n) throw ValidationError(at(path, "q"), "length must equal n");
      check_probabilities(spec.q, at(path, "q"));
      break;
    case SamplingKind::TauNice:
      if (spec.tau < 0 || spec.tau > n) throw ValidationError(at(path, "tau"), "must lie in [0, n]");
      break;
    case SamplingKind::CTauDistributed: {
      check_partition(spec.blocks, n, at(path, "partition"));
      const auto s = spec.blocks.front().size();
      for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        if (spec.blocks[b].size() != s) {
          throw ValidationError(at(path, "partition", b), "blocks must all have the same size");
        }
      }
      if (spec.tau < 0 || spec.tau > static_cast<int>(s)) {
        throw ValidationError(at(path, "tau"), "must lie in [0, block size]");
      }
      break;
    }
    case SamplingKind::DoublyUniform:
      if (static_cast<int>(spec.q.size()) != n + 1) {
        throw ValidationError(at(path, "q"), "length must equal n + 1");
      }
      check_probabilities(spec.q, at(path, "q"));
      break;
    case SamplingKind::Product:
      check_partition(spec.blocks, n, at(path, "blocks"));
      break;
    case SamplingKind::Graph: {
      std::set<Edge> edges;
      for (std::size_t k = 0; k < spec.graph_edges.size(); ++k) {
        auto [a, b] = spec.graph_edges[k];
        const auto name = at(path, "graph_edges", k);
        if (a < 0 || a >= n || b < 0 || b >= n) throw ValidationError(name, "endpoint outside [0, n)");
        if (a == b) throw ValidationError(name, "self-loop");
        edges.insert({std::min(a, b), std::max(a, b)});
      }
      check_members(spec.members, n, at(path, "members"));
      for (std::size_t k = 0; k < spec.members.size(); ++k) {
        const auto& s = spec.members[k].set;
        for (std::size_t x = 0; x < s.size(); ++x) {
          for (std::size_t y = x + 1; y < s.size(); ++y) {
            if (edges.count({s[x], s[y]})) {
              throw ValidationError(at(path, "members", k) + ".set",
                                    "not independent: contains edge (" + std::to_string(s[x]) +
                                        ", " + std::to_string(s[y]) + ")");
            }
          }
        }
      }
      break;
    }
    case SamplingKind::Explicit:
      check_members(spec.members, n, at(path, "members"));
      break;
    case SamplingKind::ConvexCombination:
      if (spec.components.empty()) throw ValidationError(at(path, "components"), "no components");
      if (spec.weights.size() != spec.components.size()) {
        throw ValidationError(at(path, "weights"), "one weight per component required");
      }
      check_probabilities(spec.weights, at(path, "weights"));
      break;
    case SamplingKind::Intersection:
      if (spec.components.size() != 2) {
        throw ValidationError(at(path, "components"), "intersection takes exactly two components");
      }
      break;
    case SamplingKind::Restriction:
      if (spec.components.size() != 1) {
        throw ValidationError(at(path, "components"), "restriction takes exactly one component");
      }
      check_set(spec.set, n, at(path, "set"));
      break;
  }
  for (std::size_t k = 0; k < spec.components.size(); ++k) {
    const auto child = at(path, "components", k);
    if (spec.components[k].n != n) throw ValidationError(child + ".n", "must equal parent n");
    validate_at(spec.components[k], child);
  }
}

IndexSet sorted_unique(IndexSet s) {
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

// Partial Fisher-Yates: the first k entries of `pool` become a uniform k-subset.
IndexSet uniform_subset(IndexSet pool, int k, Rng& rng) {
  const auto size = pool.size();
  for (int t = 0; t < k; ++t) {
    const auto pick = t + rng.below(size - t);
    std::swap(pool[t], pool[pick]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::size_t pick_index(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    acc += probs[k];
    last_positive = k;
    if (u < acc) return k;
  }
  return last_positive;  // rounding: acc may fall just short of 1
}

std::vector<double> member_probs(const std::vector<WeightedSet>& members) {
  std::vector<double> out;
  out.reserve(members.size());
  for (const auto& m : members) out.push_back(m.prob);
  return out;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int t = 1; t <= k; ++t) r = r * (n - k + t) / t;
  return std::round(r);
}

IndexSet iota_set(int n) {
  IndexSet s(n);
  std::iota(s.begin(), s.end(), 0);
  return s;
}

Distribution merge(std::map<IndexSet, double>&& law) {
  Distribution out;
  out.reserve(law.size());
  for (auto& [s, p] : law) {
    if (p > 0.0) out.push_back({s, p});
  }
  return out;
}

// Every choice of one k-subset per block, as a flat union.
void block_product(const std::vector<std::vector<IndexSet>>& choices, std::size_t b, IndexSet& acc,
                   double prob, std::map<IndexSet, double>& law) {
  if (b == choices.size()) {
    law[sorted_unique(acc)] += prob;
    return;
  }
  const double share = prob / static_cast<double>(choices[b].size());
  for (const auto& pick : choices[b]) {
    const auto mark = acc.size();
    acc.insert(acc.end(), pick.begin(), pick.end());
    block_product(choices, b + 1, acc, share, law);
    acc.resize(mark);
  }
}

double support_estimate(const SamplingSpec& spec, const EnumerationOptions& options) {
  const double inf = std::numeric_limits<double>::infinity();
  const int n = spec.n;
  switch (spec.kind) {
    case SamplingKind::Elementary:
      return 1.0;
    case SamplingKind::Serial:
      return n;
    case SamplingKind::TauNice:
      return n <= options.cap ? binomial(n, spec.tau) : inf;
    case SamplingKind::CTauDistributed: {
      if (n > options.cap) return inf;
      const int s = static_cast<int>(spec.blocks.front().size());
      return std::pow(binomial(s, spec.tau), static_cast<double>(spec.blocks.size()));
    }
    case SamplingKind::DoublyUniform: {
      if (n > options.cap) return inf;
      double total = 0.0;
      for (int t = 0; t <= n; ++t) {
        if (spec.q[t] > 0.0) total += binomial(n, t);
      }
      return total;
    }
    case SamplingKind::Product: {
      double total = 1.0;
      for (const auto& b : spec.blocks) total *= static_cast<double>(b.size());
      return total;
    }
    case SamplingKind::Graph:
    case SamplingKind::Explicit:
      return static_cast<double>(spec.members.size());
    case SamplingKind::ConvexCombination: {
      double total = 0.0;
      for (std::size_t t = 0; t < spec.components.size(); ++t) {
        if (spec.weights[t] > 0.0) total += support_estimate(spec.components[t], options);
      }
      return total;
    }
    case SamplingKind::Intersection:
      return support_estimate(spec.components[0], options) *
             support_estimate(spec.components[1], options);
    case SamplingKind::Restriction:
      return support_estimate(spec.components[0], options);
  }
  return inf;
}

Distribution enumerate_unchecked(const SamplingSpec& spec, const EnumerationOptions& options) {
  const int n = spec.n;
  std::map<IndexSet, double> law;
  switch (spec.kind) {
    case SamplingKind::Elementary:
      law[spec.set] = 1.0;
      break;
    case SamplingKind::Serial:
      for (int i = 0; i < n; ++i) law[{i}] += spec.q[i];
      break;
    case SamplingKind::TauNice: {
      const auto subsets = all_subsets_of_size(n, spec.tau);
      const double p = 1.0 / static_cast<double>(subsets.size());
      for (const auto& s : subsets) law[s] = p;
      break;
    }
    case SamplingKind::CTauDistributed: {
      std::vector<std::vector<IndexSet>> choices;
      for (const auto& block : spec.blocks) {
        std::vector<IndexSet> picks;
        for (const auto& local : all_subsets_of_size(static_cast<int>(block.size()), spec.tau)) {
          IndexSet global;
          for (int k : local) global.push_back(block[k]);
          picks.push_back(std::move(global));
        }
        choices.push_back(std::move(picks));
      }
      IndexSet acc;
      block_product(choices, 0, acc, 1.0, law);
      break;
    }
    case SamplingKind::DoublyUniform:
      for (int t = 0; t <= n; ++t) {
        if (spec.q[t] <= 0.0) continue;
        const auto subsets = all_subsets_of_size(n, t);
        const double p = spec.q[t] / static_cast<double>(subsets.size());
        for (const auto& s : subsets) law[s] += p;
      }
      break;
    case SamplingKind::Product: {
      std::vector<std::vector<IndexSet>> choices;
      for (const auto& block : spec.blocks) {
        std::vector<IndexSet> picks;
        for (int i : block) picks.push_back({i});
        choices.push_back(std::move(picks));
      }
      IndexSet acc;
      block_product(choices, 0, acc, 1.0, law);
      break;
    }
    case SamplingKind::Graph:
    case SamplingKind::Explicit:
      for (const auto& m : spec.members) law[m.set] += m.prob;
      break;
    case SamplingKind::ConvexCombination:
      for (std::size_t t = 0; t < spec.components.size(); ++t) {
        if (spec.weights[t] <= 0.0) continue;
        for (const auto& [s, p] : enumerate_unchecked(spec.components[t], options)) {
          law[s] += spec.weights[t] * p;
        }
      }
      break;
    case SamplingKind::Intersection: {
      const auto first = enumerate_unchecked(spec.components[0], options);
      const auto second = enumerate_unchecked(spec.components[1], options);
      for (const auto& a : first) {
        for (const auto& b : second) law[intersect(a.set, b.set)] += a.prob * b.prob;
      }
      break;
    }
    case SamplingKind::Restriction:
      for (const auto& [s, p] : enumerate_unchecked(spec.components[0], options)) {
        law[intersect(s, spec.set)] += p;
      }
      break;
  }
  return merge(std::move(law));
}

}  // namespace

std::string to_string(SamplingKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

SamplingKind sampling_kind_from_string(const std::string& name) {
  for (const auto& [k, text] : kKindNames) {
    if (name == text) return k;
  }
  throw ValidationError("kind", "unknown sampling kind '" + name + "'");
}

SamplingSpec SamplingSpec::elementary(int n, IndexSet s) {
  SamplingSpec spec;
  spec.n = n;
  spec.kind = SamplingKind::Elementary;
  spec.set = sorted_unique(std::move(s));
  return spec;
}

SamplingSpec SamplingSpec::serial(std::vector<double> q) {
  SamplingSpec spec;
  spec.n = static_cast<int>(q.size());
  spec.kind = SamplingKind::Serial;
  spec.q = std::move(q);
  return spec;
}

SamplingSpec SamplingSpec::uniform_serial(int n) {
  return serial(std::vector<double>(n, 1.0 / n));
}

SamplingSpec SamplingSpec::tau_nice(int n, int tau) {
  SamplingSpec spec;
  spec.n = n;
  spec.kind = SamplingKind::TauNice;
  spec.tau = tau;
  return spec;
}

SamplingSpec SamplingSpec::ctau_distributed(std::vector<IndexSet> partition, int tau) {
  SamplingSpec spec;
  spec.kind = SamplingKind::CTauDistributed;
  for (auto& b : partition) {
    b = sorted_unique(std::move(b));
    spec.n += static_cast<int>(b.size());
  }
  spec.blocks = std::move(partition);
  spec.tau = tau;
  return spec;
}

SamplingSpec SamplingSpec::doubly_uniform(std::vector<double> cardinality_probs) {
  SamplingSpec spec;
  spec.n = static_cast<int>(cardinality_probs.size()) - 1;
  spec.kind = SamplingKind::DoublyUniform;
  spec.q = std::move(cardinality_probs);
  return spec;
}

SamplingSpec SamplingSpec::product(std::vector<IndexSet> blocks) {
  SamplingSpec spec;
  spec.kind = SamplingKind::Product;
  for (auto& b : blocks) {
    b = sorted_unique(std::move(b));
    spec.n += static_cast<int>(b.size());
  }
  spec.blocks = std::move(blocks);
  return spec;
}

SamplingSpec SamplingSpec::graph(int n, std::vector<Edge> edges, std::vector<WeightedSet> members) {
  SamplingSpec spec;
  spec.n = n;
  spec.kind = SamplingKind::Graph;
  for (auto& e : edges) e = {std::min(e.first, e.second), std::max(e.first, e.second)};
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  spec.graph_edges = std::move(edges);
  for (auto& m : members) m.set = sorted_unique(std::move(m.set));
  spec.members = std::move(members);
  return spec;
}

SamplingSpec SamplingSpec::convex(std::vector<double> weights, std::vector<SamplingSpec> components) {
  SamplingSpec spec;
  spec.n = components.empty() ? 0 : components.front().n;
  spec.kind = SamplingKind::ConvexCombination;
  spec.weights = std::move(weights);
  spec.components = std::move(components);
  return spec;
}

SamplingSpec SamplingSpec::intersection(SamplingSpec a, SamplingSpec b) {
  SamplingSpec spec;
  spec.n = a.n;
  spec.kind = SamplingKind::Intersection;
  spec.components.push_back(std::move(a));
  spec.components.push_back(std::move(b));
  return spec;
}

SamplingSpec SamplingSpec::restriction(SamplingSpec base, IndexSet J) {
  SamplingSpec spec;
  spec.n = base.n;
  spec.kind = SamplingKind::Restriction;
  spec.set = sorted_unique(std::move(J));
  spec.components.push_back(std::move(base));
  return spec;
}

SamplingSpec SamplingSpec::explicit_law(int n, std::vector<WeightedSet> members) {
  SamplingSpec spec;
  spec.n = n;
  spec.kind = SamplingKind::Explicit;
  for (auto& m : members) m.set = sorted_unique(std::move(m.set));
  spec.members = std::move(members);
  return spec;
}

void validate(const SamplingSpec& spec) { validate_at(spec, ""); }

IndexSet draw(const SamplingSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case SamplingKind::Elementary:
      return spec.set;
    case SamplingKind::Serial:
      return {static_cast<int>(pick_index(spec.q, rng))};
    case SamplingKind::TauNice:
      return uniform_subset(iota_set(spec.n), spec.tau, rng);
    case SamplingKind::CTauDistributed: {
      IndexSet out;
      for (const auto& block : spec.blocks) {
        const auto part = uniform_subset(block, spec.tau, rng);
        out.insert(out.end(), part.begin(), part.end());
      }
      std::sort(out.begin(), out.end());
      return out;
    }
    case SamplingKind::DoublyUniform: {
      const int size = static_cast<int>(pick_index(spec.q, rng));
      return uniform_subset(iota_set(spec.n), size, rng);
    }
    case SamplingKind::Product: {
      IndexSet out;
      for (const auto& block : spec.blocks) out.push_back(block[rng.below(block.size())]);
      std::sort(out.begin(), out.end());
      return out;
    }
    case SamplingKind::Graph:
    case SamplingKind::Explicit:
      return spec.members[pick_index(member_probs(spec.members), rng)].set;
    case SamplingKind::ConvexCombination:
      return draw(spec.components[pick_index(spec.weights, rng)], rng);
    case SamplingKind::Intersection: {
      const auto a = draw(spec.components[0], rng);
      const auto b = draw(spec.components[1], rng);
      return intersect(a, b);
    }
    case SamplingKind::Restriction:
      return intersect(draw(spec.components[0], rng), spec.set);
  }
  return {};
}

IndexSet draw(const SamplingSpec& spec, std::uint64_t seed, std::uint64_t stream_index) {
  validate(spec);
  Rng rng(seed, stream_index);
  return draw(spec, rng);
}

bool is_enumerable(const SamplingSpec& spec, const EnumerationOptions& options) {
  return support_estimate(spec, options) <= static_cast<double>(options.max_support);
}

Distribution enumerate(const SamplingSpec& spec, const EnumerationOptions& options) {
  validate(spec);
  if (!is_enumerable(spec, options)) {
    throw CapacityError("support of " + to_string(spec.kind) + " sampling with n = " +
                        std::to_string(spec.n) + " exceeds the enumeration cap (n <= " +
                        std::to_string(options.cap) +
                        "); use the Monte-Carlo path instead");
  }
  return enumerate_unchecked(spec, options);
}

// ---------------------------------------------------------------------------
// Inclusion probabilities

struct InclusionProbabilities::Node {
  SamplingKind kind;
  int n = 0;
  // Scalars of the closed forms: diagonal value, off-diagonal value(s).
  double diag = 0.0;
  double same_block = 0.0;
  double cross_block = 0.0;
  std::vector<int> block_of;         // CTau, Product
  std::vector<double> block_size;    // Product
  std::vector<char> in_set;          // Elementary, Restriction
  std::vector<double> q;             // Serial
  std::vector<double> member_prob;   // Graph, Explicit
  std::vector<std::vector<int>> members_with;  // index -> sorted member ids
  std::vector<double> weights;       // ConvexCombination
  std::vector<Node> children;

  double marginal(int i) const;
  double pair(int i, int j) const;
};

namespace {

InclusionProbabilities::Node build_node(const SamplingSpec& spec) {
  InclusionProbabilities::Node node;
  node.kind = spec.kind;
  node.n = spec.n;
  const int n = spec.n;
  switch (spec.kind) {
    case SamplingKind::Elementary:
    case SamplingKind::Restriction:
      node.in_set.assign(n, 0);
      for (int i : spec.set) node.in_set[i] = 1;
      break;
    case SamplingKind::Serial:
      node.q = spec.q;
      break;
    case SamplingKind::TauNice: {
      const double beta = (spec.tau - 1.0) / std::max(n - 1, 1);
      node.diag = static_cast<double>(spec.tau) / n;
      node.cross_block = spec.tau == 0 ? 0.0 : node.diag * beta;
      break;
    }
    case SamplingKind::CTauDistributed: {
      const int s = static_cast<int>(spec.blocks.front().size());
      const int s1 = std::max(s - 1, 1);
      const double t = spec.tau;
      node.diag = t / s;
      node.same_block = t * (t - 1.0) / (static_cast<double>(s) * s1);
      if (spec.tau == 0) node.same_block = 0.0;
      node.cross_block = (t / s) * (t / s);
      node.block_of.assign(n, 0);
      for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        for (int i : spec.blocks[b]) node.block_of[i] = static_cast<int>(b);
      }
      break;
    }
    case SamplingKind::DoublyUniform: {
      double m1 = 0.0, m2 = 0.0;
      for (int t = 0; t <= n; ++t) {
        m1 += spec.q[t] * t;
        m2 += spec.q[t] * t * t;
      }
      node.diag = m1 / n;
      if (m1 > 0.0) {
        const double beta = (m2 / m1 - 1.0) / std::max(n - 1, 1);
        node.cross_block = node.diag * beta;
      }
      break;
    }
    case SamplingKind::Product:
      node.block_of.assign(n, 0);
      for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        node.block_size.push_back(static_cast<double>(spec.blocks[b].size()));
        for (int i : spec.blocks[b]) node.block_of[i] = static_cast<int>(b);
      }
      break;
    case SamplingKind::Graph:
    case SamplingKind::Explicit:
      node.members_with.assign(n, {});
      for (std::size_t k = 0; k < spec.members.size(); ++k) {
        node.member_prob.push_back(spec.members[k].prob);
        for (int i : spec.members[k].set) node.members_with[i].push_back(static_cast<int>(k));
      }
      break;
    case SamplingKind::ConvexCombination:
      node.weights = spec.weights;
      break;
    case SamplingKind::Intersection:
      break;
  }
  for (const auto& child : spec.components) node.children.push_back(build_node(child));
  return node;
}

}  // namespace

double InclusionProbabilities::Node::marginal(int i) const { return pair(i, i); }

double InclusionProbabilities::Node::pair(int i, int j) const {
  switch (kind) {
    case SamplingKind::Elementary:
      return (in_set[i] && in_set[j]) ? 1.0 : 0.0;
    case SamplingKind::Serial:
      return i == j ? q[i] : 0.0;
    case SamplingKind::TauNice:
    case SamplingKind::DoublyUniform:
      return i == j ? diag : cross_block;
    case SamplingKind::CTauDistributed:
      if (i == j) return diag;
      return block_of[i] == block_of[j] ? same_block : cross_block;
    case SamplingKind::Product: {
      const double si = block_size[block_of[i]];
      if (i == j) return 1.0 / si;
      if (block_of[i] == block_of[j]) return 0.0;
      return 1.0 / (si * block_size[block_of[j]]);
    }
    case SamplingKind::Graph:
    case SamplingKind::Explicit: {
      const auto& a = members_with[i];
      const auto& b = members_with[j];
      double total = 0.0;
      std::size_t x = 0, y = 0;
      while (x < a.size() && y < b.size()) {
        if (a[x] < b[y]) {
          ++x;
        } else if (b[y] < a[x]) {
          ++y;
        } else {
          total += member_prob[a[x]];
          ++x;
          ++y;
        }
      }
      return total;
    }
    case SamplingKind::ConvexCombination: {
      double total = 0.0;
      for (std::size_t t = 0; t < children.size(); ++t) {
        if (weights[t] > 0.0) total += weights[t] * children[t].pair(i, j);
      }
      return total;
    }
    case SamplingKind::Intersection:
      return children[0].pair(i, j) * children[1].pair(i, j);
    case SamplingKind::Restriction:
      return (in_set[i] && in_set[j]) ? children[0].pair(i, j) : 0.0;
  }
  return 0.0;
}

InclusionProbabilities::InclusionProbabilities(const SamplingSpec& spec) : n_(spec.n) {
  validate(spec);
  root_ = std::make_unique<Node>(build_node(spec));
}

InclusionProbabilities::~InclusionProbabilities() = default;
InclusionProbabilities::InclusionProbabilities(InclusionProbabilities&&) noexcept = default;
InclusionProbabilities& InclusionProbabilities::operator=(InclusionProbabilities&&) noexcept = default;

double InclusionProbabilities::marginal(int i) const { return root_->marginal(i); }

double InclusionProbabilities::pair(int i, int j) const { return root_->pair(i, j); }

Eigen::MatrixXd InclusionProbabilities::submatrix(const IndexSet& J) const {
  const auto k = static_cast<Eigen::Index>(J.size());
  Eigen::MatrixXd out(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    out(a, a) = root_->pair(J[a], J[a]);
    for (Eigen::Index b = a + 1; b < k; ++b) {
      out(a, b) = out(b, a) = root_->pair(J[a], J[b]);
    }
  }
  return out;
}

Eigen::MatrixXd InclusionProbabilities::full() const { return submatrix(iota_set(n_)); }

Eigen::VectorXd marginals(const SamplingSpec& spec) {
  const InclusionProbabilities probs(spec);
  Eigen::VectorXd p(spec.n);
  for (int i = 0; i < spec.n; ++i) p(i) = probs.marginal(i);
  return p;
}

double pair_probability(const SamplingSpec& spec, int i, int j) {
  if (i < 0 || j < 0 || i >= spec.n || j >= spec.n) {
    throw ValidationError("index", "pair (" + std::to_string(i) + ", " + std::to_string(j) +
                                       ") outside [0, n)");
  }
  return InclusionProbabilities(spec).pair(i, j);
}

namespace {

CardinalityMoments moments_unchecked(const SamplingSpec& spec) {
  const int n = spec.n;
  switch (spec.kind) {
    case SamplingKind::Elementary: {
      const double s = static_cast<double>(spec.set.size());
      return {s, s * s};
    }
    case SamplingKind::Serial: {
      double total = 0.0;
      for (double x : spec.q) total += x;
      return {total, total};
    }
    case SamplingKind::TauNice:
      return {static_cast<double>(spec.tau), static_cast<double>(spec.tau) * spec.tau};
    case SamplingKind::CTauDistributed: {
      const double size = static_cast<double>(spec.blocks.size()) * spec.tau;
      return {size, size * size};
    }
    case SamplingKind::DoublyUniform: {
      CardinalityMoments m;
      for (int t = 0; t <= n; ++t) {
        m.mean += spec.q[t] * t;
        m.second += spec.q[t] * t * t;
      }
      return m;
    }
    case SamplingKind::Product: {
      const double size = static_cast<double>(spec.blocks.size());
      return {size, size * size};
    }
    case SamplingKind::Graph:
    case SamplingKind::Explicit: {
      CardinalityMoments m;
      for (const auto& member : spec.members) {
        const double s = static_cast<double>(member.set.size());
        m.mean += member.prob * s;
        m.second += member.prob * s * s;
      }
      return m;
    }
    case SamplingKind::ConvexCombination: {
      CardinalityMoments m;
      for (std::size_t t = 0; t < spec.components.size(); ++t) {
        const auto child = moments_unchecked(spec.components[t]);
        m.mean += spec.weights[t] * child.mean;
        m.second += spec.weights[t] * child.second;
      }
      return m;
    }
    case SamplingKind::Intersection:
    case SamplingKind::Restriction: {
      // E|S| = Tr(P), E|S|^2 = e'Pe.
      const InclusionProbabilities probs(spec);
      CardinalityMoments m;
      for (int i = 0; i < n; ++i) {
        m.mean += probs.pair(i, i);
        m.second += probs.pair(i, i);
        for (int j = i + 1; j < n; ++j) m.second += 2.0 * probs.pair(i, j);
      }
      return m;
    }
  }
  return {};
}

int cap_unchecked(const SamplingSpec& spec) {
  switch (spec.kind) {
    case SamplingKind::Elementary:
      return static_cast<int>(spec.set.size());
    case SamplingKind::Serial:
      return 1;
    case SamplingKind::TauNice:
      return spec.tau;
    case SamplingKind::CTauDistributed:
      return static_cast<int>(spec.blocks.size()) * spec.tau;
    case SamplingKind::DoublyUniform: {
      int cap = 0;
      for (int t = 0; t <= spec.n; ++t) {
        if (spec.q[t] > 0.0) cap = t;
      }
      return cap;
    }
    case SamplingKind::Product:
      return static_cast<int>(spec.blocks.size());
    case SamplingKind::Graph:
    case SamplingKind::Explicit: {
      int cap = 0;
      for (const auto& m : spec.members) {
        if (m.prob > 0.0) cap = std::max(cap, static_cast<int>(m.set.size()));
      }
      return cap;
    }
    case SamplingKind::ConvexCombination: {
      int cap = 0;
      for (std::size_t t = 0; t < spec.components.size(); ++t) {
        if (spec.weights[t] > 0.0) cap = std::max(cap, cap_unchecked(spec.components[t]));
      }
      return cap;
    }
    case SamplingKind::Intersection:
      return std::min(cap_unchecked(spec.components[0]), cap_unchecked(spec.components[1]));
    case SamplingKind::Restriction:
      return std::min(cap_unchecked(spec.components[0]), static_cast<int>(spec.set.size()));
  }
  return spec.n;
}

}  // namespace

CardinalityMoments cardinality_moments(const SamplingSpec& spec) {
  validate(spec);
  return moments_unchecked(spec);
}

bool is_proper(const SamplingSpec& spec) {
  const auto p = marginals(spec);
  return (p.array() > 0.0).all();
}

bool is_nil(const SamplingSpec& spec) {
  const auto p = marginals(spec);
  return (p.array() == 0.0).all();
}

int cardinality_cap(const SamplingSpec& spec) {
  validate(spec);
  return cap_unchecked(spec);
}

bool is_certified_uniform(const SamplingSpec& spec) {
  return spec.kind == SamplingKind::TauNice || spec.kind == SamplingKind::DoublyUniform ||
         spec.kind == SamplingKind::CTauDistributed;
}

std::vector<IndexSet> all_subsets_of_size(int n, int k) {
  std::vector<IndexSet> out;
  if (k < 0 || k > n) return out;
  IndexSet current(k);
  std::iota(current.begin(), current.end(), 0);
  while (true) {
    out.push_back(current);
    int pos = k - 1;
    while (pos >= 0 && current[pos] == n - k + pos) --pos;
    if (pos < 0) break;
    ++current[pos];
    for (int t = pos + 1; t < k; ++t) current[t] = current[t - 1] + 1;
  }
  return out;
}

IndexSet intersect(const IndexSet& a, const IndexSet& b) {
  IndexSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace esokit
