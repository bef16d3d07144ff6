#include "esokit/fixtures.hpp"

#include <algorithm>
#include <numeric>

namespace esokit::fixtures {

namespace {

std::vector<double> random_simplex(std::size_t size, Rng& rng, double zero_chance = 0.0) {
  std::vector<double> q(size);
  double total = 0.0;
  for (auto& x : q) {
    x = rng.uniform() < zero_chance ? 0.0 : 0.05 + rng.uniform();
    total += x;
  }
  if (total == 0.0) {
    q[rng.below(size)] = 1.0;
    return q;
  }
  for (auto& x : q) x /= total;
  // Absorb the rounding residue so the sum is 1 to the last bit.
  const auto largest = std::max_element(q.begin(), q.end()) - q.begin();
  double rest = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    if (static_cast<long>(k) != largest) rest += q[k];
  }
  q[largest] = 1.0 - rest;
  return q;
}

IndexSet random_subset(int n, Rng& rng, double keep = 0.5) {
  IndexSet s;
  for (int i = 0; i < n; ++i) {
    if (rng.uniform() < keep) s.push_back(i);
  }
  return s;
}

IndexSet shuffled(int n, Rng& rng) {
  IndexSet perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int k = n - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(k + 1)]);
  return perm;
}

std::vector<IndexSet> equal_partition(int n, int c, Rng& rng) {
  const auto perm = shuffled(n, rng);
  const int s = n / c;
  std::vector<IndexSet> blocks(c);
  for (int k = 0; k < n; ++k) blocks[k / s].push_back(perm[k]);
  for (auto& b : blocks) std::sort(b.begin(), b.end());
  return blocks;
}

std::vector<int> divisors(int n) {
  std::vector<int> out;
  for (int d = 1; d <= n; ++d) {
    if (n % d == 0) out.push_back(d);
  }
  return out;
}

// Random independent sets of a conflict graph given as adjacency lists.
std::vector<IndexSet> greedy_independent_sets(int n, const std::vector<std::vector<char>>& adj,
                                              int count, Rng& rng) {
  std::vector<IndexSet> out;
  for (int t = 0; t < count; ++t) {
    IndexSet s;
    for (int i : shuffled(n, rng)) {
      if (rng.uniform() < 0.3) continue;
      bool ok = true;
      for (int j : s) {
        if (adj[i][j]) {
          ok = false;
          break;
        }
      }
      if (ok) s.push_back(i);
    }
    std::sort(s.begin(), s.end());
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<IndexSet> random_partition(int n, int blocks, Rng& rng) {
  const auto perm = shuffled(n, rng);
  std::vector<IndexSet> out(blocks);
  for (int k = 0; k < n; ++k) out[k % blocks].push_back(perm[k]);
  for (auto& b : out) std::sort(b.begin(), b.end());
  return out;
}

SamplingSpec random_spec(int n, Rng& rng, int depth) {
  const int kinds = depth > 0 ? 11 : 8;
  switch (rng.below(kinds)) {
    case 0:
      return SamplingSpec::elementary(n, random_subset(n, rng));
    case 1:
      return SamplingSpec::serial(random_simplex(n, rng, 0.2));
    case 2:
      return SamplingSpec::tau_nice(n, static_cast<int>(rng.below(n + 1)));
    case 3: {
      const auto ds = divisors(n);
      const int c = ds[rng.below(ds.size())];
      const int s = n / c;
      return SamplingSpec::ctau_distributed(equal_partition(n, c, rng), static_cast<int>(rng.below(s + 1)));
    }
    case 4:
      return SamplingSpec::doubly_uniform(random_simplex(n + 1, rng, 0.4));
    case 5:
      return SamplingSpec::product(random_partition(n, 1 + static_cast<int>(rng.below(n)), rng));
    case 6: {
      std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
      std::vector<Edge> edges;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (rng.uniform() < 0.3) {
            adj[i][j] = adj[j][i] = 1;
            edges.push_back({i, j});
          }
        }
      }
      const auto sets = greedy_independent_sets(n, adj, 1 + static_cast<int>(rng.below(4)), rng);
      const auto probs = random_simplex(sets.size(), rng);
      std::vector<WeightedSet> members;
      for (std::size_t k = 0; k < sets.size(); ++k) members.push_back({sets[k], probs[k]});
      return SamplingSpec::graph(n, edges, members);
    }
    case 7: {
      const int count = 1 + static_cast<int>(rng.below(5));
      const auto probs = random_simplex(count, rng);
      std::vector<WeightedSet> members;
      for (int k = 0; k < count; ++k) members.push_back({random_subset(n, rng), probs[k]});
      return SamplingSpec::explicit_law(n, members);
    }
    case 8: {
      const int count = 2 + static_cast<int>(rng.below(2));
      std::vector<SamplingSpec> parts;
      for (int k = 0; k < count; ++k) parts.push_back(random_spec(n, rng, depth - 1));
      return SamplingSpec::convex(random_simplex(count, rng), std::move(parts));
    }
    case 9:
      return SamplingSpec::intersection(random_spec(n, rng, depth - 1), random_spec(n, rng, depth - 1));
    default:
      return SamplingSpec::restriction(random_spec(n, rng, depth - 1), random_subset(n, rng, 0.7));
  }
}

SamplingSpec random_proper_spec(int n, Rng& rng) {
  switch (rng.below(6)) {
    case 0:
      return SamplingSpec::serial(random_simplex(n, rng));
    case 1:
      return SamplingSpec::tau_nice(n, 1 + static_cast<int>(rng.below(n)));
    case 2: {
      const auto ds = divisors(n);
      const int c = ds[rng.below(ds.size())];
      const int s = n / c;
      return SamplingSpec::ctau_distributed(equal_partition(n, c, rng), 1 + static_cast<int>(rng.below(s)));
    }
    case 3: {
      auto q = random_simplex(n + 1, rng, 0.4);
      if (q[0] == 1.0) q = random_simplex(n + 1, rng);
      return SamplingSpec::doubly_uniform(q);
    }
    case 4:
      return SamplingSpec::product(random_partition(n, 1 + static_cast<int>(rng.below(n)), rng));
    default: {
      // Mixture with a uniform serial component keeps every p_i positive.
      return SamplingSpec::convex({0.3, 0.7}, {SamplingSpec::uniform_serial(n), random_spec(n, rng, 0)});
    }
  }
}

SamplingSpec random_graph_sampling(const DataMatrix& A, Rng& rng) {
  const int n = A.cols();
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  const auto g = build_conflict_graph(A);
  for (auto [a, b] : g.edges) adj[a][b] = adj[b][a] = 1;
  auto sets = greedy_independent_sets(n, adj, 3, rng);
  for (int i = 0; i < n; ++i) sets.push_back({i});  // keeps the sampling proper
  const auto probs = random_simplex(sets.size(), rng);
  std::vector<WeightedSet> members;
  for (std::size_t k = 0; k < sets.size(); ++k) members.push_back({sets[k], probs[k]});
  return SamplingSpec::graph(n, g.edges, members);
}

DataMatrix random_sparse(int m, int n, double density, Rng& rng) {
  std::vector<std::vector<char>> filled(m, std::vector<char>(n, 0));
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) filled[j][i] = rng.uniform() < density;
  }
  for (int j = 0; j < m; ++j) {
    if (std::none_of(filled[j].begin(), filled[j].end(), [](char c) { return c; })) {
      filled[j][rng.below(n)] = 1;
    }
  }
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int j = 0; j < m && !any; ++j) any = filled[j][i];
    if (!any && m > 0) filled[rng.below(m)][i] = 1;
  }
  std::vector<Triplet> triplets;
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      if (!filled[j][i]) continue;
      double value = rng.normal();
      if (value == 0.0) value = 1.0;
      triplets.push_back({j, i, value});
    }
  }
  return DataMatrix::from_triplets(m, n, std::move(triplets));
}

Eigen::MatrixXd random_psd(int n, int rank, Rng& rng) {
  Eigen::MatrixXd G(n, rank);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < rank; ++k) G(i, k) = rng.normal();
  }
  return G * G.transpose();
}

Eigen::VectorXd random_unit(int n, Rng& rng) {
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) x(i) = rng.normal();
  return x / x.norm();
}

Eigen::MatrixXd random_symmetric(int n, Rng& rng) {
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) M(i, j) = M(j, i) = rng.normal();
  }
  return M;
}

}  // namespace esokit::fixtures
