#pragma once

#include <vector>

#include <Eigen/Core>

#include "esokit/data_matrix.hpp"
#include "esokit/rng.hpp"
#include "esokit/sampling.hpp"

namespace esokit::fixtures {

// Uniformly random partition of [n] into `blocks` nonempty parts of near-equal size.
std::vector<IndexSet> random_partition(int n, int blocks, Rng& rng);

// Random sampling over [n]. depth > 0 allows mixture / intersection / restriction nodes.
SamplingSpec random_spec(int n, Rng& rng, int depth = 1);

// Random proper sampling drawn from the kinds with p_i > 0 by construction.
SamplingSpec random_proper_spec(int n, Rng& rng);

// Proper graph sampling whose members are independent in A's conflict graph.
SamplingSpec random_graph_sampling(const DataMatrix& A, Rng& rng);

// m x n matrix with each entry nonzero with probability `density` (standard normal values);
// every row and column gets at least one nonzero.
DataMatrix random_sparse(int m, int n, double density, Rng& rng);

// Random PSD matrix G G' with G of size n x rank.
Eigen::MatrixXd random_psd(int n, int rank, Rng& rng);

Eigen::VectorXd random_unit(int n, Rng& rng);
Eigen::MatrixXd random_symmetric(int n, Rng& rng);

}  // namespace esokit::fixtures
