#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "esokit/sampling.hpp"

namespace esokit {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

struct SparseEntry {
  int index = 0;  // column for row views, row for column views
  double value = 0.0;
};

// Sparse m x n data matrix A of a function satisfying
//   f(x + h) <= f(x) + <grad f(x), h> + 1/2 |A h|^2.
// Immutable after construction; row and column views are both kept.
class DataMatrix {
 public:
  DataMatrix() = default;

  // Zero values are dropped; duplicate (row, col) pairs are rejected.
  static DataMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);
  static DataMatrix from_dense(const Eigen::MatrixXd& dense);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t nnz() const { return row_entries_.size(); }

  std::span<const SparseEntry> row(int j) const;
  std::span<const SparseEntry> column(int i) const;

  // J_j = {i : A_ji != 0}.
  const std::vector<IndexSet>& row_supports() const { return supports_; }
  // w_i = sum_j A_ji^2.
  const Eigen::VectorXd& column_sq_norms() const { return col_sq_norms_; }
  // omega = max_j |J_j|.
  int max_row_support() const { return omega_; }
  // sum_j |J_j|^2.
  double sum_sq_supports() const;

  std::vector<Triplet> triplets() const;
  Eigen::MatrixXd dense() const;
  Eigen::MatrixXd gram() const;  // A'A, dense

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;            // A x
  Eigen::VectorXd multiply_transpose(const Eigen::VectorXd& r) const;  // A' r

  DataMatrix scaled(double factor) const;
  // [A; sqrt(lambda) I]: absorbs a ridge term (lambda/2)|x|^2 into the data matrix.
  DataMatrix with_ridge_rows(double lambda) const;

 private:
  void finalize();

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::size_t> row_start_;
  std::vector<SparseEntry> row_entries_;
  std::vector<std::size_t> col_start_;
  std::vector<SparseEntry> col_entries_;
  std::vector<IndexSet> supports_;
  Eigen::VectorXd col_sq_norms_;
  int omega_ = 0;
};

// Text format: '%' comment lines, then "m n nnz", then nnz lines "row col value"
// with 1-based indices. Errors are reported with their line number.
DataMatrix read_data_matrix(std::istream& in, const std::string& source = "<input>");
DataMatrix read_data_matrix_file(const std::string& path);
void write_data_matrix(std::ostream& out, const DataMatrix& A);

// Undirected conflict graph: (i, i') is an edge iff some row support holds both.
struct ConflictGraph {
  int n = 0;
  std::vector<Edge> edges;  // i < i', sorted

  bool has_edge(int a, int b) const;
  bool is_independent(const IndexSet& s) const;
};

ConflictGraph build_conflict_graph(const DataMatrix& A);

}  // namespace esokit
