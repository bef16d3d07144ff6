#include "esokit/data_matrix.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>

#include "esokit/error.hpp"

namespace esokit {

DataMatrix DataMatrix::from_triplets(int rows, int cols, std::vector<Triplet> triplets) {
  if (rows < 0 || cols <= 0) throw ValidationError("shape", "need m >= 0 and n >= 1");
  for (std::size_t k = 0; k < triplets.size(); ++k) {
    const auto& t = triplets[k];
    if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
      throw ValidationError("triplets[" + std::to_string(k) + "]",
                            "entry (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                                ") outside the " + std::to_string(rows) + " x " +
                                std::to_string(cols) + " shape");
    }
    if (!std::isfinite(t.value)) {
      throw ValidationError("triplets[" + std::to_string(k) + "]", "non-finite value");
    }
  }
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  for (std::size_t k = 1; k < triplets.size(); ++k) {
    if (triplets[k].row == triplets[k - 1].row && triplets[k].col == triplets[k - 1].col) {
      throw ValidationError("triplets", "duplicate entry (" + std::to_string(triplets[k].row) +
                                            ", " + std::to_string(triplets[k].col) + ")");
    }
  }

  DataMatrix A;
  A.rows_ = rows;
  A.cols_ = cols;
  A.row_start_.assign(rows + 1, 0);
  for (const auto& t : triplets) {
    if (t.value == 0.0) continue;
    A.row_entries_.push_back({t.col, t.value});
    ++A.row_start_[t.row + 1];
  }
  for (int j = 0; j < rows; ++j) A.row_start_[j + 1] += A.row_start_[j];
  A.finalize();
  return A;
}

DataMatrix DataMatrix::from_dense(const Eigen::MatrixXd& dense) {
  std::vector<Triplet> triplets;
  for (Eigen::Index j = 0; j < dense.rows(); ++j) {
    for (Eigen::Index i = 0; i < dense.cols(); ++i) {
      if (dense(j, i) != 0.0) {
        triplets.push_back({static_cast<int>(j), static_cast<int>(i), dense(j, i)});
      }
    }
  }
  return from_triplets(static_cast<int>(dense.rows()), static_cast<int>(dense.cols()),
                       std::move(triplets));
}

void DataMatrix::finalize() {
  col_start_.assign(cols_ + 1, 0);
  for (const auto& e : row_entries_) ++col_start_[e.index + 1];
  for (int i = 0; i < cols_; ++i) col_start_[i + 1] += col_start_[i];
  col_entries_.assign(row_entries_.size(), {});
  std::vector<std::size_t> fill(col_start_.begin(), col_start_.end() - 1);
  supports_.assign(rows_, {});
  col_sq_norms_ = Eigen::VectorXd::Zero(cols_);
  omega_ = 0;
  for (int j = 0; j < rows_; ++j) {
    for (const auto& e : row(j)) {
      col_entries_[fill[e.index]++] = {j, e.value};
      supports_[j].push_back(e.index);
      col_sq_norms_(e.index) += e.value * e.value;
    }
    omega_ = std::max(omega_, static_cast<int>(supports_[j].size()));
  }
}

std::span<const SparseEntry> DataMatrix::row(int j) const {
  return {row_entries_.data() + row_start_[j], row_start_[j + 1] - row_start_[j]};
}

std::span<const SparseEntry> DataMatrix::column(int i) const {
  return {col_entries_.data() + col_start_[i], col_start_[i + 1] - col_start_[i]};
}

double DataMatrix::sum_sq_supports() const {
  double total = 0.0;
  for (const auto& J : supports_) total += static_cast<double>(J.size()) * J.size();
  return total;
}

std::vector<Triplet> DataMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (int j = 0; j < rows_; ++j) {
    for (const auto& e : row(j)) out.push_back({j, e.index, e.value});
  }
  return out;
}

Eigen::MatrixXd DataMatrix::dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int j = 0; j < rows_; ++j) {
    for (const auto& e : row(j)) out(j, e.index) = e.value;
  }
  return out;
}

Eigen::MatrixXd DataMatrix::gram() const {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(cols_, cols_);
  for (int j = 0; j < rows_; ++j) {
    const auto r = row(j);
    for (const auto& a : r) {
      for (const auto& b : r) G(a.index, b.index) += a.value * b.value;
    }
  }
  return G;
}

Eigen::VectorXd DataMatrix::multiply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows_);
  for (int j = 0; j < rows_; ++j) {
    double acc = 0.0;
    for (const auto& e : row(j)) acc += e.value * x(e.index);
    out(j) = acc;
  }
  return out;
}

Eigen::VectorXd DataMatrix::multiply_transpose(const Eigen::VectorXd& r) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cols_);
  for (int i = 0; i < cols_; ++i) {
    double acc = 0.0;
    for (const auto& e : column(i)) acc += e.value * r(e.index);
    out(i) = acc;
  }
  return out;
}

DataMatrix DataMatrix::scaled(double factor) const {
  auto t = triplets();
  for (auto& x : t) x.value *= factor;
  return from_triplets(rows_, cols_, std::move(t));
}

DataMatrix DataMatrix::with_ridge_rows(double lambda) const {
  if (lambda < 0.0) throw ValidationError("lambda", "ridge must be nonnegative");
  auto t = triplets();
  if (lambda > 0.0) {
    const double root = std::sqrt(lambda);
    for (int i = 0; i < cols_; ++i) t.push_back({rows_ + i, i, root});
    return from_triplets(rows_ + cols_, cols_, std::move(t));
  }
  return *this;
}

namespace {

struct Token {
  std::string_view text;
  int column;  // 1-based
};

std::vector<Token> split(std::string_view line) {
  std::vector<Token> out;
  std::size_t k = 0;
  while (k < line.size()) {
    while (k < line.size() && std::isspace(static_cast<unsigned char>(line[k]))) ++k;
    const auto start = k;
    while (k < line.size() && !std::isspace(static_cast<unsigned char>(line[k]))) ++k;
    if (k > start) out.push_back({line.substr(start, k - start), static_cast<int>(start) + 1});
  }
  return out;
}

long long parse_integer(const Token& tok, const std::string& source, int line, const char* what) {
  long long value = 0;
  const auto* end = tok.text.data() + tok.text.size();
  auto [ptr, ec] = std::from_chars(tok.text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(source, line, tok.column,
                     std::string("expected integer ") + what + ", got '" + std::string(tok.text) + "'");
  }
  return value;
}

double parse_real(const Token& tok, const std::string& source, int line) {
  double value = 0.0;
  const auto* begin = tok.text.data();
  const auto* end = begin + tok.text.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(source, line, tok.column,
                     "expected finite real value, got '" + std::string(tok.text) + "'");
  }
  return value;
}

}  // namespace

DataMatrix read_data_matrix(std::istream& in, const std::string& source) {
  std::string text;
  int line_no = 0;
  bool have_header = false;
  long long m = 0, n = 0, nnz = 0;
  std::vector<Triplet> triplets;
  std::set<std::pair<int, int>> seen;
  while (std::getline(in, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    const auto tokens = split(text);
    if (tokens.empty() || tokens.front().text.front() == '%') continue;
    if (!have_header) {
      if (tokens.size() != 3) {
        throw ParseError(source, line_no, tokens.front().column,
                         "header must be 'm n nnz' (3 integers), found " +
                             std::to_string(tokens.size()) + " fields");
      }
      m = parse_integer(tokens[0], source, line_no, "m");
      n = parse_integer(tokens[1], source, line_no, "n");
      nnz = parse_integer(tokens[2], source, line_no, "nnz");
      if (m < 0 || n < 1 || nnz < 0 || nnz > m * n) {
        throw ParseError(source, line_no, 1, "inconsistent header dimensions");
      }
      have_header = true;
      continue;
    }
    if (static_cast<long long>(triplets.size()) == nnz) {
      throw ParseError(source, line_no, tokens.front().column,
                       "more entries than the " + std::to_string(nnz) + " announced in the header");
    }
    if (tokens.size() != 3) {
      throw ParseError(source, line_no, tokens.front().column,
                       "entry must be 'row col value', found " + std::to_string(tokens.size()) +
                           " fields");
    }
    const auto r = parse_integer(tokens[0], source, line_no, "row");
    const auto c = parse_integer(tokens[1], source, line_no, "col");
    const double v = parse_real(tokens[2], source, line_no);
    if (r < 1 || r > m) throw ParseError(source, line_no, tokens[0].column, "row index out of range");
    if (c < 1 || c > n) throw ParseError(source, line_no, tokens[1].column, "column index out of range");
    if (!seen.insert({static_cast<int>(r), static_cast<int>(c)}).second) {
      throw ParseError(source, line_no, tokens[0].column,
                       "duplicate entry (" + std::to_string(r) + ", " + std::to_string(c) + ")");
    }
    triplets.push_back({static_cast<int>(r - 1), static_cast<int>(c - 1), v});
  }
  if (!have_header) throw ParseError(source, line_no + 1, 0, "missing 'm n nnz' header");
  if (static_cast<long long>(triplets.size()) != nnz) {
    throw ParseError(source, line_no + 1, 0,
                     "expected " + std::to_string(nnz) + " entries, found " +
                         std::to_string(triplets.size()));
  }
  return DataMatrix::from_triplets(static_cast<int>(m), static_cast<int>(n), std::move(triplets));
}

DataMatrix read_data_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, 0, "cannot open file");
  return read_data_matrix(in, path);
}

void write_data_matrix(std::ostream& out, const DataMatrix& A) {
  out << "% data matrix, 1-based coordinates\n";
  out << A.rows() << ' ' << A.cols() << ' ' << A.nnz() << '\n';
  out << std::setprecision(17);
  for (const auto& t : A.triplets()) out << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
}

bool ConflictGraph::has_edge(int a, int b) const {
  const Edge e{std::min(a, b), std::max(a, b)};
  return std::binary_search(edges.begin(), edges.end(), e);
}

bool ConflictGraph::is_independent(const IndexSet& s) const {
  for (std::size_t x = 0; x < s.size(); ++x) {
    for (std::size_t y = x + 1; y < s.size(); ++y) {
      if (has_edge(s[x], s[y])) return false;
    }
  }
  return true;
}

ConflictGraph build_conflict_graph(const DataMatrix& A) {
  ConflictGraph g;
  g.n = A.cols();
  std::set<Edge> edges;
  for (const auto& J : A.row_supports()) {
    for (std::size_t x = 0; x < J.size(); ++x) {
      for (std::size_t y = x + 1; y < J.size(); ++y) edges.insert({J[x], J[y]});
    }
  }
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

}  // namespace esokit
