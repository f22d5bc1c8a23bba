#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace efvms {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;

/// Compressed sparse row matrix. Column indices are strictly increasing within
/// each row; the pattern is fixed at construction and values are mutable.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<int> row_offsets, std::vector<int> col_indices,
               std::vector<double> values);

  struct Triplet {
    int row;
    int col;
    double value;
  };
  /// Duplicates are summed.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets);
  /// Zero-valued matrix whose pattern is the union of (row, col) pairs.
  static SparseMatrix pattern(std::size_t rows, std::size_t cols, std::vector<std::vector<int>> columns_per_row);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t nnz() const { return values_.size(); }

  std::span<const int> row_offsets() const { return offsets_; }
  std::span<const int> col_indices() const { return cols_idx_; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Position of (i, j) in the value array, or -1 when outside the pattern.
  std::ptrdiff_t find(int i, int j) const;
  double at(int i, int j) const;
  /// Adds to an existing pattern entry; throws if (i, j) is not in the pattern.
  void add(int i, int j, double v);
  void set_zero();

  Vector multiply(const Vector& x) const;
  Vector multiply_transpose(const Vector& x) const;
  SparseMatrix transpose() const;
  DenseMatrix to_dense() const;

  bool same_pattern(const SparseMatrix& other) const;
  /// this += alpha * other; both must share a pattern.
  void axpy(double alpha, const SparseMatrix& other);
  double max_abs() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<int> offsets_{0};
  std::vector<int> cols_idx_;
  std::vector<double> values_;
};

/// Sparse times dense.
DenseMatrix multiply(const SparseMatrix& a, const DenseMatrix& b);

/// Linear combination of matrices that share a pattern.
SparseMatrix combine(std::span<const std::pair<double, const SparseMatrix*>> terms);

/// Sparse LU factorization (UMFPACK). Immutable after construction; solve()
/// may be called concurrently with distinct right-hand sides.
class SparseLU {
 public:
  explicit SparseLU(const SparseMatrix& a);
  ~SparseLU();
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;
  SparseLU(SparseLU&&) noexcept;
  SparseLU& operator=(SparseLU&&) noexcept;

  /// Refactor a matrix with the same pattern, reusing the symbolic analysis.
  void refactor(const SparseMatrix& a);

  Vector solve(const Vector& b) const;
  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SparseLU sparse_lu_factor(const SparseMatrix& a);

struct SymmetricEigen {
  Vector values;         ///< descending
  DenseMatrix vectors;   ///< columns, M-orthonormal
};

/// Generalized symmetric-definite eigenproblem A v = λ M v.
SymmetricEigen symmetric_eig(const DenseMatrix& a, const DenseMatrix& m);
SymmetricEigen symmetric_eig(const DenseMatrix& a);

struct ThinSvd {
  DenseMatrix u;
  Vector sigma;  ///< descending
  DenseMatrix v;
};

ThinSvd thin_svd(const DenseMatrix& a);

}  // namespace efvms
