#include "efvms/numerics.hpp"

#include <Eigen/SparseCore>

#include <umfpack.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "efvms/errors.hpp"

namespace efvms {

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols, std::vector<int> row_offsets,
                           std::vector<int> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      offsets_(std::move(row_offsets)),
      cols_idx_(std::move(col_indices)),
      values_(std::move(values)) {
  if (offsets_.size() != rows_ + 1 || cols_idx_.size() != values_.size() ||
      static_cast<std::size_t>(offsets_.back()) != values_.size()) {
    throw Error("inconsistent CSR arrays");
  }
  for (std::size_t i = 0; i < rows_; ++i) {
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      if (cols_idx_[k] < 0 || static_cast<std::size_t>(cols_idx_[k]) >= cols_) throw Error("CSR column out of range");
      if (k > offsets_[i] && cols_idx_[k] <= cols_idx_[k - 1]) throw Error("CSR columns not strictly increasing");
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(),
            [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  std::vector<int> offsets(rows + 1, 0);
  std::vector<int> cidx;
  std::vector<double> vals;
  cidx.reserve(triplets.size());
  vals.reserve(triplets.size());
  int last_row = -1, last_col = -1;
  for (const auto& t : triplets) {
    if (t.row < 0 || static_cast<std::size_t>(t.row) >= rows || t.col < 0 || static_cast<std::size_t>(t.col) >= cols) {
      throw Error("triplet index out of range");
    }
    if (t.row == last_row && t.col == last_col) {
      vals.back() += t.value;
      continue;
    }
    cidx.push_back(t.col);
    vals.push_back(t.value);
    ++offsets[t.row + 1];
    last_row = t.row;
    last_col = t.col;
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  return SparseMatrix(rows, cols, std::move(offsets), std::move(cidx), std::move(vals));
}

SparseMatrix SparseMatrix::pattern(std::size_t rows, std::size_t cols, std::vector<std::vector<int>> columns_per_row) {
  if (columns_per_row.size() != rows) throw Error("pattern row count mismatch");
  std::vector<int> offsets(rows + 1, 0);
  std::vector<int> cidx;
  for (std::size_t i = 0; i < rows; ++i) {
    auto& c = columns_per_row[i];
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    cidx.insert(cidx.end(), c.begin(), c.end());
    offsets[i + 1] = static_cast<int>(cidx.size());
  }
  std::vector<double> vals(cidx.size(), 0.0);
  return SparseMatrix(rows, cols, std::move(offsets), std::move(cidx), std::move(vals));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<int> offsets(n + 1);
  std::vector<int> cidx(n);
  std::iota(offsets.begin(), offsets.end(), 0);
  std::iota(cidx.begin(), cidx.end(), 0);
  return SparseMatrix(n, n, std::move(offsets), std::move(cidx), std::vector<double>(n, 1.0));
}

std::ptrdiff_t SparseMatrix::find(int i, int j) const {
  const auto begin = cols_idx_.begin() + offsets_[i];
  const auto end = cols_idx_.begin() + offsets_[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return -1;
  return it - cols_idx_.begin();
}

double SparseMatrix::at(int i, int j) const {
  const auto k = find(i, j);
  return k < 0 ? 0.0 : values_[k];
}

void SparseMatrix::add(int i, int j, double v) {
  const auto k = find(i, j);
  if (k < 0) throw Error("entry (" + std::to_string(i) + "," + std::to_string(j) + ") outside sparsity pattern");
  values_[k] += v;
}

void SparseMatrix::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

DenseMatrix multiply(const SparseMatrix& a, const DenseMatrix& b) {
  if (static_cast<Eigen::Index>(a.cols()) != b.rows()) throw Error("sparse-dense product: dimension mismatch");
  const Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> view(
      static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(a.cols()), static_cast<Eigen::Index>(a.nnz()),
      a.row_offsets().data(), a.col_indices().data(), a.values().data());
  return view * b;
}

Vector SparseMatrix::multiply(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != cols_) throw Error("matvec dimension mismatch");
  Vector y(static_cast<Eigen::Index>(rows_));
  for (std::size_t i = 0; i < rows_; ++i) {
    double s = 0.0;
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) s += values_[k] * x[cols_idx_[k]];
    y[static_cast<Eigen::Index>(i)] = s;
  }
  return y;
}

Vector SparseMatrix::multiply_transpose(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != rows_) throw Error("transpose matvec dimension mismatch");
  Vector y = Vector::Zero(static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < rows_; ++i) {
    const double xi = x[static_cast<Eigen::Index>(i)];
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) y[cols_idx_[k]] += values_[k] * xi;
  }
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  std::vector<Triplet> t;
  t.reserve(values_.size());
  for (std::size_t i = 0; i < rows_; ++i) {
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) t.push_back({cols_idx_[k], static_cast<int>(i), values_[k]});
  }
  return from_triplets(cols_, rows_, std::move(t));
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d = DenseMatrix::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
  for (std::size_t i = 0; i < rows_; ++i) {
    for (int k = offsets_[i]; k < offsets_[i + 1]; ++k) d(static_cast<Eigen::Index>(i), cols_idx_[k]) = values_[k];
  }
  return d;
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && offsets_ == other.offsets_ && cols_idx_ == other.cols_idx_;
}

void SparseMatrix::axpy(double alpha, const SparseMatrix& other) {
  if (!same_pattern(other)) throw Error("axpy requires identical sparsity patterns");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += alpha * other.values_[k];
}

double SparseMatrix::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

SparseMatrix combine(std::span<const std::pair<double, const SparseMatrix*>> terms) {
  if (terms.empty()) throw Error("combine needs at least one term");
  SparseMatrix out = *terms.front().second;
  for (double& v : out.values()) v *= terms.front().first;
  for (std::size_t i = 1; i < terms.size(); ++i) out.axpy(terms[i].first, *terms[i].second);
  return out;
}

// UMFPACK works on compressed columns; our CSR arrays are the CSC arrays of
// the transpose, so the factorization is of Aᵀ and solves use UMFPACK_At.
struct SparseLU::Impl {
  std::size_t n = 0;
  std::vector<int> offsets;
  std::vector<int> indices;
  std::vector<double> values;
  void* symbolic = nullptr;
  void* numeric = nullptr;
  double control[UMFPACK_CONTROL];

  Impl() { umfpack_di_defaults(control); }
  ~Impl() { release(); }

  void release_numeric() {
    if (numeric) umfpack_di_free_numeric(&numeric);
    numeric = nullptr;
  }
  void release() {
    release_numeric();
    if (symbolic) umfpack_di_free_symbolic(&symbolic);
    symbolic = nullptr;
  }

  void analyze() {
    const int ni = static_cast<int>(n);
    const int status =
        umfpack_di_symbolic(ni, ni, offsets.data(), indices.data(), values.data(), &symbolic, control, nullptr);
    if (status != UMFPACK_OK) throw Error("sparse LU symbolic analysis failed (status " + std::to_string(status) + ")");
  }

  void factor() {
    release_numeric();
    const int status = umfpack_di_numeric(offsets.data(), indices.data(), values.data(), symbolic, &numeric, control,
                                          nullptr);
    if (status == UMFPACK_WARNING_singular_matrix) throw SingularMatrixError(singular_pivot());
    if (status != UMFPACK_OK) throw Error("sparse LU numeric factorization failed (status " + std::to_string(status) + ")");
  }

  std::size_t singular_pivot() const {
    int lnz = 0, unz = 0, nr = 0, nc = 0, nz_udiag = 0;
    umfpack_di_get_lunz(&lnz, &unz, &nr, &nc, &nz_udiag, numeric);
    std::vector<double> udiag(n);
    std::vector<int> q(n);
    umfpack_di_get_numeric(nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, q.data(), udiag.data(),
                           nullptr, nullptr, numeric);
    for (std::size_t k = 0; k < n; ++k) {
      if (udiag[k] == 0.0 || !std::isfinite(udiag[k])) return static_cast<std::size_t>(q[k]);
    }
    return n;
  }

  void load(const SparseMatrix& a) {
    if (a.rows() != a.cols()) throw Error("sparse LU needs a square matrix");
    n = a.rows();
    offsets.assign(a.row_offsets().begin(), a.row_offsets().end());
    indices.assign(a.col_indices().begin(), a.col_indices().end());
    values.assign(a.values().begin(), a.values().end());
  }
};

SparseLU::SparseLU(const SparseMatrix& a) : impl_(std::make_unique<Impl>()) {
  impl_->load(a);
  impl_->analyze();
  impl_->factor();
}

SparseLU::~SparseLU() = default;
SparseLU::SparseLU(SparseLU&&) noexcept = default;
SparseLU& SparseLU::operator=(SparseLU&&) noexcept = default;

void SparseLU::refactor(const SparseMatrix& a) {
  if (a.rows() != impl_->n || !std::equal(a.row_offsets().begin(), a.row_offsets().end(), impl_->offsets.begin()) ||
      !std::equal(a.col_indices().begin(), a.col_indices().end(), impl_->indices.begin())) {
    impl_->release();
    impl_->load(a);
    impl_->analyze();
  } else {
    impl_->values.assign(a.values().begin(), a.values().end());
  }
  impl_->factor();
}

Vector SparseLU::solve(const Vector& b) const {
  if (static_cast<std::size_t>(b.size()) != impl_->n) throw Error("sparse LU solve dimension mismatch");
  Vector x(b.size());
  const int status = umfpack_di_solve(UMFPACK_At, impl_->offsets.data(), impl_->indices.data(), impl_->values.data(),
                                      x.data(), b.data(), impl_->numeric, impl_->control, nullptr);
  if (status != UMFPACK_OK) throw Error("sparse LU solve failed (status " + std::to_string(status) + ")");
  return x;
}

std::size_t SparseLU::size() const { return impl_->n; }

SparseLU sparse_lu_factor(const SparseMatrix& a) { return SparseLU(a); }

SymmetricEigen symmetric_eig(const DenseMatrix& a, const DenseMatrix& m) {
  if (a.rows() != a.cols() || m.rows() != m.cols() || a.rows() != m.rows()) {
    throw Error("symmetric_eig: dimension mismatch");
  }
  Eigen::LLT<DenseMatrix> llt(m);
  if (llt.info() != Eigen::Success) throw Error("symmetric_eig: M is not symmetric positive definite");
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> solver(a, m);
  if (solver.info() != Eigen::Success) throw Error("symmetric_eig: eigensolver failed");
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

SymmetricEigen symmetric_eig(const DenseMatrix& a) {
  Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(a);
  if (solver.info() != Eigen::Success) throw Error("symmetric_eig: eigensolver failed");
  SymmetricEigen out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

ThinSvd thin_svd(const DenseMatrix& a) {
  Eigen::BDCSVD<DenseMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

}  // namespace efvms
