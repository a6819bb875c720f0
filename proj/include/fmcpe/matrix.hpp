#pragma once

#include <vector>

namespace fmcpe {

using Vec = std::vector<double>;

// Small dense row-major matrix of 64-bit floats. This is deliberately not a
// general linear-algebra library: just what the pipeline needs (products,
// Cholesky, SPD solves) on matrices of desk-scale size.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(int rows, int cols);  // zero-filled
  DenseMatrix(int rows, int cols, Vec entries);

  static DenseMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int r, int c) { return entries_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return entries_[static_cast<size_t>(r) * cols_ + c]; }

  double* row(int r) { return entries_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return entries_.data() + static_cast<size_t>(r) * cols_; }

  Vec& entries() { return entries_; }
  const Vec& entries() const { return entries_; }

  void fill(double v);
  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  Vec entries_;
};

// ---------------------------------------------------------------------------
// Matrix products. Loop order is fixed, so results are bit-deterministic.
// ---------------------------------------------------------------------------
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // a * b
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
Vec matvec(const DenseMatrix& a, const Vec& x);
Vec matvec_t(const DenseMatrix& a, const Vec& x);  // a^T * x
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
double frobenius_norm(const DenseMatrix& a);
double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b);

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Throws std::invalid_argument on asymmetric input and std::runtime_error if
// the factorization fails; nothing gets patched silently.
DenseMatrix cholesky(const DenseMatrix& m);

// Solve m x = b given the lower Cholesky factor of m.
Vec cholesky_solve(const DenseMatrix& chol_lower, const Vec& b);
DenseMatrix spd_inverse(const DenseMatrix& m);

// ---------------------------------------------------------------------------
// Vector helpers.
// ---------------------------------------------------------------------------
double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
double squared_distance(const Vec& a, const Vec& b);
Vec vec_add(const Vec& a, const Vec& b);
Vec vec_sub(const Vec& a, const Vec& b);
Vec vec_scale(const Vec& a, double s);
void vec_axpy(Vec& y, double alpha, const Vec& x);  // y += alpha * x
Vec concat(const Vec& a, const Vec& b);
Vec concat(const Vec& a, const Vec& b, const Vec& c);
bool all_finite(const Vec& v);

}  // namespace fmcpe
