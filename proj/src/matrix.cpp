#include "fmcpe/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fmcpe {

DenseMatrix::DenseMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), entries_(static_cast<size_t>(rows) * cols, 0.0) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("DenseMatrix: negative dimension");
}

DenseMatrix::DenseMatrix(int rows, int cols, Vec entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("DenseMatrix: negative dimension");
  if (entries_.size() != static_cast<size_t>(rows) * cols) {
    throw std::invalid_argument("DenseMatrix: entry count does not match rows*cols");
  }
}

DenseMatrix DenseMatrix::identity(int n) {
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void DenseMatrix::fill(double v) {
  for (auto& e : entries_) e = v;
}

bool DenseMatrix::all_finite() const {
  for (double e : entries_) {
    if (!std::isfinite(e)) return false;
  }
  return true;
}

namespace {

void check_mul(int an, const char* what, int bn) {
  if (an != bn) {
    throw std::invalid_argument(std::string("matrix product dimension mismatch in ") + what);
  }
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.cols(), "matmul", b.rows());
  DenseMatrix c(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = b.row(k);
      for (int j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.cols(), "matmul_nt", b.cols());
  DenseMatrix c(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += arow[k] * brow[k];
      crow[j] = s;
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  check_mul(a.rows(), "matmul_tn", b.rows());
  DenseMatrix c(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (int i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      double* crow = c.row(i);
      for (int j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
    }
  }
  return c;
}

Vec matvec(const DenseMatrix& a, const Vec& x) {
  check_mul(a.cols(), "matvec", static_cast<int>(x.size()));
  Vec y(static_cast<size_t>(a.rows()), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += arow[j] * x[static_cast<size_t>(j)];
    y[static_cast<size_t>(i)] = s;
  }
  return y;
}

Vec matvec_t(const DenseMatrix& a, const Vec& x) {
  check_mul(a.rows(), "matvec_t", static_cast<int>(x.size()));
  Vec y(static_cast<size_t>(a.cols()), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    const double xi = x[static_cast<size_t>(i)];
    if (xi == 0.0) continue;
    for (int j = 0; j < a.cols(); ++j) y[static_cast<size_t>(j)] += arow[j] * xi;
  }
  return y;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  DenseMatrix c = a;
  for (size_t i = 0; i < c.entries().size(); ++i) c.entries()[i] += b.entries()[i];
  return c;
}

double frobenius_norm(const DenseMatrix& a) {
  double s = 0.0;
  for (double e : a.entries()) s += e * e;
  return std::sqrt(s);
}

double frobenius_distance(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("frobenius_distance: shape mismatch");
  }
  double s = 0.0;
  for (size_t i = 0; i < a.entries().size(); ++i) {
    double d = a.entries()[i] - b.entries()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

DenseMatrix cholesky(const DenseMatrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("cholesky: matrix not square");
  const int n = m.rows();
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(m(i, i)));
  const double sym_tol = 1e-9 * std::max(scale, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(m(i, j) - m(j, i)) > sym_tol) {
        throw std::invalid_argument("cholesky: matrix not symmetric");
      }
    }
  }
  DenseMatrix l(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) {
          throw std::runtime_error("cholesky: matrix not positive definite (pivot " +
                                   std::to_string(i) + ")");
        }
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return l;
}

Vec cholesky_solve(const DenseMatrix& chol_lower, const Vec& b) {
  const int n = chol_lower.rows();
  if (chol_lower.cols() != n || static_cast<int>(b.size()) != n) {
    throw std::invalid_argument("cholesky_solve: dimension mismatch");
  }
  Vec y(b);
  for (int i = 0; i < n; ++i) {  // forward: L y = b
    double s = y[static_cast<size_t>(i)];
    for (int k = 0; k < i; ++k) s -= chol_lower(i, k) * y[static_cast<size_t>(k)];
    y[static_cast<size_t>(i)] = s / chol_lower(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {  // backward: L^T x = y
    double s = y[static_cast<size_t>(i)];
    for (int k = i + 1; k < n; ++k) s -= chol_lower(k, i) * y[static_cast<size_t>(k)];
    y[static_cast<size_t>(i)] = s / chol_lower(i, i);
  }
  return y;
}

DenseMatrix spd_inverse(const DenseMatrix& m) {
  const int n = m.rows();
  DenseMatrix l = cholesky(m);
  DenseMatrix inv(n, n);
  Vec e(static_cast<size_t>(n), 0.0);
  for (int j = 0; j < n; ++j) {
    e[static_cast<size_t>(j)] = 1.0;
    Vec col = cholesky_solve(l, e);
    for (int i = 0; i < n; ++i) inv(i, j) = col[static_cast<size_t>(i)];
    e[static_cast<size_t>(j)] = 0.0;
  }
  return inv;
}

double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

double squared_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: size mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Vec vec_add(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_add: size mismatch");
  Vec c(a);
  for (size_t i = 0; i < c.size(); ++i) c[i] += b[i];
  return c;
}

Vec vec_sub(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("vec_sub: size mismatch");
  Vec c(a);
  for (size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
  return c;
}

Vec vec_scale(const Vec& a, double s) {
  Vec c(a);
  for (auto& v : c) v *= s;
  return c;
}

void vec_axpy(Vec& y, double alpha, const Vec& x) {
  if (y.size() != x.size()) throw std::invalid_argument("vec_axpy: size mismatch");
  for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

Vec concat(const Vec& a, const Vec& b) {
  Vec c;
  c.reserve(a.size() + b.size());
  c.insert(c.end(), a.begin(), a.end());
  c.insert(c.end(), b.begin(), b.end());
  return c;
}

Vec concat(const Vec& a, const Vec& b, const Vec& c) {
  Vec d;
  d.reserve(a.size() + b.size() + c.size());
  d.insert(d.end(), a.begin(), a.end());
  d.insert(d.end(), b.begin(), b.end());
  d.insert(d.end(), c.begin(), c.end());
  return d;
}

bool all_finite(const Vec& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace fmcpe
