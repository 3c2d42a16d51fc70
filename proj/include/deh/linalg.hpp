#pragma once

// Small dense row-major matrices and vectors. Sizes are a handful to a few
// dozen entries; everything is templated on the scalar so the same code runs
// for float, double and ad::Var.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "deh/autodiff.hpp"
#include "deh/error.hpp"

namespace deh {

template <class T>
using Vec = std::vector<T>;

template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, ErrorKind::dimension_mismatch,
            "matrix data length does not match shape");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  Vec<T> column(std::size_t c) const {
    Vec<T> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
  }

  void set_column(std::size_t c, std::span<const T> v) {
    require(v.size() == rows_, ErrorKind::dimension_mismatch, "column length mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
  }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  template <class U>
  Matrix<U> cast() const {
    Matrix<U> out(rows_, cols_);
    for (std::size_t k = 0; k < data_.size(); ++k) out.data()[k] = U(data_[k]);
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// Mixed-scalar products let constant double matrices act on Var vectors.
template <class A, class B>
using product_t = decltype(std::declval<A>() * std::declval<B>());

template <class A, class B>
Matrix<product_t<A, B>> operator*(const Matrix<A>& a, const Matrix<B>& b) {
  require(a.cols() == b.rows(), ErrorKind::dimension_mismatch,
          "matrix product: inner dimensions differ");
  using T = product_t<A, B>;
  Matrix<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      T acc = T(a(i, 0)) * T(b(0, j));
      for (std::size_t k = 1; k < a.cols(); ++k) acc += T(a(i, k)) * T(b(k, j));
      out(i, j) = acc;
    }
  }
  return out;
}

template <class A, class B>
Vec<product_t<A, B>> matvec(const Matrix<A>& a, std::span<const B> x) {
  require(a.cols() == x.size(), ErrorKind::dimension_mismatch,
          "matrix-vector product: dimension mismatch");
  using T = product_t<A, B>;
  Vec<T> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T acc = T(a(i, 0)) * T(x[0]);
    for (std::size_t k = 1; k < a.cols(); ++k) acc += T(a(i, k)) * T(x[k]);
    out[i] = acc;
  }
  return out;
}

template <class A, class B>
Vec<product_t<A, B>> matvec(const Matrix<A>& a, const Vec<B>& x) {
  return matvec(a, std::span<const B>(x));
}

template <class T>
T dot(std::span<const T> a, std::span<const T> b) {
  require(a.size() == b.size(), ErrorKind::dimension_mismatch, "dot: length mismatch");
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  return dot(std::span<const T>(a), std::span<const T>(b));
}

template <class T>
T squared_norm(std::span<const T> a) {
  T acc = T(0);
  for (const T& x : a) acc += x * x;
  return acc;
}

template <class T>
T squared_norm(const Vec<T>& a) {
  return squared_norm(std::span<const T>(a));
}

template <class T>
T norm(const Vec<T>& a) {
  using std::sqrt;
  return sqrt(squared_norm(a));
}

template <class T>
Vec<T> scaled(const Vec<T>& a, const T& s) {
  Vec<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

template <class T>
Vec<T> operator+(const Vec<T>& a, const Vec<T>& b) {
  require(a.size() == b.size(), ErrorKind::dimension_mismatch, "vector sum: length mismatch");
  Vec<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <class T>
Vec<T> operator-(const Vec<T>& a, const Vec<T>& b) {
  require(a.size() == b.size(), ErrorKind::dimension_mismatch,
          "vector difference: length mismatch");
  Vec<T> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <class U, class T>
Vec<U> cast_vec(const Vec<T>& v) {
  Vec<U> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = U(v[i]);
  return out;
}

template <class T>
auto values_of(const Matrix<T>& m) {
  using R = decltype(value_of(std::declval<T>()));
  Matrix<R> out(m.rows(), m.cols());
  for (std::size_t k = 0; k < m.data().size(); ++k) out.data()[k] = value_of(m.data()[k]);
  return out;
}

template <class T>
auto values_of(const Vec<T>& v) {
  using R = decltype(value_of(std::declval<T>()));
  Vec<R> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = value_of(v[k]);
  return out;
}

// Largest absolute entry of a - b.
double max_abs_diff(const Matrix<double>& a, const Matrix<double>& b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

// Largest absolute entry of AᵀA - I.
double orthogonality_residual(const Matrix<double>& a);

// LU with partial pivoting.
double determinant(Matrix<double> a);

// Householder QR of a square matrix: a = q * r.
struct QR {
  Matrix<double> q;
  Matrix<double> r;
};
QR householder_qr(const Matrix<double>& a);

std::string to_string(const Matrix<double>& m, int precision = 6);

}  // namespace deh
