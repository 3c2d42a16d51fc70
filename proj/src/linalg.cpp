#include "deh/linalg.hpp"

#include <iomanip>
#include <sstream>

namespace deh {

double max_abs_diff(const Matrix<double>& a, const Matrix<double>& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::dimension_mismatch,
          "max_abs_diff: shape mismatch");
  return max_abs_diff(std::span<const double>(a.data()), std::span<const double>(b.data()));
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), ErrorKind::dimension_mismatch, "max_abs_diff: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double orthogonality_residual(const Matrix<double>& a) {
  return max_abs_diff(a.transpose() * a, Matrix<double>::identity(a.cols()));
}

double determinant(Matrix<double> a) {
  require(a.square(), ErrorKind::dimension_mismatch, "determinant of a non-square matrix");
  const std::size_t n = a.rows();
  double det = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(pivot, k))) pivot = i;
    if (a(pivot, k) == 0.0) return 0.0;
    if (pivot != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(pivot, j));
      det = -det;
    }
    det *= a(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      for (std::size_t j = k; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return det;
}

QR householder_qr(const Matrix<double>& a) {
  require(a.square(), ErrorKind::dimension_mismatch, "householder_qr expects a square matrix");
  const std::size_t n = a.rows();
  Matrix<double> r = a;
  Matrix<double> q = Matrix<double>::identity(n);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    double sigma = 0.0;
    for (std::size_t i = k; i < n; ++i) sigma += r(i, k) * r(i, k);
    const double alpha = std::sqrt(sigma);
    if (alpha == 0.0) continue;
    // v = x + sign(x0)·‖x‖·e0 avoids cancellation.
    std::vector<double> v(n - k);
    for (std::size_t i = k; i < n; ++i) v[i - k] = r(i, k);
    v[0] += (v[0] >= 0.0 ? alpha : -alpha);
    double vv = 0.0;
    for (double x : v) vv += x * x;
    if (vv == 0.0) continue;
    const double beta = 2.0 / vv;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < n; ++i) s += v[i - k] * r(i, j);
      s *= beta;
      for (std::size_t i = k; i < n; ++i) r(i, j) -= s * v[i - k];
    }
    for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0.0;
    // q accumulates H_0 H_1 ... H_k from the right.
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = k; j < n; ++j) s += q(i, j) * v[j - k];
      s *= beta;
      for (std::size_t j = k; j < n; ++j) q(i, j) -= s * v[j - k];
    }
  }
  return {std::move(q), std::move(r)};
}

std::string to_string(const Matrix<double>& m, int precision) {
  std::ostringstream os;
  os << std::setprecision(precision);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << (i == 0 ? "[[" : " [");
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) os << ", ";
      os << m(i, j);
    }
    os << (i + 1 == m.rows() ? "]]" : "]\n");
  }
  return os.str();
}

}  // namespace deh
