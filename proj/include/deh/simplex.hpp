#pragma once

// Regular n-simplex constructions, the simplex change of basis and the
// rotations built from them.

#include <cstdint>
#include <memory>
#include <vector>

#include "deh/linalg.hpp"

namespace deh {

struct SimplexBasis {
  std::size_t n = 0;
  Matrix<double> vertices;       // n x (n+1), column i is vertex p_i
  Matrix<double> change;         // (n+1) x (n+1), orthogonal
  double p = 0.0;                // norm of [p_i; n^-1/2]
  double kappa = 0.0;
  double mu = 0.0;
  std::vector<Matrix<double>> vertex_rotations;  // n x n, vertex 0 -> vertex i

  Vec<double> vertex(std::size_t i) const { return vertices.column(i); }
};

// Columns: n^{-1/2}·1 followed by kappa·1 + mu·e_{i-1}.
Matrix<double> simplex_vertices(std::size_t n);

struct ChangeOfBasis {
  Matrix<double> m;
  double p = 0.0;
};
ChangeOfBasis change_of_basis(const Matrix<double>& vertices);

SimplexBasis make_simplex_basis(std::size_t n);

// Shared immutable basis per dimension.
std::shared_ptr<const SimplexBasis> simplex_basis(std::size_t n);

// M·Pᵀ, which equals p·[I_n; 0ᵀ].
Matrix<double> vertex_projection(const SimplexBasis& basis);

// Rotation taking vertex 0 to vertex `index` (0-based).
Matrix<double> simplex_rotation(const SimplexBasis& basis, std::size_t index);

// Orthogonal matrix with determinant sign `det_sign`, from the QR of a
// Gaussian matrix drawn with CounterRng(seed).
Matrix<double> random_orthogonal(std::size_t n, std::uint64_t seed, int det_sign);

// diag(r, I_extra).
template <class T>
Matrix<T> embed_transform(const Matrix<T>& r, std::size_t extra) {
  require(r.square(), ErrorKind::dimension_mismatch, "embed_transform expects a square matrix");
  const std::size_t n = r.rows();
  Matrix<T> out = Matrix<T>::identity(n + extra);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = r(i, j);
  return out;
}

namespace detail {

// I - 2 w wᵀ / (wᵀw)
template <class T>
Matrix<T> householder(const Vec<T>& w) {
  const std::size_t n = w.size();
  const T scale = T(2) / squared_norm(w);
  Matrix<T> h = Matrix<T>::identity(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) h(i, j) -= scale * w[i] * w[j];
  return h;
}

template <class T>
Vec<T> unit_orthogonal_to(const Vec<T>& u) {
  // Start from the coordinate axis least aligned with u.
  std::size_t axis = 0;
  for (std::size_t i = 1; i < u.size(); ++i)
    if (std::abs(value_of(u[i])) < std::abs(value_of(u[axis]))) axis = i;
  Vec<T> w(u.size(), T(0));
  const T along = u[axis];
  for (std::size_t i = 0; i < u.size(); ++i) w[i] = -along * u[i];
  w[axis] += T(1);
  using std::sqrt;
  return scaled(w, T(1) / sqrt(squared_norm(w)));
}

}  // namespace detail

// Rotation Q (det +1) with Q·u/‖u‖ = v/‖v‖, formed as two Householder
// reflections: first across (u+v)^⊥, which sends u to -v, then across v^⊥.
// Antipodal inputs use an axis w ⊥ u instead: reflect across u^⊥, then w^⊥.
template <class T>
Matrix<T> geodesic_rotation(const Vec<T>& u, const Vec<T>& v) {
  require(u.size() == v.size(), ErrorKind::dimension_mismatch,
          "geodesic_rotation: vectors differ in length");
  require(!u.empty(), ErrorKind::invalid_argument, "geodesic_rotation: empty vectors");
  using std::sqrt;
  const T nu = sqrt(squared_norm(u));
  const T nv = sqrt(squared_norm(v));
  require(value_of(nu) > 0 && value_of(nv) > 0, ErrorKind::degenerate,
          "geodesic_rotation: zero-norm input");
  const Vec<T> a = scaled(u, T(1) / nu);
  const Vec<T> b = scaled(v, T(1) / nv);
  const Vec<T> sum = a + b;

  if (u.size() == 1) {
    require(value_of(a[0]) == value_of(b[0]), ErrorKind::degenerate,
            "geodesic_rotation: SO(1) cannot map x to -x");
    return Matrix<T>::identity(1);
  }
  if (value_of(squared_norm(sum)) < 1e-14) {
    const Vec<T> w = detail::unit_orthogonal_to(a);
    return detail::householder(w) * detail::householder(a);
  }
  return detail::householder(b) * detail::householder(sum);
}

}  // namespace deh
