#include "deh/simplex.hpp"

#include <map>
#include <mutex>

#include "deh/rng.hpp"

namespace deh {

Matrix<double> simplex_vertices(std::size_t n) {
  require(n >= 2, ErrorKind::invalid_argument, "simplex dimension must be at least 2");
  const double nd = static_cast<double>(n);
  const double kappa = -(1.0 + std::sqrt(nd + 1.0)) / std::pow(nd, 1.5);
  const double mu = std::sqrt(1.0 + 1.0 / nd);
  Matrix<double> p(n, n + 1);
  for (std::size_t r = 0; r < n; ++r) p(r, 0) = 1.0 / std::sqrt(nd);
  for (std::size_t c = 1; c <= n; ++c) {
    for (std::size_t r = 0; r < n; ++r) p(r, c) = kappa;
    p(c - 1, c) += mu;
  }
  return p;
}

ChangeOfBasis change_of_basis(const Matrix<double>& vertices) {
  const std::size_t n = vertices.rows();
  require(vertices.cols() == n + 1, ErrorKind::dimension_mismatch,
          "simplex vertex matrix must be n x (n+1)");
  const double tail = 1.0 / std::sqrt(static_cast<double>(n));
  Matrix<double> m(n + 1, n + 1);
  double p = 0.0;
  for (std::size_t c = 0; c <= n; ++c) {
    double sq = tail * tail;
    for (std::size_t r = 0; r < n; ++r) sq += vertices(r, c) * vertices(r, c);
    const double len = std::sqrt(sq);
    if (c == 0) p = len;
    for (std::size_t r = 0; r < n; ++r) m(r, c) = vertices(r, c) / len;
    m(n, c) = tail / len;
  }
  return {std::move(m), p};
}

SimplexBasis make_simplex_basis(std::size_t n) {
  SimplexBasis basis;
  basis.n = n;
  basis.vertices = simplex_vertices(n);
  const double nd = static_cast<double>(n);
  basis.kappa = -(1.0 + std::sqrt(nd + 1.0)) / std::pow(nd, 1.5);
  basis.mu = std::sqrt(1.0 + 1.0 / nd);
  auto cob = change_of_basis(basis.vertices);
  basis.change = std::move(cob.m);
  basis.p = cob.p;
  const Vec<double> first = basis.vertex(0);
  basis.vertex_rotations.reserve(n + 1);
  basis.vertex_rotations.push_back(Matrix<double>::identity(n));
  for (std::size_t i = 1; i <= n; ++i)
    basis.vertex_rotations.push_back(geodesic_rotation(first, basis.vertex(i)));
  return basis;
}

std::shared_ptr<const SimplexBasis> simplex_basis(std::size_t n) {
  static std::mutex mutex;
  static std::map<std::size_t, std::shared_ptr<const SimplexBasis>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const SimplexBasis>(make_simplex_basis(n));
  return slot;
}

Matrix<double> vertex_projection(const SimplexBasis& basis) {
  return basis.change * basis.vertices.transpose();
}

Matrix<double> simplex_rotation(const SimplexBasis& basis, std::size_t index) {
  require(index <= basis.n, ErrorKind::invalid_argument, "simplex vertex index out of range");
  return basis.vertex_rotations[index];
}

Matrix<double> random_orthogonal(std::size_t n, std::uint64_t seed, int det_sign) {
  require(n >= 1, ErrorKind::invalid_argument, "random_orthogonal: n must be positive");
  require(det_sign == 1 || det_sign == -1, ErrorKind::invalid_argument,
          "random_orthogonal: det_sign must be +1 or -1");
  CounterRng rng(seed, 0x6f72746fULL);
  Matrix<double> g(n, n);
  for (double& x : g.data()) x = rng.gaussian();
  auto [q, r] = householder_qr(g);
  // Fixing sign(r_ii) > 0 makes q Haar distributed.
  for (std::size_t j = 0; j < n; ++j) {
    if (r(j, j) < 0.0)
      for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
  }
  const double det = determinant(q);
  if ((det < 0.0) != (det_sign < 0))
    for (std::size_t i = 0; i < n; ++i) q(i, 0) = -q(i, 0);
  return q;
}

}  // namespace deh
