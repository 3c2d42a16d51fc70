#include "support.hpp"

#include "deh/error.hpp"
#include "deh/simplex.hpp"
#include "deh/verify.hpp"

using namespace deh;

namespace {

// Regular simplex built a second way: centre the standard basis of R^{n+1}
// and express it in an orthonormal basis of the plane orthogonal to 1. Only
// the Gram matrix is comparable, since the two frames differ by a rotation.
Matrix<double> oracle_gram(std::size_t n) {
  const std::size_t d = n + 1;
  std::vector<Vec<double>> basis;
  for (std::size_t k = 0; k < n; ++k) {
    Vec<double> v(d, 0.0);
    v[k] = 1.0;
    v[k + 1] = -1.0;
    for (const auto& b : basis) v = v - scaled(b, dot(v, b));
    basis.push_back(scaled(v, 1.0 / norm(v)));
  }
  std::vector<Vec<double>> verts;
  for (std::size_t i = 0; i < d; ++i) {
    Vec<double> e(d, -1.0 / static_cast<double>(d));
    e[i] += 1.0;
    Vec<double> c(n);
    for (std::size_t k = 0; k < n; ++k) c[k] = dot(e, basis[k]);
    verts.push_back(scaled(c, 1.0 / norm(c)));
  }
  Matrix<double> g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g(i, j) = dot(verts[i], verts[j]);
  return g;
}

}  // namespace

TEST_CASE("simplex vertices match the independent construction") {
  for (std::size_t n = 2; n <= 10; ++n) {
    const Matrix<double> p = simplex_vertices(n);
    CHECK(max_abs_diff(p.transpose() * p, oracle_gram(n)) < 1e-13);
    for (std::size_t i = 0; i <= n; ++i) {
      CHECK(std::abs(squared_norm(p.column(i)) - 1.0) < 1e-14);
      for (std::size_t j = i + 1; j <= n; ++j)
        CHECK(dot(p.column(i), p.column(j)) == doctest::Approx(-1.0 / n).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(simplex_vertices(1), Error);
}

TEST_CASE("published instances for n = 2, 3, 4") {
  const double s3 = std::sqrt(3.0);
  const SimplexBasis b2 = make_simplex_basis(2);
  const double k = 1 / std::sqrt(2.0);
  CHECK(max_abs_diff(b2.vertices, Matrix<double>(2, 3, {k, k * (s3 - 1) / 2, -k * (s3 + 1) / 2, k,
                                                         -k * (s3 + 1) / 2, k * (s3 - 1) / 2})) <
        1e-15);
  CHECK(b2.p == doctest::Approx(std::sqrt(1.5)).epsilon(1e-15));

  const SimplexBasis b3 = make_simplex_basis(3);
  const double r = 1 / s3;
  CHECK(max_abs_diff(b3.vertices,
                     Matrix<double>(3, 4, {r, r, -r, -r, r, -r, r, -r, r, -r, -r, r})) < 1e-15);
  CHECK(max_abs_diff(b3.change, Matrix<double>(4, 4, {.5, .5, -.5, -.5, .5, -.5, .5, -.5, .5, -.5,
                                                      -.5, .5, .5, .5, .5, .5})) < 1e-15);
  CHECK(b3.p == doctest::Approx(2 / s3).epsilon(1e-15));
  Matrix<double> expected(4, 3);
  for (std::size_t i = 0; i < 3; ++i) expected(i, i) = 2 / s3;
  CHECK(max_abs_diff(vertex_projection(b3), expected) < 1e-15);

  CHECK(make_simplex_basis(4).p == doctest::Approx(std::sqrt(5.0) / 2).epsilon(1e-15));

  for (const NumericInstance& inst : numeric_instances()) {
    const SimplexBasis b = make_simplex_basis(inst.n);
    for (std::size_t i = 0; i <= inst.n; ++i)
      for (std::size_t j = 0; j <= inst.n; ++j)
        CHECK(std::abs(b.change(i, j) - inst.change[i][j]) < 1e-12);
  }
}

TEST_CASE("change of basis is orthogonal with parity-dependent determinant") {
  for (std::size_t n = 2; n <= 10; ++n) {
    const SimplexBasis b = make_simplex_basis(n);
    CHECK(orthogonality_residual(b.change) < 1e-12);
    CHECK(determinant(b.change) == doctest::Approx(n % 2 == 1 ? 1.0 : -1.0).epsilon(1e-12));
    Matrix<double> target(n + 1, n);
    for (std::size_t i = 0; i < n; ++i) target(i, i) = b.p;
    CHECK(max_abs_diff(vertex_projection(b), target) < 1e-12);
  }
}

TEST_CASE("geodesic rotation") {
  CounterRng rng(11);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Vec<double> u = test::gaussian_vec(rng, 6), v = test::gaussian_vec(rng, 6);
    const Matrix<double> q = geodesic_rotation(u, v);
    worst = std::max(worst, orthogonality_residual(q));
    worst = std::max(worst, test::max_abs(matvec(q, scaled(u, 1 / norm(u))), scaled(v, 1 / norm(v))));
    CHECK(determinant(q) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(worst < 1e-12);

  SUBCASE("antipodal inputs still give a rotation") {
    const Vec<double> u{1.0, 2.0, -0.5};
    const Matrix<double> q = geodesic_rotation(u, scaled(u, -3.0));
    CHECK(orthogonality_residual(q) < 1e-14);
    CHECK(determinant(q) == doctest::Approx(1.0));
    CHECK(test::max_abs(matvec(q, u), scaled(u, -1.0)) < 1e-14);
  }
  SUBCASE("parallel inputs give the identity") {
    const Vec<double> u{0.3, -0.1};
    CHECK(max_abs_diff(geodesic_rotation(u, scaled(u, 2.0)), Matrix<double>::identity(2)) < 1e-15);
  }
  SUBCASE("zero input is degenerate") {
    CHECK_THROWS_AS(geodesic_rotation(Vec<double>{0.0, 0.0}, Vec<double>{1.0, 0.0}), Error);
  }
}

TEST_CASE("vertex rotations") {
  const SimplexBasis b = make_simplex_basis(3);
  CHECK(max_abs_diff(simplex_rotation(b, 0), Matrix<double>::identity(3)) < 1e-15);
  const double r = 1 / std::sqrt(3.0);
  const Vec<double> moved = matvec(simplex_rotation(b, 1), Vec<double>{r, r, r});
  CHECK(test::max_abs(moved, Vec<double>{r, -r, -r}) < 1e-15);
  CHECK_THROWS_AS(simplex_rotation(b, 4), Error);
}

TEST_CASE("random orthogonal matrices and embedding") {
  for (std::size_t n = 1; n <= 7; ++n)
    for (int sign : {1, -1}) {
      const Matrix<double> r = random_orthogonal(n, 100 + n, sign);
      CHECK(orthogonality_residual(r) < 1e-14);
      CHECK(determinant(r) == doctest::Approx(sign).epsilon(1e-12));
      CHECK(max_abs_diff(r, random_orthogonal(n, 100 + n, sign)) == 0.0);
      const Matrix<double> e = embed_transform(r, 2);
      CHECK(orthogonality_residual(e) < 1e-14);
      CHECK(determinant(e) == doctest::Approx(sign).epsilon(1e-12));
    }
  Matrix<double> shear = Matrix<double>::identity(3);
  shear(0, 1) = 0.5;
  CHECK(orthogonality_residual(embed_transform(shear, 2)) > 0.1);
  CHECK_THROWS_AS(random_orthogonal(3, 1, 0), Error);
}
