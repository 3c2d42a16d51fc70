#pragma once

// Spherical neurons on conformally embedded points and the O(n)-equivariant
// hypersphere bank built from one learnable sphere and the regular simplex.

#include <optional>

#include "deh/linalg.hpp"
#include "deh/simplex.hpp"

namespace deh {

inline constexpr double kCenterEpsilon = 1e-12;
inline constexpr double kNormEpsilon = 1e-12;

// (x_1..x_n, -1, -½‖x‖²)
template <class T>
Vec<T> embed(std::span<const T> x) {
  Vec<T> out(x.size() + 2);
  T sq = T(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i];
    sq += x[i] * x[i];
  }
  out[x.size()] = T(-1);
  out[x.size() + 1] = T(-0.5) * sq;
  return out;
}

template <class T>
Vec<T> embed(const Vec<T>& x) {
  return embed(std::span<const T>(x));
}

// XᵀS; positive inside, zero on, negative outside the sphere.
template <class T>
T sphere_activation(const Vec<T>& embedded, const Vec<T>& sphere) {
  require(embedded.size() == sphere.size(), ErrorKind::dimension_mismatch,
          "sphere_activation: embedded point and sphere differ in length");
  return dot(embedded, sphere);
}

// Normalized sphere parameters (c, ½(‖c‖² - r²), 1).
inline Vec<double> make_sphere(const Vec<double>& center, double radius) {
  Vec<double> s(center.size() + 2);
  for (std::size_t i = 0; i < center.size(); ++i) s[i] = center[i];
  s[center.size()] = 0.5 * (squared_norm(center) - radius * radius);
  s[center.size() + 1] = 1.0;
  return s;
}

// Center of a possibly non-normalized sphere. When the homogeneous weight
// s_{n+2} vanishes, only the direction (s_1..s_n) is returned.
template <class T>
Vec<T> sphere_center(const Vec<T>& sphere) {
  require(sphere.size() >= 3, ErrorKind::dimension_mismatch, "sphere needs at least 3 entries");
  const std::size_t n = sphere.size() - 2;
  Vec<T> head(sphere.begin(), sphere.begin() + static_cast<std::ptrdiff_t>(n));
  const T weight = sphere[n + 1];
  if (std::abs(value_of(weight)) > kCenterEpsilon) return scaled(head, T(1) / weight);
  require(std::sqrt(value_of(squared_norm(head))) > kCenterEpsilon, ErrorKind::degenerate,
          "degenerate sphere: center is undefined");
  return head;
}

enum class RotationGrad {
  full,  // differentiate through the geodesic rotation
  stop,  // treat the geodesic rotation as a constant
};

template <class T>
struct HypersphereNeuron {
  std::size_t n = 0;
  Vec<T> sphere;
  Matrix<T> bank;      // (n+1) x (n+2)
  Matrix<T> rotation;  // geodesic rotation R_O, n x n
  std::optional<T> bias;
  std::optional<T> norm_scale;
};

// Rows are R_Oᵀ R_{T_i} R_O S with the rotations acting on the first n
// coordinates; the last two sphere entries are copied unchanged.
//
// `fixed_rotation`, when given, replaces the geodesic rotation outright.
template <class T>
HypersphereNeuron<T> build_neuron(const Vec<T>& sphere, const SimplexBasis& basis,
                                  RotationGrad mode = RotationGrad::full,
                                  const Matrix<double>* fixed_rotation = nullptr) {
  const std::size_t n = basis.n;
  require(sphere.size() == n + 2, ErrorKind::dimension_mismatch,
          "build_neuron: sphere must have n+2 entries");
  HypersphereNeuron<T> neuron;
  neuron.n = n;
  neuron.sphere = sphere;

  const Vec<T> center = sphere_center(sphere);
  if (fixed_rotation != nullptr) {
    require(fixed_rotation->rows() == n && fixed_rotation->cols() == n,
            ErrorKind::dimension_mismatch, "build_neuron: fixed rotation has wrong shape");
    neuron.rotation = fixed_rotation->template cast<T>();
  } else if (mode == RotationGrad::stop) {
    neuron.rotation =
        geodesic_rotation(cast_vec<double>(values_of(center)), basis.vertex(0)).template cast<T>();
  } else {
    neuron.rotation = geodesic_rotation(center, cast_vec<T>(basis.vertex(0)));
  }

  const Vec<T> head(sphere.begin(), sphere.begin() + static_cast<std::ptrdiff_t>(n));
  const Vec<T> aligned = matvec(neuron.rotation, head);
  const Matrix<T> back = neuron.rotation.transpose();

  neuron.bank = Matrix<T>(n + 1, n + 2);
  for (std::size_t i = 0; i <= n; ++i) {
    const Vec<T> moved = matvec(basis.vertex_rotations[i].template cast<T>(), aligned);
    const Vec<T> row = matvec(back, moved);
    for (std::size_t j = 0; j < n; ++j) neuron.bank(i, j) = row[j];
    neuron.bank(i, n) = sphere[n];
    neuron.bank(i, n + 1) = sphere[n + 1];
  }
  return neuron;
}

template <class T>
Vec<T> add_bias(Vec<T> y, const T& b) {
  for (T& v : y) v += b;
  return y;
}

// B·X, plus b·1 when the neuron carries a bias.
template <class T>
Vec<T> forward(const HypersphereNeuron<T>& neuron, const Vec<T>& embedded) {
  require(embedded.size() == neuron.n + 2, ErrorKind::dimension_mismatch,
          "forward: embedded point has wrong dimension");
  Vec<T> y = matvec(neuron.bank, embedded);
  if (neuron.bias) y = add_bias(std::move(y), *neuron.bias);
  return y;
}

template <class T>
struct Normalized {
  Vec<T> values;
  bool degenerate = false;
};

// Y/‖Y‖; a (near) zero Y passes through with the degenerate flag set.
template <class T>
Normalized<T> normalize(const Vec<T>& y) {
  using std::sqrt;
  const T len = sqrt(squared_norm(y));
  if (!(value_of(len) > kNormEpsilon)) return {y, true};
  return {scaled(y, T(1) / len), false};
}

template <class T>
T sigmoid(const T& a) {
  using std::exp;
  return T(1) / (T(1) + exp(-a));
}

// Y / (σ(a)(‖Y‖ - 1) + 1)
template <class T>
Vec<T> nonlinear_normalize(const Vec<T>& y, const T& a) {
  using std::sqrt;
  const T len = sqrt(squared_norm(y));
  const T denom = sigmoid(a) * (len - T(1)) + T(1);
  require(value_of(denom) > kNormEpsilon, ErrorKind::numeric,
          "nonlinear_normalize: denominator vanishes");
  return scaled(y, T(1) / denom);
}

// Mᵀ diag(R_O,1) diag(R,1) diag(R_O,1)ᵀ M
Matrix<double> output_representation(const Matrix<double>& r,
                                     const HypersphereNeuron<double>& neuron,
                                     const SimplexBasis& basis);

// Upper-left n x n block of diag(R_O,1)ᵀ M V Mᵀ diag(R_O,1).
Matrix<double> recover_transform(const Matrix<double>& v, const HypersphereNeuron<double>& neuron,
                                 const SimplexBasis& basis);

}  // namespace deh
