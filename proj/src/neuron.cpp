#include "deh/neuron.hpp"

namespace deh {

Matrix<double> output_representation(const Matrix<double>& r,
                                     const HypersphereNeuron<double>& neuron,
                                     const SimplexBasis& basis) {
  require(r.square() && r.rows() == neuron.n, ErrorKind::dimension_mismatch,
          "output_representation: transform has wrong shape");
  require(orthogonality_residual(r) <= 1e-8, ErrorKind::invalid_argument,
          "output_representation: transform is not orthogonal");
  const Matrix<double> ro = embed_transform(neuron.rotation, 1);
  const Matrix<double> rr = embed_transform(r, 1);
  return basis.change.transpose() * ro * rr * ro.transpose() * basis.change;
}

Matrix<double> recover_transform(const Matrix<double>& v, const HypersphereNeuron<double>& neuron,
                                 const SimplexBasis& basis) {
  const std::size_t n = neuron.n;
  require(v.square() && v.rows() == n + 1, ErrorKind::dimension_mismatch,
          "recover_transform: representation has wrong shape");
  const Matrix<double> ro = embed_transform(neuron.rotation, 1);
  const Matrix<double> full = ro.transpose() * basis.change * v * basis.change.transpose() * ro;
  Matrix<double> out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = full(i, j);
  return out;
}

}  // namespace deh
