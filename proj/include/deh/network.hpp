#pragma once

// Cascaded equivariant hypersphere layers, O(n)-invariant read-outs and the
// fully connected head.
//
// A model evaluates in two stages. prepare() turns the learnable parameters
// into the "prepared" vector: every neuron bank B_n(S) plus biases, norm
// scalars and FC weights. forward_prepared() then maps one point set to the
// model output using only that vector. Banks depend on parameters alone, so
// a batch shares one prepare() call.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "deh/neuron.hpp"

namespace deh {

enum class NormMode { none, unit, nonlinear };
enum class InvariantOp { delta, delta_edge, sum, l2norm };
enum class Pooling { max, mean, max_and_mean };
enum class GramEntries { full, upper };

struct LayerSpec {
  std::size_t width = 1;
  bool use_bias = true;
  NormMode norm = NormMode::nonlinear;
  bool learnable_norm = true;  // only meaningful for NormMode::nonlinear
};

struct ModelSpec {
  std::size_t input_dim = 5;
  std::size_t points = 2;
  std::vector<LayerSpec> layers{LayerSpec{}};
  InvariantOp invariant = InvariantOp::delta;
  GramEntries gram_entries = GramEntries::full;
  bool permutation_invariant = false;
  Pooling pooling = Pooling::max;
  std::size_t fc_hidden = 32;
  std::size_t output_dim = 1;
  bool center_input = false;
  RotationGrad rotation_grad = RotationGrad::full;

  void validate() const;

  std::size_t channels_after(std::size_t layer_count) const;
  std::size_t feature_dim() const { return input_dim + layers.size(); }
  std::size_t invariant_size() const;
};

// The O(5) regression architecture: one layer of 2 hyperspheres, Δ read-out
// using the three distinct entries of each 2x2 Gram matrix, FC 32.
ModelSpec regression_model_spec();

struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  std::vector<std::size_t> shape;
  std::size_t size() const;
};

struct NeuronSlot {
  std::size_t layer = 0;
  std::size_t dim = 0;     // input dimension of the neuron
  std::size_t parent = 0;  // channel index in the previous layer
  std::size_t sphere = 0;  // parameter offsets
  std::optional<std::size_t> bias;
  std::optional<std::size_t> scale;
  std::size_t bank = 0;  // prepared offsets
  std::optional<std::size_t> prepared_bias;
  std::optional<std::size_t> prepared_scale;
};

class ModelLayout {
 public:
  explicit ModelLayout(ModelSpec spec);

  const ModelSpec& spec() const { return spec_; }
  std::size_t param_count() const { return param_count_; }
  std::size_t prepared_size() const { return prepared_size_; }
  const std::vector<NeuronSlot>& neurons() const { return neurons_; }
  std::size_t layer_begin(std::size_t layer) const { return layer_begin_[layer]; }
  const std::vector<TensorInfo>& tensors() const { return tensors_; }

  std::size_t fc_params() const { return fc_params_; }
  std::size_t fc_prepared() const { return fc_prepared_; }
  std::size_t fc_size() const;

 private:
  ModelSpec spec_;
  std::vector<NeuronSlot> neurons_;
  std::vector<std::size_t> layer_begin_;
  std::vector<TensorInfo> tensors_;
  std::size_t param_count_ = 0;
  std::size_t prepared_size_ = 0;
  std::size_t fc_params_ = 0;
  std::size_t fc_prepared_ = 0;
};

// Geodesic rotations of every neuron, evaluated at `params`.
std::vector<Matrix<double>> neuron_rotations(const ModelLayout& layout,
                                             std::span<const double> params);

// Points are N x n row-major.
using PointSet = Matrix<double>;

// ---------------------------------------------------------------------------
// Invariant building blocks.

// -½‖x1 - x2‖²
template <class T>
T edge_scalar(std::span<const T> x1, std::span<const T> x2) {
  require(x1.size() == x2.size(), ErrorKind::dimension_mismatch,
          "edge_scalar: points differ in dimension");
  T acc = T(0);
  for (std::size_t i = 0; i < x1.size(); ++i) {
    const T d = x1[i] - x2[i];
    acc += d * d;
  }
  return T(-0.5) * acc;
}

// e12 · X1ᵀS · X2ᵀS for points x1, x2 and sphere S.
template <class T>
T point_sphere_delta(const Vec<T>& x1, const Vec<T>& x2, const Vec<T>& sphere) {
  const T e = edge_scalar(std::span<const T>(x1), std::span<const T>(x2));
  return e * sphere_activation(embed(x1), sphere) * sphere_activation(embed(x2), sphere);
}

// Y·Yᵀ for one channel.
template <class T>
Matrix<T> gram_invariant(const Matrix<T>& y) {
  const std::size_t n = y.rows();
  Matrix<T> g(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const T v = dot(y.row(i), y.row(j));
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

// E ⊙ (Y·Yᵀ) with E = ½(‖x_i - x_j‖² + I).
template <class T>
Matrix<T> gram_invariant_edged(const Matrix<T>& y, const Matrix<T>& points) {
  require(y.rows() == points.rows(), ErrorKind::dimension_mismatch,
          "gram_invariant_edged: feature and point counts differ");
  Matrix<T> g = gram_invariant(y);
  for (std::size_t i = 0; i < g.rows(); ++i) {
    for (std::size_t j = i; j < g.cols(); ++j) {
      const T dist = T(-2) * edge_scalar(points.row(i), points.row(j));
      const T e = T(0.5) * (dist + (i == j ? T(1) : T(0)));
      g(i, j) = e * g(i, j);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

namespace detail {

// Order-independent sum: add in ascending value order so that any
// permutation of `values` produces the same bits.
template <class T>
T canonical_sum(std::vector<T> values) {
  std::sort(values.begin(), values.end(),
            [](const T& a, const T& b) { return value_of(a) < value_of(b); });
  T acc = T(0);
  for (const T& v : values) acc += v;
  return acc;
}

template <class T>
T canonical_max(const std::vector<T>& values) {
  T best = values.front();
  for (const T& v : values)
    if (value_of(v) > value_of(best)) best = v;
  return best;
}

template <class T>
void pool_columns(const std::vector<std::vector<T>>& rows, Pooling mode, Vec<T>& out) {
  const std::size_t count = rows.size();
  const std::size_t width = rows.front().size();
  std::vector<T> column(count);
  if (mode == Pooling::max || mode == Pooling::max_and_mean) {
    for (std::size_t j = 0; j < width; ++j) {
      for (std::size_t i = 0; i < count; ++i) column[i] = rows[i][j];
      out.push_back(canonical_max(column));
    }
  }
  if (mode == Pooling::mean || mode == Pooling::max_and_mean) {
    const T inv = T(1.0 / static_cast<double>(count));
    for (std::size_t j = 0; j < width; ++j) {
      for (std::size_t i = 0; i < count; ++i) column[i] = rows[i][j];
      out.push_back(canonical_sum(column) * inv);
    }
  }
}

}  // namespace detail

// Per channel: sort each row ascending, then pool over the N rows.
// Produces N values per channel (2N for max_and_mean).
template <class T>
Vec<T> sort_and_pool(const std::vector<Matrix<T>>& stack, Pooling mode) {
  Vec<T> out;
  for (const Matrix<T>& g : stack) {
    require(g.square() && g.rows() > 0, ErrorKind::dimension_mismatch,
            "sort_and_pool expects non-empty square matrices");
    std::vector<std::vector<T>> rows(g.rows());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      rows[i].assign(g.row(i).begin(), g.row(i).end());
      std::sort(rows[i].begin(), rows[i].end(),
                [](const T& a, const T& b) { return value_of(a) < value_of(b); });
    }
    detail::pool_columns(rows, mode, out);
  }
  return out;
}

template <class T>
T relu(const T& x) {
  return value_of(x) > 0 ? x : T(0);
}

// One ReLU hidden layer and a linear output. `weights` holds W1 (hidden x
// in, row-major), b1, W2 (out x hidden), b2 back to back.
template <class T>
Vec<T> fc_head(const Vec<T>& features, std::span<const T> weights, std::size_t hidden,
               std::size_t output_dim) {
  const std::size_t in = features.size();
  require(weights.size() == hidden * in + hidden + output_dim * hidden + output_dim,
          ErrorKind::dimension_mismatch, "fc_head: weight count does not match shapes");
  const T* w1 = weights.data();
  const T* b1 = w1 + hidden * in;
  const T* w2 = b1 + hidden;
  const T* b2 = w2 + output_dim * hidden;
  Vec<T> h(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    T acc = b1[i];
    for (std::size_t k = 0; k < in; ++k) acc += w1[i * in + k] * features[k];
    h[i] = relu(acc);
  }
  Vec<T> out(output_dim);
  for (std::size_t i = 0; i < output_dim; ++i) {
    T acc = b2[i];
    for (std::size_t k = 0; k < hidden; ++k) acc += w2[i * hidden + k] * h[k];
    out[i] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model evaluation.

struct PrepareOptions {
  // Per-neuron geodesic rotations to use instead of recomputing them.
  const std::vector<Matrix<double>>* fixed_rotations = nullptr;
};

template <class T>
Vec<T> prepare(const ModelLayout& layout, std::span<const T> params,
               const PrepareOptions& options = {}) {
  require(params.size() == layout.param_count(), ErrorKind::dimension_mismatch,
          "prepare: parameter vector has wrong length");
  const ModelSpec& spec = layout.spec();
  Vec<T> prepared(layout.prepared_size(), T(0));
  const auto& slots = layout.neurons();
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const NeuronSlot& slot = slots[k];
    const auto basis = simplex_basis(slot.dim);
    const Vec<T> sphere(params.begin() + static_cast<std::ptrdiff_t>(slot.sphere),
                        params.begin() + static_cast<std::ptrdiff_t>(slot.sphere + slot.dim + 2));
    const Matrix<double>* fixed =
        options.fixed_rotations != nullptr ? &(*options.fixed_rotations)[k] : nullptr;
    const auto neuron = build_neuron(sphere, *basis, spec.rotation_grad, fixed);
    std::copy(neuron.bank.data().begin(), neuron.bank.data().end(),
              prepared.begin() + static_cast<std::ptrdiff_t>(slot.bank));
    if (slot.prepared_bias) prepared[*slot.prepared_bias] = params[*slot.bias];
    if (slot.prepared_scale) prepared[*slot.prepared_scale] = slot.scale ? params[*slot.scale] : T(0);
  }
  for (std::size_t i = 0; i < layout.fc_size(); ++i)
    prepared[layout.fc_prepared() + i] = params[layout.fc_params() + i];
  return prepared;
}

// Point-wise cascade: embed → B·X → (+b) → (normalize) per layer. Returns
// one N x (n+d) feature matrix per output channel.
template <class T>
std::vector<Matrix<T>> cascade_forward(const ModelLayout& layout, std::span<const T> prepared,
                                       const Matrix<T>& points) {
  const ModelSpec& spec = layout.spec();
  require(points.cols() == spec.input_dim, ErrorKind::dimension_mismatch,
          "cascade_forward: point dimension does not match the model");
  require(prepared.size() == layout.prepared_size(), ErrorKind::dimension_mismatch,
          "cascade_forward: prepared vector has wrong length");
  const std::size_t count = points.rows();
  std::vector<Matrix<T>> channels{points};
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& layer = spec.layers[l];
    const std::size_t dim = spec.input_dim + l;
    std::vector<Matrix<T>> next;
    next.reserve(channels.size() * layer.width);
    for (std::size_t idx = layout.layer_begin(l); idx < layout.layer_begin(l + 1); ++idx) {
      const NeuronSlot& slot = layout.neurons()[idx];
      const Matrix<T> bank(dim + 1, dim + 2,
                           std::vector<T>(prepared.begin() + static_cast<std::ptrdiff_t>(slot.bank),
                                          prepared.begin() + static_cast<std::ptrdiff_t>(
                                                                 slot.bank + (dim + 1) * (dim + 2))));
      const Matrix<T>& input = channels[slot.parent];
      Matrix<T> out(count, dim + 1);
      for (std::size_t i = 0; i < count; ++i) {
        Vec<T> y = matvec(bank, embed(input.row(i)));
        if (slot.prepared_bias) y = add_bias(std::move(y), prepared[*slot.prepared_bias]);
        if (layer.norm == NormMode::unit) {
          y = normalize(y).values;
        } else if (layer.norm == NormMode::nonlinear) {
          y = nonlinear_normalize(y, prepared[*slot.prepared_scale]);
        }
        for (std::size_t j = 0; j <= dim; ++j) out(i, j) = y[j];
      }
      next.push_back(std::move(out));
    }
    channels = std::move(next);
  }
  return channels;
}

template <class T>
Matrix<T> center_points(const Matrix<T>& points) {
  Matrix<T> out = points;
  const T inv = T(1.0 / static_cast<double>(points.rows()));
  std::vector<T> column(points.rows());
  for (std::size_t j = 0; j < points.cols(); ++j) {
    for (std::size_t i = 0; i < points.rows(); ++i) column[i] = points(i, j);
    const T mean = detail::canonical_sum(column) * inv;
    for (std::size_t i = 0; i < points.rows(); ++i) out(i, j) -= mean;
  }
  return out;
}

// Invariant read-out of the cascade output followed by pooling or flattening.
template <class T>
Vec<T> invariant_features(const ModelSpec& spec, const std::vector<Matrix<T>>& channels,
                          const Matrix<T>& points) {
  const std::size_t count = points.rows();
  Vec<T> out;
  if (spec.invariant == InvariantOp::delta || spec.invariant == InvariantOp::delta_edge) {
    std::vector<Matrix<T>> stack;
    stack.reserve(channels.size());
    for (const auto& y : channels)
      stack.push_back(spec.invariant == InvariantOp::delta ? gram_invariant(y)
                                                           : gram_invariant_edged(y, points));
    if (spec.permutation_invariant) return sort_and_pool(stack, spec.pooling);
    // Row-major over (i, j, channel).
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = (spec.gram_entries == GramEntries::upper ? i : 0); j < count; ++j)
        for (const auto& g : stack) out.push_back(g(i, j));
    return out;
  }

  // One scalar per point and channel.
  std::vector<std::vector<T>> per_point(count, std::vector<T>(channels.size()));
  for (std::size_t c = 0; c < channels.size(); ++c) {
    for (std::size_t i = 0; i < count; ++i) {
      const auto row = channels[c].row(i);
      if (spec.invariant == InvariantOp::sum) {
        T acc = T(0);
        for (const T& v : row) acc += v;
        per_point[i][c] = acc;
      } else {
        using std::sqrt;
        per_point[i][c] = sqrt(squared_norm(row));
      }
    }
  }
  if (spec.permutation_invariant) {
    detail::pool_columns(per_point, spec.pooling, out);
    return out;
  }
  for (const auto& row : per_point) out.insert(out.end(), row.begin(), row.end());
  return out;
}

template <class T>
Vec<T> forward_prepared(const ModelLayout& layout, std::span<const T> prepared,
                        const Matrix<T>& points) {
  const ModelSpec& spec = layout.spec();
  require(points.rows() == spec.points, ErrorKind::dimension_mismatch,
          "model input has the wrong number of points");
  const Matrix<T> input = spec.center_input ? center_points(points) : points;
  const auto channels = cascade_forward(layout, prepared, input);
  const Vec<T> features = invariant_features(spec, channels, input);
  return fc_head(features,
                 prepared.subspan(layout.fc_prepared(), layout.fc_size()), spec.fc_hidden,
                 spec.output_dim);
}

template <class T>
Vec<T> model_forward(const ModelLayout& layout, std::span<const T> params,
                     const Matrix<T>& points) {
  const Vec<T> prepared = prepare(layout, params);
  return forward_prepared(layout, std::span<const T>(prepared), points);
}

// ---------------------------------------------------------------------------

std::string to_string(NormMode mode);
std::string to_string(InvariantOp op);
std::string to_string(Pooling mode);
std::string to_string(GramEntries entries);
std::string to_string(RotationGrad mode);

NormMode parse_norm_mode(const std::string& text);
InvariantOp parse_invariant_op(const std::string& text);
Pooling parse_pooling(const std::string& text);
GramEntries parse_gram_entries(const std::string& text);
RotationGrad parse_rotation_grad(const std::string& text);

}  // namespace deh
