#pragma once

// Batch kernels over independent samples. Each kernel has a serial reference
// and an OpenMP version; both accumulate per-sample results in sample order
// so they produce identical bits for any thread count.

#include <exception>
#include <mutex>

#include "deh/autodiff.hpp"
#include "deh/data.hpp"
#include "deh/loss.hpp"
#include "deh/network.hpp"

namespace deh {

enum class Exec { serial, parallel };

// Number of OpenMP threads used by Exec::parallel kernels. 0 restores the
// runtime default.
void set_thread_count(std::size_t threads);
std::size_t thread_count();

template <class T>
Matrix<T> points_as(const Matrix<double>& points) {
  return points.template cast<T>();
}

template <class R>
struct SampleGradient {
  R loss = R(0);
  std::vector<R> grad;  // d loss / d prepared
};

// Loss of one sample and its gradient with respect to the prepared vector,
// using a tape owned by the calling thread.
template <class R>
void sample_gradient(const ModelLayout& layout, std::span<const R> prepared,
                     const Sample& sample, Loss loss, SampleGradient<R>& out) {
  using V = ad::Var<R>;
  static thread_local ad::Tape<R> tape;
  static thread_local std::vector<R> adjoint;
  tape.clear();
  ad::TapeScope<R> scope(tape);
  Vec<V> leaves(prepared.size());
  for (std::size_t k = 0; k < prepared.size(); ++k) leaves[k] = V::leaf(prepared[k]);
  const Vec<V> output =
      forward_prepared(layout, std::span<const V>(leaves), points_as<V>(sample.points));
  const V value = sample_loss(loss, output, std::span<const double>(sample.target));
  out.loss = value.value();
  out.grad.assign(prepared.size(), R(0));
  if (!value.on_tape()) return;
  adjoint.assign(tape.size(), R(0));
  adjoint[static_cast<std::size_t>(value.id())] = R(1);
  tape.backward(adjoint);
  for (std::size_t k = 0; k < prepared.size(); ++k) out.grad[k] = adjoint[leaves[k].id()];
}

// Mean loss over `samples`; `grad` receives the mean gradient with respect to
// the prepared vector.
template <class R>
R batch_gradient_serial(const ModelLayout& layout, std::span<const R> prepared,
                        std::span<const Sample> samples, Loss loss, std::vector<R>& grad) {
  require(!samples.empty(), ErrorKind::invalid_argument, "empty batch");
  grad.assign(prepared.size(), R(0));
  R total = R(0);
  SampleGradient<R> one;
  for (const Sample& s : samples) {
    sample_gradient(layout, prepared, s, loss, one);
    total += one.loss;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += one.grad[k];
  }
  const R inv = R(1) / static_cast<R>(samples.size());
  for (R& g : grad) g *= inv;
  return total * inv;
}

template <class R>
R batch_gradient_parallel(const ModelLayout& layout, std::span<const R> prepared,
                          std::span<const Sample> samples, Loss loss, std::vector<R>& grad) {
  require(!samples.empty(), ErrorKind::invalid_argument, "empty batch");
  const std::size_t count = samples.size();
  std::vector<SampleGradient<R>> per_sample(count);
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
    try {
      sample_gradient(layout, prepared, samples[static_cast<std::size_t>(i)], loss,
                      per_sample[static_cast<std::size_t>(i)]);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  grad.assign(prepared.size(), R(0));
  R total = R(0);
  for (const auto& one : per_sample) {
    total += one.loss;
    for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += one.grad[k];
  }
  const R inv = R(1) / static_cast<R>(count);
  for (R& g : grad) g *= inv;
  return total * inv;
}

template <class R>
R batch_gradient(Exec exec, const ModelLayout& layout, std::span<const R> prepared,
                 std::span<const Sample> samples, Loss loss, std::vector<R>& grad) {
  return exec == Exec::serial ? batch_gradient_serial(layout, prepared, samples, loss, grad)
                              : batch_gradient_parallel(layout, prepared, samples, loss, grad);
}

// Model outputs for every sample, optionally with each sample's points moved
// by its own orthogonal transform (transforms[i] applied as x ↦ R x).
template <class R>
std::vector<Vec<R>> batch_predict_serial(const ModelLayout& layout, std::span<const R> prepared,
                                         std::span<const Sample> samples,
                                         const std::vector<Matrix<double>>* transforms = nullptr) {
  std::vector<Vec<R>> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Matrix<double> pts = samples[i].points;
    if (transforms != nullptr) pts = pts * (*transforms)[i].transpose();
    out[i] = forward_prepared(layout, prepared, points_as<R>(pts));
  }
  return out;
}

template <class R>
std::vector<Vec<R>> batch_predict_parallel(const ModelLayout& layout, std::span<const R> prepared,
                                           std::span<const Sample> samples,
                                           const std::vector<Matrix<double>>* transforms = nullptr) {
  std::vector<Vec<R>> out(samples.size());
  std::exception_ptr error;
  std::mutex error_mutex;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(samples.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      Matrix<double> pts = samples[k].points;
      if (transforms != nullptr) pts = pts * (*transforms)[k].transpose();
      out[k] = forward_prepared(layout, prepared, points_as<R>(pts));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

template <class R>
std::vector<Vec<R>> batch_predict(Exec exec, const ModelLayout& layout,
                                  std::span<const R> prepared, std::span<const Sample> samples,
                                  const std::vector<Matrix<double>>* transforms = nullptr) {
  return exec == Exec::serial ? batch_predict_serial(layout, prepared, samples, transforms)
                              : batch_predict_parallel(layout, prepared, samples, transforms);
}

}  // namespace deh
