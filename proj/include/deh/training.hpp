#pragma once

#include <functional>
#include <optional>

#include "deh/kernels.hpp"

namespace deh {

enum class Precision { f32, f64 };
enum class LrSchedule { constant, cosine };

std::string to_string(Precision p);
std::string to_string(LrSchedule s);
Precision parse_precision(const std::string& text);
LrSchedule parse_lr_schedule(const std::string& text);

struct TrainConfig {
  double learning_rate = 1e-3;
  double min_learning_rate = 0.0;  // cosine floor
  LrSchedule schedule = LrSchedule::constant;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 64;
  std::size_t epochs = 500;
  std::uint64_t seed = 1;
  std::size_t restarts = 1;  // independent initializations, best validation wins
  Precision precision = Precision::f64;
  Loss loss = Loss::mse;
  Exec exec = Exec::parallel;

  void validate(std::size_t train_count) const;
};

// Spheres ~ N(0, 1/(n+2)), biases and norm scalars 0, FC weights Gaussian
// with fan-in scaling (He for the ReLU layer), FC biases 0.
std::vector<double> init_params(const ModelLayout& layout, std::uint64_t seed);

template <class R>
struct Gradient {
  R loss = R(0);
  std::vector<R> grad;
};

// Mean batch loss and its exact gradient with respect to every parameter.
// The neuron banks are built once on a parameter tape; per-sample gradients
// with respect to the banks are then pulled back through that tape.
template <class R>
Gradient<R> grad(const ModelLayout& layout, std::span<const R> params,
                 std::span<const Sample> batch, Loss loss, Exec exec = Exec::serial);

// Mean batch loss evaluated directly in double precision.
double batch_loss(const ModelLayout& layout, std::span<const double> params,
                  std::span<const Sample> batch, Loss loss, const PrepareOptions& options = {});

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares `analytic` with central differences of batch_loss. When the
// model stops gradients at the geodesic rotations, the rotations are frozen
// at `params` for the difference quotients as well.
//
// Relative error per coordinate: |a - d| / max(|a|, |d|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-4;

GradientCheck gradient_error(const ModelLayout& layout, std::span<const double> params,
                             std::span<const Sample> batch, Loss loss,
                             std::span<const double> analytic, double h = 1e-5);

GradientCheck finite_difference_check(const ModelLayout& layout, std::span<const double> params,
                                      std::span<const Sample> batch, Loss loss, double h = 1e-5);

struct EpochMetrics {
  std::size_t restart = 0;
  std::size_t epoch = 0;
  Split split = Split::train;
  double loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  std::vector<double> params;  // best validation epoch
  std::vector<EpochMetrics> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::size_t best_restart = 0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

TrainResult train(const ModelLayout& layout, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& config,
                  std::vector<double> initial, const EpochCallback& on_epoch = {});

// Restart k initializes with init_params(layout, seed + k) and shuffles with
// seed + k. Without a validation set the last restart's final epoch is kept.
TrainResult fit(const ModelLayout& layout, std::span<const Sample> train_set,
                std::span<const Sample> val_set, const TrainConfig& config,
                const EpochCallback& on_epoch = {});

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;  // cross entropy only
  std::size_t count = 0;
};

// Independent random orthogonal transform (either determinant sign) for
// sample `index` under `seed`.
Matrix<double> sample_transform(std::size_t dim, std::uint64_t seed, std::size_t index);

EvalMetrics evaluate(const ModelLayout& layout, std::span<const double> params,
                     std::span<const Sample> samples, Loss loss, Precision precision,
                     std::optional<std::uint64_t> transform_seed = std::nullopt,
                     Exec exec = Exec::parallel);

}  // namespace deh
