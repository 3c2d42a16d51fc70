#include "deh/training.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include "deh/rng.hpp"

namespace deh {

std::string to_string(Loss loss) { return loss == Loss::mse ? "mse" : "cross_entropy"; }

Loss parse_loss(const std::string& text) {
  if (text == "mse") return Loss::mse;
  if (text == "cross_entropy") return Loss::cross_entropy;
  fail(ErrorKind::config, "unknown loss '" + text + "' (expected mse, cross_entropy)");
}

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }
std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

Precision parse_precision(const std::string& text) {
  if (text == "f32") return Precision::f32;
  if (text == "f64") return Precision::f64;
  fail(ErrorKind::config, "unknown precision '" + text + "' (expected f32, f64)");
}

LrSchedule parse_lr_schedule(const std::string& text) {
  if (text == "constant") return LrSchedule::constant;
  if (text == "cosine") return LrSchedule::cosine;
  fail(ErrorKind::config, "unknown lr schedule '" + text + "' (expected constant, cosine)");
}

void TrainConfig::validate(std::size_t train_count) const {
  require(learning_rate > 0.0, ErrorKind::config, "learning_rate must be positive");
  require(min_learning_rate >= 0.0, ErrorKind::config, "min_learning_rate must be non-negative");
  require(beta1 >= 0.0 && beta1 < 1.0, ErrorKind::config, "beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, ErrorKind::config, "beta2 must lie in [0, 1)");
  require(adam_epsilon > 0.0, ErrorKind::config, "adam_epsilon must be positive");
  require(restarts >= 1, ErrorKind::config, "restarts must be at least 1");
  require(batch_size >= 1, ErrorKind::config, "batch_size must be at least 1");
  require(batch_size <= train_count, ErrorKind::config,
          "batch_size (" + std::to_string(batch_size) + ") exceeds the training set size (" +
              std::to_string(train_count) + ")");
}

std::vector<double> init_params(const ModelLayout& layout, std::uint64_t seed) {
  std::vector<double> params(layout.param_count(), 0.0);
  CounterRng rng(seed, 0x696e6974ULL);
  for (const NeuronSlot& slot : layout.neurons()) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(slot.dim + 2));
    for (std::size_t i = 0; i < slot.dim + 2; ++i) params[slot.sphere + i] = sd * rng.gaussian();
  }
  const ModelSpec& spec = layout.spec();
  const std::size_t in = spec.invariant_size();
  std::size_t at = layout.fc_params();
  const double sd_hidden = std::sqrt(2.0 / static_cast<double>(in));
  for (std::size_t i = 0; i < spec.fc_hidden * in; ++i) params[at++] = sd_hidden * rng.gaussian();
  at += spec.fc_hidden;
  const double sd_out = std::sqrt(1.0 / static_cast<double>(spec.fc_hidden));
  for (std::size_t i = 0; i < spec.output_dim * spec.fc_hidden; ++i)
    params[at++] = sd_out * rng.gaussian();
  return params;
}

template <class R>
Gradient<R> grad(const ModelLayout& layout, std::span<const R> params,
                 std::span<const Sample> batch, Loss loss, Exec exec) {
  using V = ad::Var<R>;
  require(params.size() == layout.param_count(), ErrorKind::dimension_mismatch,
          "grad: parameter vector has wrong length");
  ad::Tape<R> tape;
  Vec<V> prepared;
  {
    ad::TapeScope<R> scope(tape);
    Vec<V> leaves(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) leaves[i] = V::leaf(params[i]);
    prepared = prepare(layout, std::span<const V>(leaves));
  }
  const Vec<R> prepared_values = values_of(prepared);

  Gradient<R> out;
  std::vector<R> prepared_grad;
  out.loss = batch_gradient(exec, layout, std::span<const R>(prepared_values), batch, loss,
                            prepared_grad);
  if (!std::isfinite(static_cast<double>(out.loss)))
    fail(ErrorKind::numeric, "non-finite loss " + std::to_string(static_cast<double>(out.loss)) +
                                 " over a batch of " + std::to_string(batch.size()));

  std::vector<R> adjoint(tape.size(), R(0));
  for (std::size_t k = 0; k < prepared.size(); ++k)
    if (prepared[k].on_tape()) adjoint[static_cast<std::size_t>(prepared[k].id())] += prepared_grad[k];
  tape.backward(adjoint);
  // Parameter leaves were pushed first, so they occupy ids 0..P-1.
  out.grad.assign(adjoint.begin(), adjoint.begin() + static_cast<std::ptrdiff_t>(params.size()));
  return out;
}

template Gradient<float> grad(const ModelLayout&, std::span<const float>, std::span<const Sample>,
                              Loss, Exec);
template Gradient<double> grad(const ModelLayout&, std::span<const double>,
                               std::span<const Sample>, Loss, Exec);

double batch_loss(const ModelLayout& layout, std::span<const double> params,
                  std::span<const Sample> batch, Loss loss, const PrepareOptions& options) {
  require(!batch.empty(), ErrorKind::invalid_argument, "empty batch");
  const Vec<double> prepared = prepare(layout, params, options);
  double total = 0.0;
  for (const Sample& s : batch) {
    const Vec<double> out = forward_prepared(layout, std::span<const double>(prepared), s.points);
    total += sample_loss(loss, out, std::span<const double>(s.target));
  }
  return total / static_cast<double>(batch.size());
}

GradientCheck gradient_error(const ModelLayout& layout, std::span<const double> params,
                             std::span<const Sample> batch, Loss loss,
                             std::span<const double> analytic, double h) {
  require(analytic.size() == params.size(), ErrorKind::dimension_mismatch,
          "gradient_error: gradient has wrong length");
  std::vector<Matrix<double>> frozen;
  PrepareOptions options;
  if (layout.spec().rotation_grad == RotationGrad::stop) {
    frozen = neuron_rotations(layout, params);
    options.fixed_rotations = &frozen;
  }
  GradientCheck report;
  std::vector<double> probe(params.begin(), params.end());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = batch_loss(layout, probe, batch, loss, options);
    probe[i] = saved - h;
    const double down = batch_loss(layout, probe, batch, loss, options);
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (i == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
  }
  return report;
}

GradientCheck finite_difference_check(const ModelLayout& layout, std::span<const double> params,
                                      std::span<const Sample> batch, Loss loss, double h) {
  const auto g = grad<double>(layout, params, batch, loss, Exec::serial);
  return gradient_error(layout, params, batch, loss, g.grad, h);
}

namespace {

template <class R>
class Adam {
 public:
  Adam(std::size_t size, const TrainConfig& config)
      : config_(config), m_(size, R(0)), v_(size, R(0)) {}

  void step(std::vector<R>& params, const std::vector<R>& grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const R b1 = static_cast<R>(config_.beta1);
    const R b2 = static_cast<R>(config_.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = b1 * m_[i] + (R(1) - b1) * grad[i];
      v_[i] = b2 * v_[i] + (R(1) - b2) * grad[i] * grad[i];
      const double mhat = static_cast<double>(m_[i]) / c1;
      const double vhat = static_cast<double>(v_[i]) / c2;
      params[i] -= static_cast<R>(lr * mhat / (std::sqrt(vhat) + config_.adam_epsilon));
    }
  }

 private:
  const TrainConfig& config_;
  std::vector<R> m_;
  std::vector<R> v_;
  std::size_t t_ = 0;
};

double learning_rate_at(const TrainConfig& config, std::size_t epoch) {
  if (config.schedule == LrSchedule::constant || config.epochs <= 1) return config.learning_rate;
  const double progress = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return config.min_learning_rate + 0.5 * (config.learning_rate - config.min_learning_rate) *
                                        (1.0 + std::cos(std::numbers::pi * progress));
}

template <class R>
double mean_loss(const ModelLayout& layout, const std::vector<R>& params,
                 std::span<const Sample> samples, Loss loss, Exec exec) {
  const Vec<R> prepared = prepare(layout, std::span<const R>(params));
  const auto outputs = batch_predict(exec, layout, std::span<const R>(prepared), samples);
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i)
    total += static_cast<double>(
        sample_loss(loss, outputs[i], std::span<const double>(samples[i].target)));
  return total / static_cast<double>(samples.size());
}

template <class R>
TrainResult train_impl(const ModelLayout& layout, std::span<const Sample> train_set,
                       std::span<const Sample> val_set, const TrainConfig& config,
                       std::vector<double> initial, const EpochCallback& on_epoch) {
  require(!train_set.empty(), ErrorKind::invalid_argument, "training set is empty");
  require(initial.size() == layout.param_count(), ErrorKind::dimension_mismatch,
          "initial parameters have wrong length");
  config.validate(train_set.size());
  const auto start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&] {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
  };

  TrainResult result;
  result.params = initial;
  std::vector<R> params = cast_vec<R>(initial);
  Adam<R> adam(params.size(), config);
  auto record = [&](std::size_t epoch, Split split, double loss) {
    EpochMetrics m{0, epoch, split, loss, elapsed_ms()};
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  };

  result.best_val_loss = val_set.empty() ? INFINITY
                                         : mean_loss(layout, params, val_set, config.loss,
                                                     config.exec);
  if (!val_set.empty()) record(0, Split::val, result.best_val_loss);

  std::vector<std::size_t> order(train_set.size());
  std::vector<Sample> batch;
  batch.reserve(config.batch_size);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    CounterRng shuffle(config.seed, 0x73687566ULL + epoch);
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle.next_u64() % i]);

    const double lr = learning_rate_at(config, epoch - 1);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    // The trailing partial batch is dropped.
    for (std::size_t begin = 0; begin + config.batch_size <= order.size();
         begin += config.batch_size) {
      batch.clear();
      for (std::size_t k = begin; k < begin + config.batch_size; ++k)
        batch.push_back(train_set[order[k]]);
      Gradient<R> g;
      try {
        g = grad<R>(layout, std::span<const R>(params), batch, config.loss, config.exec);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        fail(ErrorKind::numeric, "training diverged at epoch " + std::to_string(epoch) + ": " +
                                     e.what());
      }
      adam.step(params, g.grad, lr);
      epoch_loss += static_cast<double>(g.loss);
      ++batches;
    }
    record(epoch, Split::train, epoch_loss / static_cast<double>(batches));

    for (const R& p : params)
      if (!std::isfinite(static_cast<double>(p)))
        fail(ErrorKind::numeric,
             "training diverged at epoch " + std::to_string(epoch) + ": non-finite parameter");

    if (!val_set.empty()) {
      const double val = mean_loss(layout, params, val_set, config.loss, config.exec);
      record(epoch, Split::val, val);
      if (!std::isfinite(val))
        fail(ErrorKind::numeric,
             "training diverged at epoch " + std::to_string(epoch) + ": validation loss is not finite");
      if (val < result.best_val_loss) {
        result.best_val_loss = val;
        result.best_epoch = epoch;
        result.params = cast_vec<double>(params);
      }
    } else {
      result.best_epoch = epoch;
      result.params = cast_vec<double>(params);
    }
  }
  return result;
}

}  // namespace

TrainResult train(const ModelLayout& layout, std::span<const Sample> train_set,
                  std::span<const Sample> val_set, const TrainConfig& config,
                  std::vector<double> initial, const EpochCallback& on_epoch) {
  if (config.precision == Precision::f32)
    return train_impl<float>(layout, train_set, val_set, config, std::move(initial), on_epoch);
  return train_impl<double>(layout, train_set, val_set, config, std::move(initial), on_epoch);
}

Matrix<double> sample_transform(std::size_t dim, std::uint64_t seed, std::size_t index) {
  const std::uint64_t key = splitmix64_mix(seed ^ splitmix64_mix(index + 1));
  const int sign = (key >> 63) != 0 ? -1 : 1;
  return random_orthogonal(dim, key, sign);
}

namespace {

template <class R>
EvalMetrics evaluate_impl(const ModelLayout& layout, std::span<const double> params,
                          std::span<const Sample> samples, Loss loss,
                          std::optional<std::uint64_t> transform_seed, Exec exec) {
  const std::vector<R> cast = cast_vec<R>(std::vector<double>(params.begin(), params.end()));
  const Vec<R> prepared = prepare(layout, std::span<const R>(cast));
  std::vector<Matrix<double>> transforms;
  if (transform_seed) {
    transforms.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
      transforms.push_back(sample_transform(layout.spec().input_dim, *transform_seed, i));
  }
  const auto outputs = batch_predict(exec, layout, std::span<const R>(prepared), samples,
                                     transform_seed ? &transforms : nullptr);
  EvalMetrics m;
  m.count = samples.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    m.loss += static_cast<double>(
        sample_loss(loss, outputs[i], std::span<const double>(samples[i].target)));
    if (loss == Loss::cross_entropy) {
      std::size_t top = 0;
      for (std::size_t k = 1; k < outputs[i].size(); ++k)
        if (outputs[i][k] > outputs[i][top]) top = k;
      if (static_cast<double>(top) == samples[i].target[0]) ++correct;
    }
  }
  m.loss /= static_cast<double>(samples.size());
  if (loss == Loss::cross_entropy)
    m.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return m;
}

}  // namespace

EvalMetrics evaluate(const ModelLayout& layout, std::span<const double> params,
                     std::span<const Sample> samples, Loss loss, Precision precision,
                     std::optional<std::uint64_t> transform_seed, Exec exec) {
  require(!samples.empty(), ErrorKind::invalid_argument, "cannot evaluate on an empty dataset");
  if (precision == Precision::f32)
    return evaluate_impl<float>(layout, params, samples, loss, transform_seed, exec);
  return evaluate_impl<double>(layout, params, samples, loss, transform_seed, exec);
}

TrainResult fit(const ModelLayout& layout, std::span<const Sample> train_set,
                std::span<const Sample> val_set, const TrainConfig& config,
                const EpochCallback& on_epoch) {
  config.validate(train_set.size());
  TrainResult best;
  bool have = false;
  for (std::size_t k = 0; k < config.restarts; ++k) {
    TrainConfig run = config;
    run.seed = config.seed + k;
    EpochCallback tagged;
    if (on_epoch)
      tagged = [&](const EpochMetrics& m) {
        EpochMetrics copy = m;
        copy.restart = k;
        on_epoch(copy);
      };
    TrainResult r = train(layout, train_set, val_set, run, init_params(layout, run.seed), tagged);
    for (EpochMetrics& m : r.history) m.restart = k;
    r.best_restart = k;
    if (!have || val_set.empty() || r.best_val_loss < best.best_val_loss) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

}  // namespace deh
