#include "support.hpp"

#include "deh/error.hpp"
#include "deh/training.hpp"

using namespace deh;

namespace {

std::vector<double> draw_params(const ModelLayout& layout, std::uint64_t seed) {
  CounterRng rng(seed, 99);
  auto params = init_params(layout, seed);
  for (const auto& slot : layout.neurons()) {
    if (slot.bias) params[*slot.bias] = 0.5 * rng.gaussian();
    if (slot.scale) params[*slot.scale] = rng.gaussian();
  }
  return params;
}

const TensorInfo& tensor(const ModelLayout& layout, const std::string& name) {
  for (const auto& t : layout.tensors())
    if (t.name == name) return t;
  FAIL("no tensor " << name);
  throw;
}

}  // namespace

TEST_CASE("analytic gradients match central differences") {
  const Dataset data = generate_regression(40, 3);
  const auto batch = data.split(Split::train, 8);
  SUBCASE("regression model, three draws") {
    const ModelLayout layout(regression_model_spec());
    REQUIRE(layout.param_count() == 275);
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto params = draw_params(layout, seed);
      const GradientCheck g = finite_difference_check(layout, params, batch, Loss::mse);
      CAPTURE(seed);
      CHECK(g.max_rel_error < 1e-5);
    }
  }
  SUBCASE("other read-outs and a stopped rotation gradient") {
    for (const InvariantOp op :
         {InvariantOp::delta_edge, InvariantOp::sum, InvariantOp::l2norm, InvariantOp::delta}) {
      ModelSpec spec = regression_model_spec();
      spec.invariant = op;
      spec.layers.push_back(LayerSpec{2, true, NormMode::unit});
      spec.permutation_invariant = op == InvariantOp::delta;
      spec.pooling = Pooling::max_and_mean;
      spec.rotation_grad = op == InvariantOp::sum ? RotationGrad::stop : RotationGrad::full;
      spec.fc_hidden = 8;
      const ModelLayout layout(spec);
      const auto params = draw_params(layout, 7);
      CAPTURE(to_string(op));
      CHECK(finite_difference_check(layout, params, batch, Loss::mse).max_rel_error < 1e-5);
    }
  }
}

TEST_CASE("gradient check catches a corrupted gradient") {
  const ModelLayout layout(regression_model_spec());
  const auto batch = generate_regression(20, 5).split(Split::train, 4);
  const auto params = draw_params(layout, 4);
  auto g = grad<double>(layout, std::span<const double>(params), batch, Loss::mse);
  CHECK(gradient_error(layout, params, batch, Loss::mse, g.grad).max_rel_error < 1e-5);
  g.grad[100] += 0.05 + std::abs(g.grad[100]);
  const GradientCheck bad = gradient_error(layout, params, batch, Loss::mse, g.grad);
  CHECK(bad.max_rel_error > 1e-3);
  CHECK(bad.worst_index == 100);
}

TEST_CASE("loss is exactly quadratic in the output bias") {
  const ModelLayout layout(regression_model_spec());
  const auto batch = generate_regression(20, 6).split(Split::train, 5);
  auto params = draw_params(layout, 9);
  const std::size_t k = tensor(layout, "fc.out.bias").offset;
  const auto g = grad<double>(layout, std::span<const double>(params), batch, Loss::mse);
  const double h = 1e-3;
  auto at = [&](double v) {
    auto p = params;
    p[k] = v;
    return batch_loss(layout, p, batch, Loss::mse);
  };
  const double numeric = (at(params[k] + h) - at(params[k] - h)) / (2 * h);
  CHECK(std::abs(numeric - g.grad[k]) / std::max(1.0, std::abs(numeric)) < 1e-9);
}

TEST_CASE("zero residual gives a zero output-layer gradient") {
  const ModelLayout layout(regression_model_spec());
  auto samples = generate_regression(20, 2).split(Split::train, 6);
  for (auto& s : samples) s.target = {0.7};
  auto params = draw_params(layout, 3);
  const auto& w = tensor(layout, "fc.out.weight");
  const auto& b = tensor(layout, "fc.out.bias");
  for (std::size_t i = 0; i < w.size(); ++i) params[w.offset + i] = 0.0;
  params[b.offset] = 0.7;
  const auto g = grad<double>(layout, std::span<const double>(params), samples, Loss::mse);
  CHECK(g.loss == 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(g.grad[w.offset + i] == 0.0);
  CHECK(g.grad[b.offset] == 0.0);
}

TEST_CASE("single and double precision gradients agree") {
  const ModelLayout layout(regression_model_spec());
  const auto batch = generate_regression(30, 8).split(Split::train, 8);
  const auto params = draw_params(layout, 5);
  const auto g64 = grad<double>(layout, std::span<const double>(params), batch, Loss::mse);
  const auto p32 = cast_vec<float>(params);
  const auto g32 = grad<float>(layout, std::span<const float>(p32), batch, Loss::mse);
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < g64.grad.size(); ++i) {
    scale = std::max(scale, std::abs(g64.grad[i]));
    diff = std::max(diff, std::abs(g64.grad[i] - g32.grad[i]));
  }
  CHECK(diff / scale < 1e-4);
}

TEST_CASE("training loop") {
  const ModelLayout layout(regression_model_spec());
  const Dataset data = generate_regression(400, 11);
  const auto train_set = data.split(Split::train);
  const auto val_set = data.split(Split::val);
  TrainConfig config;
  config.epochs = 3;
  const auto init = init_params(layout, 1);

  SUBCASE("zero epochs leave the parameters alone") {
    config.epochs = 0;
    const TrainResult r = train(layout, train_set, val_set, config, init);
    CHECK(r.params == init);
    CHECK(r.best_epoch == 0);
  }
  SUBCASE("bit-reproducible, serial and parallel alike") {
    config.exec = Exec::serial;
    const TrainResult a = train(layout, train_set, val_set, config, init);
    const TrainResult b = train(layout, train_set, val_set, config, init);
    config.exec = Exec::parallel;
    set_thread_count(3);
    const TrainResult c = train(layout, train_set, val_set, config, init);
    set_thread_count(0);
    CHECK(a.params == b.params);
    CHECK(a.params == c.params);
    REQUIRE(a.history.size() == c.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) CHECK(a.history[i].loss == c.history[i].loss);
  }
  SUBCASE("first epoch does not increase the loss") {
    config.epochs = 1;
    const TrainResult r = train(layout, train_set, val_set, config, init);
    REQUIRE(r.history.size() == 3);
    CHECK(r.history[2].split == Split::val);
    CHECK(r.history[2].loss <= r.history[0].loss);
  }
  SUBCASE("single precision training runs") {
    config.precision = Precision::f32;
    const TrainResult r = train(layout, train_set, val_set, config, init);
    CHECK(std::isfinite(r.best_val_loss));
  }
  SUBCASE("restarts keep the best validation run") {
    config.restarts = 3;
    double best = INFINITY;
    std::size_t seen = 0;
    const TrainResult r = fit(layout, train_set, val_set, config, [&](const EpochMetrics& m) {
      seen = std::max(seen, m.restart + 1);
      if (m.split == Split::val) best = std::min(best, m.loss);
    });
    CHECK(seen == 3);
    CHECK(r.best_val_loss == best);
  }
  SUBCASE("divergence names the epoch") {
    config.learning_rate = 1e30;
    config.epochs = 5;
    config.precision = Precision::f32;
    CHECK_THROWS_WITH_AS(train(layout, train_set, val_set, config, init),
                         doctest::Contains("diverged at epoch"), Error);
  }
  SUBCASE("config validation") {
    config.batch_size = 10000;
    CHECK_THROWS_AS(train(layout, train_set, val_set, config, init), Error);
  }
}

TEST_CASE("pre-rotated training data gives the same run") {
  const ModelLayout layout(regression_model_spec());
  const Dataset data = generate_regression(300, 13);
  auto train_set = data.split(Split::train);
  auto val_set = data.split(Split::val);
  TrainConfig config;
  config.epochs = 3;
  config.exec = Exec::serial;
  const auto init = init_params(layout, 2);
  const TrainResult plain = train(layout, train_set, val_set, config, init);
  const Matrix<double> r = random_orthogonal(5, 17, -1);
  for (auto* set : {&train_set, &val_set})
    for (auto& s : *set) s.points = s.points * r.transpose();
  const TrainResult moved = train(layout, train_set, val_set, config, init);
  CHECK(std::abs(moved.best_val_loss - plain.best_val_loss) / plain.best_val_loss < 1e-8);
}

TEST_CASE("evaluation") {
  const ModelLayout layout(regression_model_spec());
  const Dataset data = generate_regression(300, 14);
  TrainConfig config;
  config.epochs = 5;
  config.precision = Precision::f32;
  const TrainResult r =
      train(layout, data.split(Split::train), data.split(Split::val), config, init_params(layout, 3));
  const auto test_set = data.split(Split::test);
  const EvalMetrics plain = evaluate(layout, r.params, test_set, Loss::mse, Precision::f32);
  const EvalMetrics moved = evaluate(layout, r.params, test_set, Loss::mse, Precision::f32, 42);
  CHECK(plain.count == test_set.size());
  CHECK(std::abs(plain.loss - moved.loss) < 1e-6 * std::max(1.0, plain.loss));
  const EvalMetrics moved64 = evaluate(layout, r.params, test_set, Loss::mse, Precision::f64, 42);
  const EvalMetrics plain64 = evaluate(layout, r.params, test_set, Loss::mse, Precision::f64);
  CHECK(std::abs(plain64.loss - moved64.loss) < 1e-12);

  CHECK_THROWS_AS(evaluate(layout, r.params, std::span<const Sample>(), Loss::mse, Precision::f64),
                  Error);
  const Vec<double> truth{1.25};
  CHECK(sample_loss(Loss::mse, truth, std::span<const double>(truth)) == 0.0);

  const Matrix<double> t = sample_transform(5, 42, 3);
  CHECK(orthogonality_residual(t) < 1e-14);
  CHECK(max_abs_diff(t, sample_transform(5, 42, 3)) == 0.0);
}

TEST_CASE("cross entropy") {
  const Vec<double> logits{1.0, 2.0, 0.5};
  const std::vector<double> label{1.0};
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(0.5));
  CHECK(sample_loss(Loss::cross_entropy, logits, std::span<const double>(label)) ==
        doctest::Approx(lse - 2.0).epsilon(1e-15));
  const std::vector<double> bad{3.0};
  CHECK_THROWS_AS(sample_loss(Loss::cross_entropy, logits, std::span<const double>(bad)), Error);
}
