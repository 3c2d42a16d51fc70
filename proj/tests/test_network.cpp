#include "support.hpp"

#include <algorithm>
#include <numeric>

#include "deh/error.hpp"
#include "deh/network.hpp"
#include "deh/training.hpp"

using namespace deh;

TEST_CASE("regression model layout") {
  const ModelLayout layout(regression_model_spec());
  CHECK(layout.param_count() == 275);
  CHECK(layout.spec().invariant_size() == 6);
  CHECK(layout.neurons().size() == 2);
  std::vector<std::string> names;
  for (const auto& t : layout.tensors()) names.push_back(t.name);
  CHECK(names == std::vector<std::string>{"layer0.neuron0.sphere", "layer0.neuron0.bias",
                                          "layer0.neuron0.scale", "layer0.neuron1.sphere",
                                          "layer0.neuron1.bias", "layer0.neuron1.scale",
                                          "fc.hidden.weight", "fc.hidden.bias", "fc.out.weight",
                                          "fc.out.bias"});

  CounterRng rng(2);
  const auto params = init_params(layout, 4);
  const auto prepared = prepare(layout, std::span<const double>(params));
  const auto channels =
      cascade_forward(layout, std::span<const double>(prepared), test::gaussian_points(rng, 2, 5));
  REQUIRE(channels.size() == 2);
  CHECK(channels[0].rows() == 2);
  CHECK(channels[0].cols() == 6);
}

TEST_CASE("channel and feature counts grow per layer") {
  ModelSpec spec;
  spec.input_dim = 3;
  spec.points = 4;
  spec.layers = {LayerSpec{2}, LayerSpec{3}, LayerSpec{2}};
  const ModelLayout layout(spec);
  CHECK(spec.channels_after(1) == 2);
  CHECK(spec.channels_after(2) == 6);
  CHECK(spec.channels_after(3) == 12);
  CHECK(spec.feature_dim() == 6);
  CHECK(layout.neurons().size() == 2 + 6 + 12);
  CHECK(layout.neurons()[2].parent == 0);
  CHECK(layout.neurons()[5].parent == 1);

  CounterRng rng(3);
  const auto params = init_params(layout, 1);
  const auto prepared = prepare(layout, std::span<const double>(params));
  const auto out =
      cascade_forward(layout, std::span<const double>(prepared), test::gaussian_points(rng, 4, 3));
  CHECK(out.size() == 12);
  CHECK(out[0].cols() == 6);

  spec.layers.clear();
  CHECK_THROWS_AS(ModelLayout{spec}, Error);
}

TEST_CASE("gram invariants") {
  CounterRng rng(6);
  const Matrix<double> y = test::gaussian_points(rng, 4, 5);
  const Matrix<double> x = test::gaussian_points(rng, 4, 3);
  const Matrix<double> g = gram_invariant(y);
  const Matrix<double> ge = gram_invariant_edged(y, x);
  CHECK(max_abs_diff(g, g.transpose()) == 0.0);
  CHECK(max_abs_diff(ge, ge.transpose()) == 0.0);
  // Positive semidefinite: vᵀ G v = |Yᵀ v|² ≥ 0.
  for (int t = 0; t < 50; ++t) {
    const Vec<double> v = test::gaussian_vec(rng, 4);
    CHECK(dot(v, matvec(g, v)) >= -1e-12);
  }
  for (std::size_t i = 0; i < 4; ++i) CHECK(ge(i, i) == doctest::Approx(0.5 * g(i, i)));
  double d01 = 0.0;
  for (std::size_t k = 0; k < 3; ++k) d01 += (x(0, k) - x(1, k)) * (x(0, k) - x(1, k));
  CHECK(ge(0, 1) == doctest::Approx(0.5 * d01 * g(0, 1)));

  const Matrix<double> v = random_orthogonal(5, 9, -1);
  CHECK(max_abs_diff(gram_invariant(y * v.transpose()), g) < 1e-13);
}

TEST_CASE("edge scalar and point-sphere delta") {
  const Vec<double> a{1.0, 2.0, 2.0}, b{0.0, 0.0, 0.0};
  CHECK(edge_scalar(std::span<const double>(a), std::span<const double>(b)) == -4.5);
  const Vec<double> s = make_sphere({0.0, 0.0, 0.0}, 4.0);
  // activations ½(16 - 9) and ½(16 - 0)
  CHECK(point_sphere_delta(a, b, s) == doctest::Approx(-4.5 * 3.5 * 8.0));
}

TEST_CASE("sort and pool") {
  Matrix<double> g(2, 2, {3.0, 1.0, -2.0, 5.0});
  // sorted rows: (1, 3), (-2, 5)
  CHECK(sort_and_pool<double>({g}, Pooling::max) == Vec<double>{1.0, 5.0});
  CHECK(sort_and_pool<double>({g}, Pooling::mean) == Vec<double>{-0.5, 4.0});
  CHECK(sort_and_pool<double>({g}, Pooling::max_and_mean) == Vec<double>{1.0, 5.0, -0.5, 4.0});
}

TEST_CASE("fc head by hand") {
  // in = 2, hidden = 2, out = 1
  const std::vector<double> w{1.0, -1.0, 0.5, 0.5, 0.0, -10.0, 2.0, 3.0, 0.25};
  const Vec<double> out = fc_head(Vec<double>{3.0, 1.0}, std::span<const double>(w), 2, 1);
  // h = relu(2, 2 - 10) = (2, 0); out = 2*2 + 0 + 0.25
  CHECK(out == Vec<double>{4.25});
  CHECK_THROWS_AS(fc_head(Vec<double>{3.0}, std::span<const double>(w), 2, 1), Error);
}

TEST_CASE("flattening keeps (i, j, channel) order") {
  ModelSpec spec = regression_model_spec();
  Matrix<double> y0(2, 1, {1.0, 2.0}), y1(2, 1, {3.0, 4.0});
  const Matrix<double> pts(2, 5);
  // Δ0 = [[1,2],[2,4]], Δ1 = [[9,12],[12,16]]
  CHECK(invariant_features<double>(spec, {y0, y1}, pts) ==
        Vec<double>{1.0, 9.0, 2.0, 12.0, 4.0, 16.0});
  spec.gram_entries = GramEntries::full;
  CHECK(invariant_features<double>(spec, {y0, y1}, pts) ==
        Vec<double>{1.0, 9.0, 2.0, 12.0, 2.0, 12.0, 4.0, 16.0});
  spec.invariant = InvariantOp::sum;
  Matrix<double> z(2, 2, {1.0, 2.0, -1.0, 0.5});
  CHECK(invariant_features<double>(spec, {z}, pts) == Vec<double>{3.0, -0.5});
  spec.invariant = InvariantOp::l2norm;
  Matrix<double> w(2, 2, {3.0, 4.0, 0.0, 2.0});
  CHECK(invariant_features<double>(spec, {w}, pts) == Vec<double>{5.0, 2.0});
}

namespace {

ModelSpec spec_for(InvariantOp op, bool perm) {
  ModelSpec spec;
  spec.input_dim = 4;
  spec.points = 5;
  spec.layers = {LayerSpec{2}, LayerSpec{2}};
  spec.invariant = op;
  spec.permutation_invariant = perm;
  spec.pooling = Pooling::max_and_mean;
  spec.center_input = perm;
  spec.fc_hidden = 7;
  spec.output_dim = 2;
  return spec;
}

}  // namespace

TEST_CASE("end-to-end invariance for every invariant op") {
  CounterRng rng(77);
  for (const InvariantOp op :
       {InvariantOp::delta, InvariantOp::delta_edge, InvariantOp::sum, InvariantOp::l2norm}) {
    CAPTURE(to_string(op));
    const ModelLayout layout(spec_for(op, false));
    auto params = init_params(layout, rng.next_u64());
    for (const auto& slot : layout.neurons()) {
      if (slot.bias) params[*slot.bias] = rng.gaussian();
      if (slot.scale) params[*slot.scale] = rng.gaussian();
    }
    for (int t = 0; t < 20; ++t) {
      const Matrix<double> x = test::gaussian_points(rng, 5, 4);
      const Matrix<double> r = random_orthogonal(4, rng.next_u64(), t % 2 ? 1 : -1);
      const auto a = model_forward(layout, std::span<const double>(params), x);
      const auto b = model_forward(layout, std::span<const double>(params), x * r.transpose());
      CHECK(test::max_abs(a, b) < 1e-10);
    }
  }
}

TEST_CASE("permutation-invariant pooling is bit-exact") {
  CounterRng rng(78);
  for (const InvariantOp op :
       {InvariantOp::delta, InvariantOp::delta_edge, InvariantOp::sum, InvariantOp::l2norm}) {
    const ModelLayout layout(spec_for(op, true));
    const auto params = init_params(layout, rng.next_u64());
    std::vector<std::size_t> order(5);
    std::iota(order.begin(), order.end(), 0);
    for (int t = 0; t < 20; ++t) {
      const Matrix<double> x = test::gaussian_points(rng, 5, 4);
      for (std::size_t i = 4; i > 0; --i) std::swap(order[i], order[rng.next_u64() % (i + 1)]);
      Matrix<double> y(5, 4);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 4; ++j) y(i, j) = x(order[i], j);
      const auto a = model_forward(layout, std::span<const double>(params), x);
      const auto b = model_forward(layout, std::span<const double>(params), y);
      CHECK(a == b);
    }
  }
}

TEST_CASE("sum read-out depends only on per-point DC components") {
  ModelSpec spec = spec_for(InvariantOp::sum, false);
  const ModelLayout layout(spec);
  const auto params = init_params(layout, 5);
  const auto prepared = prepare(layout, std::span<const double>(params));
  CounterRng rng(4);
  const Matrix<double> x = test::gaussian_points(rng, 5, 4);
  auto channels = cascade_forward(layout, std::span<const double>(prepared), x);
  const Vec<double> before = invariant_features(spec, channels, x);
  // Moving mass between entries of one point's feature keeps its sum.
  for (auto& c : channels) {
    c(0, 0) += 0.75;
    c(0, 1) -= 0.75;
  }
  CHECK(test::max_abs(invariant_features(spec, channels, x), before) < 1e-14);
}

TEST_CASE("enum names round trip") {
  for (auto m : {NormMode::none, NormMode::unit, NormMode::nonlinear})
    CHECK(parse_norm_mode(to_string(m)) == m);
  for (auto p : {Pooling::max, Pooling::mean, Pooling::max_and_mean})
    CHECK(parse_pooling(to_string(p)) == p);
  CHECK(parse_invariant_op("delta_edge") == InvariantOp::delta_edge);
  CHECK_THROWS_AS(parse_invariant_op("trace"), Error);
}
