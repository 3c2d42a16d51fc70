#include "support.hpp"

#include "deh/kernels.hpp"
#include "deh/training.hpp"

using namespace deh;

namespace {

template <class R>
void check_kernels(const std::vector<Sample>& samples) {
  const ModelLayout layout(regression_model_spec());
  const auto params64 = init_params(layout, 11);
  std::vector<R> params(params64.begin(), params64.end());
  const Vec<R> prepared = prepare(layout, std::span<const R>(params));
  const std::span<const R> view(prepared);

  std::vector<R> g_serial, g_parallel;
  const R l_serial = batch_gradient_serial(layout, view, samples, Loss::mse, g_serial);
  const auto p_serial = batch_predict_serial(layout, view, std::span<const Sample>(samples));
  for (const std::size_t threads : {1, 2, 3, 8}) {
    set_thread_count(threads);
    const R l_parallel = batch_gradient_parallel(layout, view, samples, Loss::mse, g_parallel);
    CHECK(l_parallel == l_serial);
    CHECK(g_parallel == g_serial);
    CHECK(batch_predict_parallel(layout, view, std::span<const Sample>(samples)) == p_serial);
  }
  set_thread_count(0);
}

}  // namespace

TEST_CASE("serial and parallel kernels agree bit for bit") {
  const Dataset data = generate_regression(50, 4);
  check_kernels<double>(data.samples);
  check_kernels<float>(data.samples);
}

TEST_CASE("kernels reject an empty batch and propagate errors") {
  const ModelLayout layout(regression_model_spec());
  const auto params = init_params(layout, 1);
  const auto prepared = prepare(layout, std::span<const double>(params));
  std::vector<double> grad;
  CHECK_THROWS_AS(batch_gradient_parallel(layout, std::span<const double>(prepared),
                                          std::span<const Sample>(), Loss::mse, grad),
                  Error);
  Dataset data = generate_regression(8, 2);
  data.samples[5].points = Matrix<double>(2, 3);
  CHECK_THROWS_AS(batch_gradient_parallel(layout, std::span<const double>(prepared),
                                          std::span<const Sample>(data.samples), Loss::mse, grad),
                  Error);
}
