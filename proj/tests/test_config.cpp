#include "support.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "deh/checkpoint.hpp"
#include "deh/error.hpp"

using namespace deh;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::config);
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse(R"(
# two layers
layers = 2, 3
bias = true, false
norm = nonlinear
learnable_norm = false
invariant = delta_edge   # trailing comment
gram_entries = upper
lr = 0.003
lr_schedule = cosine
epochs = 10
precision = f32
restarts = 2
)");
  REQUIRE(c.model.layers.size() == 2);
  CHECK(c.model.layers[1].width == 3);
  CHECK(c.model.layers[0].use_bias);
  CHECK_FALSE(c.model.layers[1].use_bias);
  CHECK(c.model.layers[1].norm == NormMode::nonlinear);
  CHECK_FALSE(c.model.layers[0].learnable_norm);
  CHECK(c.model.invariant == InvariantOp::delta_edge);
  CHECK(c.train.learning_rate == 0.003);
  CHECK(c.train.schedule == LrSchedule::cosine);
  CHECK(c.train.precision == Precision::f32);
  CHECK(c.train.restarts == 2);
  CHECK(c.train.batch_size == 64);

  const ExperimentConfig back = parse(to_config_text(c));
  CHECK(to_config_text(back) == to_config_text(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(parse("")) != config_hash(c));
}

TEST_CASE("config errors name the field") {
  CHECK(error_of("lr = fast\n").find("'lr'") != std::string::npos);
  CHECK(error_of("lr = -1\n").find("'lr'") != std::string::npos);
  CHECK(error_of("colour = red\n").find("'colour'") != std::string::npos);
  CHECK(error_of("layers = 2,2\nbias = true,false,true\n").find("'bias'") != std::string::npos);
  CHECK(error_of("norm = cubic\n").find("'norm'") != std::string::npos);
  CHECK(error_of("seed = 1\nseed = 2\n").find("line 2") != std::string::npos);
  CHECK(error_of("just text\n").find("line 1") != std::string::npos);
  CHECK(error_of("input_dim = 1\n").find("input_dim") != std::string::npos);
  CHECK(config_keys().size() == 26);
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = fs::temp_directory_path() / "deh_test_checkpoint";
  fs::create_directories(dir);
  ExperimentConfig config;
  config.model = regression_model_spec();
  const ModelLayout layout(config.model);
  auto params = init_params(layout, 3);
  params[0] = 1.0 / 3.0;
  params[1] = -0.0;
  save_checkpoint(dir / "a.bin", config, params);
  const Checkpoint back = load_checkpoint(dir / "a.bin");
  CHECK(back.params == params);
  CHECK(std::signbit(back.params[1]));
  CHECK(to_config_text(back.config) == to_config_text(config));

  std::string bytes;
  {
    std::ifstream in(dir / "a.bin", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  CHECK(bytes.substr(0, 8) == "DEHCKPT1");

  std::string bad = bytes;
  bad[3] = 'X';
  std::ofstream(dir / "bad.bin", std::ios::binary) << bad;
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "bad.bin"), doctest::Contains("bad magic"), Error);

  std::ofstream(dir / "short.bin", std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  CHECK_THROWS_AS(load_checkpoint(dir / "short.bin"), Error);

  CHECK_THROWS_AS(save_checkpoint(dir / "c.bin", config, std::vector<double>(3)), Error);
  fs::remove_all(dir);
}

TEST_CASE("shipped regression config") {
  const ExperimentConfig c = read_config(fs::path(DEH_SOURCE_DIR) / "configs" / "regression.cfg");
  CHECK(ModelLayout(c.model).param_count() == 275);
  CHECK(c.train.restarts == 3);
  CHECK_THROWS_WITH_AS(read_config("/nonexistent/x.cfg"), doctest::Contains("/nonexistent/x.cfg"), Error);
}
