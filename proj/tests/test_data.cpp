#include "support.hpp"

#include <numbers>
#include <sstream>

#include "deh/data.hpp"
#include "deh/error.hpp"
#include "deh/simplex.hpp"

using namespace deh;

TEST_CASE("target function") {
  const double h = std::numbers::pi / 2;
  const Vec<double> x{h, 0, 0, 0, 0};
  const double f = target_function(x, x);
  // sin(π/2) - (π/2)³/2 + 1
  CHECK(f == doctest::Approx(2.0 - std::pow(std::numbers::pi, 3) / 16.0).epsilon(1e-15));
  CHECK(f == doctest::Approx(0.06202).epsilon(1e-4));

  CounterRng rng(12);
  const Vec<double> a = test::gaussian_vec(rng, 5), b = test::gaussian_vec(rng, 5);
  const Matrix<double> r = random_orthogonal(5, 3, -1);
  CHECK(target_function(matvec(r, a), matvec(r, b)) ==
        doctest::Approx(target_function(a, b)).epsilon(1e-13));
  const double na = norm(a);
  CHECK(target_function(a, scaled(a, -1.0)) ==
        doctest::Approx(std::sin(na) - na * na * na / 2 - 1.0).epsilon(1e-14));
  CHECK_THROWS_AS(target_function(Vec<double>(5, 0.0), b), Error);
}

TEST_CASE("regression data generation") {
  const Dataset d = generate_regression(2000, 9);
  CHECK(d.task == "o5reg");
  CHECK(d.dim == 5);
  CHECK(d.points == 2);
  CHECK(d.samples.size() == 2000);
  CHECK(d.split(Split::train).size() == 1600);
  CHECK(d.split(Split::val).size() == 200);
  CHECK(d.split(Split::test).size() == 200);
  CHECK(d.split(Split::train, 10).size() == 10);

  double worst = 0.0;
  Vec<double> mean(10, 0.0);
  for (const Sample& s : d.samples) {
    const auto x1 = s.points.row(0), x2 = s.points.row(1);
    worst = std::max(worst, std::abs(s.target[0] - target_function(x1, x2)));
    for (std::size_t j = 0; j < 10; ++j) mean[j] += s.points.data()[j] / 2000.0;
  }
  CHECK(worst < 1e-12);
  for (double m : mean) CHECK(std::abs(m) < 4.0 / std::sqrt(2000.0));

  std::ostringstream a, b;
  write_dataset(d, a);
  write_dataset(generate_regression(2000, 9), b);
  CHECK(a.str() == b.str());
  std::ostringstream c;
  write_dataset(generate_regression(2000, 10), c);
  CHECK(a.str() != c.str());
  CHECK_THROWS_AS(generate_regression(0, 1), Error);
}

TEST_CASE("dataset file round trip") {
  const Dataset d = generate_regression(50, 4);
  std::stringstream io;
  write_dataset(d, io);
  const Dataset back = read_dataset(io);
  REQUIRE(back.samples.size() == 50);
  CHECK(back.seed == 4);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(back.samples[i].split == d.samples[i].split);
    CHECK(back.samples[i].target == d.samples[i].target);
    CHECK(back.samples[i].points.data() == d.samples[i].points.data());
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
}

TEST_CASE("dataset file errors") {
  std::ostringstream full;
  write_dataset(generate_regression(10, 1), full);
  const std::string text = full.str();

  SUBCASE("truncated file names the first missing line") {
    std::string cut = text.substr(0, text.find('\n', text.find('\n') + 1) + 1);  // header + 1 record
    std::istringstream in(cut);
    try {
      read_dataset(in);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
      CHECK(e.kind() == ErrorKind::io);
    }
  }
  SUBCASE("malformed number") {
    std::string bad = text;
    bad.replace(bad.find("train ") + 6, 1, "x");
    std::istringstream in(bad);
    CHECK_THROWS_WITH_AS(read_dataset(in), doctest::Contains("line 2"), Error);
  }
  SUBCASE("schema mismatch") {
    std::istringstream in("deh-dataset 2 task=o5reg dim=5 points=2 count=0\n");
    CHECK_THROWS_AS(read_dataset(in), Error);
  }
  SUBCASE("empty dataset with valid header") {
    std::istringstream in("deh-dataset 1 task=o5reg dim=5 points=2 targets=1 count=0 seed=3\n");
    const Dataset d = read_dataset(in);
    CHECK(d.samples.empty());
    CHECK(d.dim == 5);
  }
  SUBCASE("unknown task lists the supported ones") {
    CHECK_THROWS_WITH_AS(generate_task("hull", 10, 1), doctest::Contains("o5reg"), Error);
  }
}
