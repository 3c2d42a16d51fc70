#pragma once

// Synthetic O(5) regression data and the line-oriented dataset file format.
//
// File layout (UTF-8 text, '\n' line ends):
//
//   deh-dataset 1 task=<id> dim=<n> points=<N> targets=<t> count=<c> seed=<s>
//   <split> <x_11> ... <x_1n> ... <x_N1> ... <x_Nn> <target_1> ... <target_t>
//   ...
//
// <split> is one of train, val, test. Numbers use the shortest decimal form
// that round-trips to the same binary64 value.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "deh/linalg.hpp"

namespace deh {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr const char* kRegressionTask = "o5reg";

// sin(‖x1‖) - ‖x2‖³/2 + x1ᵀx2 / (‖x1‖‖x2‖)
double target_function(std::span<const double> x1, std::span<const double> x2);

enum class Split { train, val, test };

std::string to_string(Split split);

struct Sample {
  Matrix<double> points;  // N x n
  Vec<double> target;
  Split split = Split::train;
};

struct Dataset {
  std::string task;
  std::size_t dim = 0;
  std::size_t points = 0;
  std::size_t targets = 1;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;

  // Samples of one split in file order; at most `limit` when given.
  std::vector<Sample> split(Split which, std::size_t limit = SIZE_MAX) const;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
};

// i.i.d. standard-Gaussian x1, x2 in R^5 with targets. The first
// floor(0.8·count) samples are train, the next floor(0.1·count) val, the
// rest test.
Dataset generate_regression(std::size_t count, std::uint64_t seed, SplitRatios ratios = {});

std::vector<std::string> supported_tasks();

Dataset generate_task(const std::string& task, std::size_t count, std::uint64_t seed);

void write_dataset(const Dataset& data, std::ostream& out);
void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

std::string format_double(double value);

}  // namespace deh
