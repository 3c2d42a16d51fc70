#include "deh/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "deh/rng.hpp"

namespace deh {

double target_function(std::span<const double> x1, std::span<const double> x2) {
  require(x1.size() == x2.size(), ErrorKind::dimension_mismatch,
          "target_function: inputs differ in dimension");
  const double n1 = std::sqrt(squared_norm(x1));
  const double n2 = std::sqrt(squared_norm(x2));
  require(n1 > 0.0 && n2 > 0.0, ErrorKind::invalid_argument,
          "target_function: zero-norm input");
  return std::sin(n1) - n2 * n2 * n2 / 2.0 + dot(x1, x2) / (n1 * n2);
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

std::vector<Sample> Dataset::split(Split which, std::size_t limit) const {
  std::vector<Sample> out;
  for (const Sample& s : samples) {
    if (out.size() >= limit) break;
    if (s.split == which) out.push_back(s);
  }
  return out;
}

Dataset generate_regression(std::size_t count, std::uint64_t seed, SplitRatios ratios) {
  require(count >= 1, ErrorKind::invalid_argument, "sample count must be at least 1");
  constexpr std::size_t dim = 5;
  Dataset data;
  data.task = kRegressionTask;
  data.dim = dim;
  data.points = 2;
  data.targets = 1;
  data.seed = seed;
  data.samples.reserve(count);

  const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(count)));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * static_cast<double>(count)));
  CounterRng rng(seed);
  auto draw = [&] {
    Vec<double> x(dim);
    do {
      for (double& v : x) v = rng.gaussian();
    } while (squared_norm(x) == 0.0);
    return x;
  };
  for (std::size_t i = 0; i < count; ++i) {
    const Vec<double> x1 = draw();
    const Vec<double> x2 = draw();
    Sample s;
    s.points = Matrix<double>(2, dim);
    for (std::size_t j = 0; j < dim; ++j) {
      s.points(0, j) = x1[j];
      s.points(1, j) = x2[j];
    }
    s.target = {target_function(x1, x2)};
    s.split = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
    data.samples.push_back(std::move(s));
  }
  return data;
}

std::vector<std::string> supported_tasks() { return {kRegressionTask}; }

Dataset generate_task(const std::string& task, std::size_t count, std::uint64_t seed) {
  if (task == kRegressionTask) return generate_regression(count, seed);
  std::string list;
  for (const auto& t : supported_tasks()) list += (list.empty() ? "" : ", ") + t;
  fail(ErrorKind::invalid_argument, "unknown task '" + task + "' (supported: " + list + ")");
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

void write_dataset(const Dataset& data, std::ostream& out) {
  out << "deh-dataset " << kDatasetSchemaVersion << " task=" << data.task << " dim=" << data.dim
      << " points=" << data.points << " targets=" << data.targets
      << " count=" << data.samples.size() << " seed=" << data.seed << '\n';
  for (const Sample& s : data.samples) {
    out << to_string(s.split);
    for (double v : s.points.data()) out << ' ' << format_double(v);
    for (double v : s.target) out << ' ' << format_double(v);
    out << '\n';
  }
}

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  write_dataset(data, out);
  out.flush();
  require(static_cast<bool>(out), ErrorKind::io, "failed writing '" + path.string() + "'");
}

namespace {

[[noreturn]] void bad_line(std::size_t line, const std::string& what) {
  fail(ErrorKind::io, "dataset line " + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) tokens.push_back(tok);
  return tokens;
}

template <class U>
U parse_number(const std::string& text, std::size_t line, const std::string& field) {
  U value{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    bad_line(line, "invalid " + field + " '" + text + "'");
  return value;
}

}  // namespace

Dataset read_dataset(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) bad_line(lineno, "missing header");
  const auto header = split_tokens(line);
  if (header.size() < 2 || header[0] != "deh-dataset") bad_line(lineno, "not a dataset file");
  const int version = parse_number<int>(header[1], lineno, "schema version");
  if (version != kDatasetSchemaVersion)
    fail(ErrorKind::io, "unsupported dataset schema version " + header[1]);

  Dataset data;
  std::size_t count = 0;
  bool have_task = false, have_dim = false, have_points = false, have_count = false;
  for (std::size_t i = 2; i < header.size(); ++i) {
    const auto eq = header[i].find('=');
    if (eq == std::string::npos) bad_line(lineno, "malformed header field '" + header[i] + "'");
    const std::string key = header[i].substr(0, eq);
    const std::string value = header[i].substr(eq + 1);
    if (key == "task") {
      data.task = value;
      have_task = true;
    } else if (key == "dim") {
      data.dim = parse_number<std::size_t>(value, lineno, key);
      have_dim = true;
    } else if (key == "points") {
      data.points = parse_number<std::size_t>(value, lineno, key);
      have_points = true;
    } else if (key == "targets") {
      data.targets = parse_number<std::size_t>(value, lineno, key);
    } else if (key == "count") {
      count = parse_number<std::size_t>(value, lineno, key);
      have_count = true;
    } else if (key == "seed") {
      data.seed = parse_number<std::uint64_t>(value, lineno, key);
    }
  }
  if (!(have_task && have_dim && have_points && have_count))
    bad_line(lineno, "header must define task, dim, points and count");

  const std::size_t width = data.points * data.dim;
  data.samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    ++lineno;
    if (!std::getline(in, line)) bad_line(lineno, "expected a record, found end of file");
    const auto tokens = split_tokens(line);
    if (tokens.size() != 1 + width + data.targets)
      bad_line(lineno, "expected " + std::to_string(1 + width + data.targets) + " fields, found " +
                           std::to_string(tokens.size()));
    Sample s;
    if (tokens[0] == "train") {
      s.split = Split::train;
    } else if (tokens[0] == "val") {
      s.split = Split::val;
    } else if (tokens[0] == "test") {
      s.split = Split::test;
    } else {
      bad_line(lineno, "unknown split '" + tokens[0] + "'");
    }
    s.points = Matrix<double>(data.points, data.dim);
    for (std::size_t j = 0; j < width; ++j)
      s.points.data()[j] = parse_number<double>(tokens[1 + j], lineno, "coordinate");
    s.target.resize(data.targets);
    for (std::size_t j = 0; j < data.targets; ++j)
      s.target[j] = parse_number<double>(tokens[1 + width + j], lineno, "target");
    data.samples.push_back(std::move(s));
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (!split_tokens(line).empty()) bad_line(lineno, "more records than the header count");
  }
  return data;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open dataset '" + path.string() + "'");
  return read_dataset(in);
}

}  // namespace deh
