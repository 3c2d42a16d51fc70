#include "deh/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace deh {
namespace {

const std::vector<std::string> kKeys = {
    "input_dim",   "points",        "layers",     "bias",         "norm",
    "learnable_norm", "invariant",  "gram_entries", "permutation_invariant",
    "pooling",     "fc_hidden",     "output_dim", "center_input", "rotation_grad",
    "loss",        "lr",            "min_lr",     "lr_schedule",  "beta1",
    "beta2",       "adam_epsilon",  "batch",      "epochs",       "seed",
    "restarts",    "precision"};

std::string trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return std::string(text.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) parts.push_back(trim(item));
  return parts;
}

[[noreturn]] void bad_field(const std::string& key, const std::string& what) {
  fail(ErrorKind::config, "field '" + key + "': " + what);
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    bad_field(key, "expected a non-negative integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    bad_field(key, "expected a number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  bad_field(key, "expected true or false, got '" + text + "'");
}

template <class F>
auto rethrow_as_field(const std::string& key, F&& parse) {
  try {
    return parse();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::config) throw;
    bad_field(key, e.what());
  }
}

template <class F>
void per_layer(ModelSpec& spec, const std::string& key, const std::string& value, F&& assign) {
  const auto parts = split_list(value);
  if (parts.size() != 1 && parts.size() != spec.layers.size())
    bad_field(key, "expected 1 or " + std::to_string(spec.layers.size()) + " values, got " +
                       std::to_string(parts.size()));
  for (std::size_t l = 0; l < spec.layers.size(); ++l)
    assign(spec.layers[l], parts.size() == 1 ? parts[0] : parts[l]);
}

template <class F>
std::string join_layers(const std::vector<LayerSpec>& layers, F&& get) {
  std::string out;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l) out += ",";
    out += get(layers[l]);
  }
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

std::vector<std::string> config_keys() { return kKeys; }

void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value) {
  ModelSpec& m = config.model;
  TrainConfig& t = config.train;
  if (key == "input_dim") {
    m.input_dim = parse_uint(key, value);
  } else if (key == "points") {
    m.points = parse_uint(key, value);
  } else if (key == "layers") {
    const auto parts = split_list(value);
    if (parts.empty()) bad_field(key, "expected at least one layer width");
    const LayerSpec last = m.layers.empty() ? LayerSpec{} : m.layers.back();
    m.layers.resize(parts.size(), last);
    for (std::size_t l = 0; l < parts.size(); ++l) {
      m.layers[l].width = parse_uint(key, parts[l]);
      if (m.layers[l].width == 0) bad_field(key, "layer widths must be at least 1");
    }
  } else if (key == "bias") {
    per_layer(m, key, value, [&](LayerSpec& l, const std::string& v) { l.use_bias = parse_bool(key, v); });
  } else if (key == "norm") {
    per_layer(m, key, value, [&](LayerSpec& l, const std::string& v) {
      l.norm = rethrow_as_field(key, [&] { return parse_norm_mode(v); });
    });
  } else if (key == "learnable_norm") {
    per_layer(m, key, value,
              [&](LayerSpec& l, const std::string& v) { l.learnable_norm = parse_bool(key, v); });
  } else if (key == "invariant") {
    m.invariant = rethrow_as_field(key, [&] { return parse_invariant_op(value); });
  } else if (key == "gram_entries") {
    m.gram_entries = rethrow_as_field(key, [&] { return parse_gram_entries(value); });
  } else if (key == "permutation_invariant") {
    m.permutation_invariant = parse_bool(key, value);
  } else if (key == "pooling") {
    m.pooling = rethrow_as_field(key, [&] { return parse_pooling(value); });
  } else if (key == "fc_hidden") {
    m.fc_hidden = parse_uint(key, value);
  } else if (key == "output_dim") {
    m.output_dim = parse_uint(key, value);
  } else if (key == "center_input") {
    m.center_input = parse_bool(key, value);
  } else if (key == "rotation_grad") {
    m.rotation_grad = rethrow_as_field(key, [&] { return parse_rotation_grad(value); });
  } else if (key == "loss") {
    t.loss = rethrow_as_field(key, [&] { return parse_loss(value); });
  } else if (key == "lr") {
    t.learning_rate = parse_real(key, value);
    if (!(t.learning_rate > 0.0)) bad_field(key, "must be positive");
  } else if (key == "min_lr") {
    t.min_learning_rate = parse_real(key, value);
    if (t.min_learning_rate < 0.0) bad_field(key, "must be non-negative");
  } else if (key == "lr_schedule") {
    t.schedule = rethrow_as_field(key, [&] { return parse_lr_schedule(value); });
  } else if (key == "beta1") {
    t.beta1 = parse_real(key, value);
    if (t.beta1 < 0.0 || t.beta1 >= 1.0) bad_field(key, "must lie in [0, 1)");
  } else if (key == "beta2") {
    t.beta2 = parse_real(key, value);
    if (t.beta2 < 0.0 || t.beta2 >= 1.0) bad_field(key, "must lie in [0, 1)");
  } else if (key == "adam_epsilon") {
    t.adam_epsilon = parse_real(key, value);
    if (!(t.adam_epsilon > 0.0)) bad_field(key, "must be positive");
  } else if (key == "batch") {
    t.batch_size = parse_uint(key, value);
    if (t.batch_size == 0) bad_field(key, "must be at least 1");
  } else if (key == "epochs") {
    t.epochs = parse_uint(key, value);
  } else if (key == "seed") {
    t.seed = parse_uint(key, value);
  } else if (key == "restarts") {
    t.restarts = parse_uint(key, value);
    if (t.restarts == 0) bad_field(key, "must be at least 1");
  } else if (key == "precision") {
    t.precision = rethrow_as_field(key, [&] { return parse_precision(value); });
  } else {
    fail(ErrorKind::config, "unknown field '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& source) {
  std::map<std::string, std::pair<std::string, std::size_t>> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = source + " line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) fail(ErrorKind::config, where + "expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) fail(ErrorKind::config, where + "missing key");
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
      fail(ErrorKind::config, where + "unknown field '" + key + "'");
    if (entries.count(key))
      fail(ErrorKind::config, where + "field '" + key + "' repeats line " +
                                  std::to_string(entries[key].second));
    entries[key] = {value, number};
  }

  ExperimentConfig config;
  auto apply = [&](const std::string& key) {
    const auto it = entries.find(key);
    if (it == entries.end()) return;
    try {
      set_config_value(config, key, it->second.first);
    } catch (const Error& e) {
      fail(e.kind(), source + " line " + std::to_string(it->second.second) + ": " + e.what());
    }
  };
  apply("layers");
  for (const std::string& key : kKeys)
    if (key != "layers") apply(key);
  try {
    config.model.validate();
  } catch (const Error& e) {
    fail(e.kind(), source + ": " + e.what());
  }
  return config;
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file '" + path.string() + "'");
  return parse_config(in, path.string());
}

std::string to_config_text(const ExperimentConfig& config) {
  const ModelSpec& m = config.model;
  const TrainConfig& t = config.train;
  std::ostringstream out;
  out << "input_dim = " << m.input_dim << "\n";
  out << "points = " << m.points << "\n";
  out << "layers = "
      << join_layers(m.layers, [](const LayerSpec& l) { return std::to_string(l.width); })
      << "\n";
  out << "bias = "
      << join_layers(m.layers, [](const LayerSpec& l) { return bool_text(l.use_bias); }) << "\n";
  out << "norm = "
      << join_layers(m.layers, [](const LayerSpec& l) { return to_string(l.norm); })
      << "\n";
  out << "learnable_norm = "
      << join_layers(m.layers, [](const LayerSpec& l) { return bool_text(l.learnable_norm); })
      << "\n";
  out << "invariant = " << to_string(m.invariant) << "\n";
  out << "gram_entries = " << to_string(m.gram_entries) << "\n";
  out << "permutation_invariant = " << bool_text(m.permutation_invariant) << "\n";
  out << "pooling = " << to_string(m.pooling) << "\n";
  out << "fc_hidden = " << m.fc_hidden << "\n";
  out << "output_dim = " << m.output_dim << "\n";
  out << "center_input = " << bool_text(m.center_input) << "\n";
  out << "rotation_grad = " << to_string(m.rotation_grad) << "\n";
  out << "loss = " << to_string(t.loss) << "\n";
  out << "lr = " << format_double(t.learning_rate) << "\n";
  out << "min_lr = " << format_double(t.min_learning_rate) << "\n";
  out << "lr_schedule = " << to_string(t.schedule) << "\n";
  out << "beta1 = " << format_double(t.beta1) << "\n";
  out << "beta2 = " << format_double(t.beta2) << "\n";
  out << "adam_epsilon = " << format_double(t.adam_epsilon) << "\n";
  out << "batch = " << t.batch_size << "\n";
  out << "epochs = " << t.epochs << "\n";
  out << "seed = " << t.seed << "\n";
  out << "restarts = " << t.restarts << "\n";
  out << "precision = " << to_string(t.precision) << "\n";
  return out.str();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
  return fnv1a64(to_config_text(config));
}

}  // namespace deh
