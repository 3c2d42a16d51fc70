#pragma once

// Experiment configuration as line-oriented key = value text.
//
//   # comment                     blank lines and '#' comments are ignored
//   input_dim = 5                 point dimension n
//   points = 2                    points per sample N
//   layers = 2                    neurons per layer, comma separated (e.g. 2,3)
//   bias = true                   per layer, one value or one per layer
//   norm = nonlinear              none | unit | nonlinear, per layer
//   learnable_norm = true         per layer
//   invariant = delta             delta | delta_edge | sum | l2norm
//   gram_entries = upper          full | upper
//   permutation_invariant = false
//   pooling = max                 max | mean | max_and_mean
//   fc_hidden = 32
//   output_dim = 1
//   center_input = false
//   rotation_grad = full          full | stop
//   loss = mse                    mse | cross_entropy
//   lr = 0.001
//   min_lr = 0                    floor of the cosine schedule
//   lr_schedule = constant        constant | cosine
//   beta1 = 0.9
//   beta2 = 0.999
//   adam_epsilon = 1e-8
//   batch = 64
//   epochs = 500
//   seed = 1
//   restarts = 1
//   precision = f64               f32 | f64
//
// Omitted keys keep their defaults. Unknown or repeated keys are errors.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "deh/training.hpp"

namespace deh {

struct ExperimentConfig {
  ModelSpec model;
  TrainConfig train;
};

std::vector<std::string> config_keys();

ExperimentConfig parse_config(std::istream& in, const std::string& source = "config");
ExperimentConfig read_config(const std::filesystem::path& path);

// Sets one key as if it had appeared in a config file. Per-layer keys are
// resolved against the current layer count.
void set_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

// Canonical text listing every key; parse_config(to_config_text(c)) == c.
std::string to_config_text(const ExperimentConfig& config);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t config_hash(const ExperimentConfig& config);

}  // namespace deh
