#pragma once

#include "deh/linalg.hpp"

namespace deh {

enum class Loss { mse, cross_entropy };

std::string to_string(Loss loss);
Loss parse_loss(const std::string& text);

// Mean squared error over output components, or softmax cross entropy with
// target[0] holding the class index.
template <class T>
T sample_loss(Loss loss, const Vec<T>& output, std::span<const double> target) {
  if (loss == Loss::mse) {
    require(target.size() == output.size(), ErrorKind::dimension_mismatch,
            "mse: target and output differ in length");
    T acc = T(0);
    for (std::size_t i = 0; i < output.size(); ++i) {
      const T d = output[i] - T(target[i]);
      acc += d * d;
    }
    return acc * T(1.0 / static_cast<double>(output.size()));
  }
  require(!target.empty(), ErrorKind::dimension_mismatch, "cross entropy: missing label");
  const auto label = static_cast<std::size_t>(target[0]);
  require(target[0] >= 0 && label < output.size() && static_cast<double>(label) == target[0],
          ErrorKind::invalid_argument, "cross entropy: label out of range");
  using std::exp;
  using std::log;
  std::size_t top = 0;
  for (std::size_t i = 1; i < output.size(); ++i)
    if (value_of(output[i]) > value_of(output[top])) top = i;
  const T shift = output[top];
  T total = T(0);
  for (const T& o : output) total += exp(o - shift);
  return log(total) + shift - output[label];
}

}  // namespace deh
