#pragma once

#include <doctest.h>

#include <cmath>

#include "deh/linalg.hpp"
#include "deh/rng.hpp"

namespace test {

inline deh::Vec<double> gaussian_vec(deh::CounterRng& rng, std::size_t n) {
  deh::Vec<double> v(n);
  for (double& x : v) x = rng.gaussian();
  return v;
}

inline deh::Matrix<double> gaussian_points(deh::CounterRng& rng, std::size_t rows,
                                           std::size_t cols) {
  deh::Matrix<double> m(rows, cols);
  for (double& x : m.data()) x = rng.gaussian();
  return m;
}

inline double max_abs(const deh::Vec<double>& a, const deh::Vec<double>& b) {
  return deh::max_abs_diff(std::span<const double>(a), std::span<const double>(b));
}

}  // namespace test
