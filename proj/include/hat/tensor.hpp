// Dense row-major 2-D tensor. Everything the pipeline computes is a matrix
// (sequence rows x feature cols), so there is no general rank-N machinery.
#pragma once

#include <cmath>
#include <vector>

#include "hat/common.hpp"

namespace hat {

template <typename T>
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, T(0)) {}

  T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  T* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const T* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool operator==(const Tensor&) const = default;
};

template <typename T>
bool all_finite(const Tensor<T>& t) {
  for (T v : t.data)
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

// Fill with samples from normal(0, stddev) using the shared deterministic RNG.
template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double stddev) {
  for (T& v : t.data) v = static_cast<T>(rng.normal() * stddev);
}

}  // namespace hat
