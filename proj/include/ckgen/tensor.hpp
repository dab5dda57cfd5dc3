#pragma once

#include <cstddef>
#include <vector>

#include "ckgen/rng.hpp"

namespace ckgen {

// Dense row-major double matrix. Vectors are 1 x n.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  static Tensor zeros(std::size_t r, std::size_t c) { return Tensor(r, c, 0.0); }
  static Tensor full(std::size_t r, std::size_t c, double v) { return Tensor(r, c, v); }
  static Tensor uniform(std::size_t r, std::size_t c, double limit, Rng& rng);

  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row_ptr(std::size_t r) { return data.data() + r * cols; }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

  double* ptr() { return data.data(); }
  const double* ptr() const { return data.data(); }

  void fill(double v) { data.assign(data.size(), v); }
};

}  // namespace ckgen
