#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace cda {

// Dense row-major tensor of doubles. Rank is 1 (vector) or 2 (matrix);
// that is all the model needs.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  Tensor() = default;

  static Tensor vec(std::size_t n, double fill = 0.0) {
    Tensor t;
    t.shape = {n};
    t.v.assign(n, fill);
    return t;
  }

  static Tensor mat(std::size_t rows, std::size_t cols, double fill = 0.0) {
    Tensor t;
    t.shape = {rows, cols};
    t.v.assign(rows * cols, fill);
    return t;
  }

  static Tensor from(std::initializer_list<double> xs) {
    Tensor t;
    t.shape = {xs.size()};
    t.v.assign(xs);
    return t;
  }

  std::size_t numel() const { return v.size(); }
  bool is_vector() const { return shape.size() == 1; }
  bool is_matrix() const { return shape.size() == 2; }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  double& at(std::size_t r, std::size_t c) { return v[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols() + c]; }

  double* row_ptr(std::size_t r) { return v.data() + r * cols(); }
  const double* row_ptr(std::size_t r) const { return v.data() + r * cols(); }

  void append_row(const std::vector<double>& row) {
    if (!is_matrix() || row.size() != cols())
      throw std::invalid_argument("Tensor::append_row: size mismatch");
    v.insert(v.end(), row.begin(), row.end());
    shape[0] += 1;
  }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  bool same_bytes(const Tensor& o) const {
    if (shape != o.shape || v.size() != o.v.size()) return false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      // bit comparison, not value comparison: -0.0 != 0.0 here
      if (std::bit_cast<std::uint64_t>(v[i]) != std::bit_cast<std::uint64_t>(o.v[i]))
        return false;
    }
    return true;
  }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (i) s += "x";
      s += std::to_string(shape[i]);
    }
    return s + "]";
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l2norm(const std::vector<double>& a) {
  return std::sqrt(dot(a, a));
}

}  // namespace cda
