#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "as2/errors.hpp"

namespace as2 {

// Dense row-major float64 tensor. Rank 1 and 2 cover everything the model
// needs; invariant: numel(shape) == data.size(), all values finite.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d);

  static Tensor zeros(std::vector<std::size_t> s);
  static Tensor full(std::vector<std::size_t> s, double v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i, std::size_t j) { return data[i * cols() + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols() + j]; }
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
};

std::size_t shape_numel(const std::vector<std::size_t>& s);

// Throws numeric_error if any entry is NaN or Inf.
void check_finite(const Tensor& t, const char* what);

bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace as2
