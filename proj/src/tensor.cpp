#include "as2/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace as2 {

std::size_t shape_numel(const std::vector<std::size_t>& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return s.empty() ? 0 : n;
}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (shape_numel(shape) != data.size())
    throw dimension_error("tensor shape " + shape_str() + " does not match " +
                          std::to_string(data.size()) + " values");
}

Tensor Tensor::zeros(std::vector<std::size_t> s) {
  Tensor t;
  t.shape = std::move(s);
  t.data.assign(shape_numel(t.shape), 0.0);
  return t;
}

Tensor Tensor::full(std::vector<std::size_t> s, double v) {
  Tensor t;
  t.shape = std::move(s);
  t.data.assign(shape_numel(t.shape), v);
  return t;
}

Tensor Tensor::vec(std::vector<double> v) {
  Tensor t;
  t.shape = {v.size()};
  t.data = std::move(v);
  return t;
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> v) {
  return Tensor({r, c}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw dimension_error("rows() on tensor " + shape_str());
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape[1];
  if (rank() == 1) return shape[0];
  throw dimension_error("cols() on tensor " + shape_str());
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    os << (i ? "x" : "") << shape[i];
  os << "]";
  return os.str();
}

void check_finite(const Tensor& t, const char* what) {
  for (double v : t.data) {
    if (!std::isfinite(v))
      throw numeric_error(std::string("non-finite value in ") + what);
  }
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape != b.shape) return false;
  return a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(double)) == 0;
}

}  // namespace as2
