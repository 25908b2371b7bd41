#include "meterguard/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace meterguard::nn {

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_string(shape_));
  }
}

MatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) {
  if (rows * cols != data_.size()) {
    throw std::invalid_argument("cannot view tensor " + shape_string(shape_) + " as " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  return MatrixMap(data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatrixMap Tensor::matrix(std::size_t rows, std::size_t cols) const {
  if (rows * cols != data_.size()) {
    throw std::invalid_argument("cannot view tensor " + shape_string(shape_) + " as " +
                                std::to_string(rows) + "x" + std::to_string(cols));
  }
  return ConstMatrixMap(data_.data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

MatrixMap Tensor::as_matrix() {
  const std::size_t rows = shape_.empty() ? 1 : shape_[0];
  return matrix(rows, rows ? data_.size() / rows : 0);
}

ConstMatrixMap Tensor::as_matrix() const {
  const std::size_t rows = shape_.empty() ? 1 : shape_[0];
  return matrix(rows, rows ? data_.size() / rows : 0);
}

Tensor Tensor::reshaped(Shape shape) const {
  Tensor t = *this;
  t.reshape(std::move(shape));
  return t;
}

void Tensor::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("cannot reshape " + shape_string(shape_) + " to " +
                                shape_string(shape));
  }
  shape_ = std::move(shape);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace meterguard::nn
