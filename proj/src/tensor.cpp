#include "genfeat/tensor.hpp"

#include <cmath>

#include "genfeat/errors.hpp"

namespace genfeat {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return shape.empty() ? 0 : n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw DataError("tensor shape has zero extent: " + shape_str(shape_));
  }
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<real> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (std::size_t e : shape_) {
    if (e == 0) throw DataError("tensor shape has zero extent: " + shape_str(shape_));
  }
  if (data_.size() != shape_numel(shape_)) {
    throw DataError("tensor data size " + std::to_string(data_.size()) +
                    " does not match shape " + shape_str(shape_));
  }
}

Tensor Tensor::full(std::vector<std::size_t> shape, real v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DataError("tensor axis " + std::to_string(axis) + " out of range for " +
                    shape_str(shape_));
  }
  return shape_[axis];
}

bool Tensor::all_finite() const {
  for (real v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(real v) {
  for (real& x : data_) x = v;
}

void require_shape(const Tensor& t, const std::vector<std::size_t>& shape, const char* where) {
  if (t.shape() != shape) {
    throw DataError(std::string(where) + ": expected shape " + shape_str(shape) + ", got " +
                    shape_str(t.shape()));
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* where) {
  if (t.rank() != rank) {
    throw DataError(std::string(where) + ": expected rank " + std::to_string(rank) + ", got " +
                    shape_str(t.shape()));
  }
}

}  // namespace genfeat
