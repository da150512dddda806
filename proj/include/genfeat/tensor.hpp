#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace genfeat {

using real = double;

// Dense row-major tensor. Shapes carry no zero extents; a scalar is {1}.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<real> data);

  static Tensor scalar(real v) { return Tensor({1}, {v}); }
  static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<std::size_t> shape, real v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t extent(std::size_t axis) const;
  std::size_t numel() const { return data_.size(); }
  bool defined() const { return !shape_.empty(); }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }

  real& operator()(std::size_t i) { return data_[i]; }
  real operator()(std::size_t i) const { return data_[i]; }
  real& operator()(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  real operator()(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  real& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  real operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(real v);

private:
  std::vector<std::size_t> shape_;
  std::vector<real> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);
std::string shape_str(const std::vector<std::size_t>& shape);

// Throws DataError on mismatch; `where` names the operation for the message.
void require_shape(const Tensor& t, const std::vector<std::size_t>& shape, const char* where);
void require_rank(const Tensor& t, std::size_t rank, const char* where);

}  // namespace genfeat
