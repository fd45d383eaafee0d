// SPDX-License-Identifier: Apache-2.0
#include "prunelab/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "prunelab/errors.hpp"

namespace prunelab {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (std::size_t d : dims) {
    if (d == 0) {
      throw ShapeError("tensor extents must be positive");
    }
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> dims, float fill) : dims_(std::move(dims)) {
  data_.assign(checked_product(dims_), fill);
}

Tensor::Tensor(std::vector<std::size_t> dims, std::vector<float> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (checked_product(dims_) != data_.size()) {
    throw ShapeError("tensor payload of " + std::to_string(data_.size()) + " values does not match shape " +
                     shape_string());
  }
}

Tensor Tensor::vector(std::initializer_list<float> values) {
  return Tensor({values.size()}, std::vector<float>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<float> values) {
  return Tensor({rows, cols}, std::vector<float>(values));
}

bool Tensor::all_finite() const noexcept {
  for (float v : data_) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

bool Tensor::bit_equal(const Tensor& other) const noexcept {
  return dims_ == other.dims_ &&
         (data_.empty() || std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0);
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i > 0) {
      s += ", ";
    }
    s += std::to_string(dims_[i]);
  }
  return s + "]";
}

Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices) {
  if (source.rank() != 2) {
    throw ShapeError("gather_rows expects a rank-2 tensor, got " + source.shape_string());
  }
  const std::size_t cols = source.dim(1);
  Tensor out({indices.size(), cols});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= source.dim(0)) {
      throw ShapeError("gather_rows index out of range");
    }
    auto src = source.row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Tensor l2_normalize(const Tensor& v) {
  if (v.rank() != 1) {
    throw ShapeError("l2_normalize expects a rank-1 tensor, got " + v.shape_string());
  }
  double sq = 0.0;
  for (float x : v.data()) {
    sq += static_cast<double>(x) * x;
  }
  if (!(sq > 0.0)) {
    throw DegenerateInputError("cannot L2-normalize a zero vector");
  }
  const double norm = std::sqrt(sq);
  Tensor out(v.dims());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<float>(v[i] / norm);
  }
  return out;
}

}  // namespace prunelab
