// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace prunelab {

/// Dense row-major tensor of 32-bit floats.
///
/// Batches are rank-2 with shape [batch, features]; affine weights are
/// [out, in]. Every extent is positive and `size() == product(dims)`.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);
  Tensor(std::vector<std::size_t> dims, std::vector<float> data);

  static Tensor vector(std::initializer_list<float> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<float> values);

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Element (r, c) of a rank-2 tensor.
  float& at(std::size_t r, std::size_t c) noexcept { return data_[r * dims_[1] + c]; }
  float at(std::size_t r, std::size_t c) const noexcept { return data_[r * dims_[1] + c]; }

  /// Row `r` of a rank-2 tensor.
  std::span<float> row(std::size_t r) noexcept { return std::span<float>(data_).subspan(r * dims_[1], dims_[1]); }
  std::span<const float> row(std::size_t r) const noexcept {
    return std::span<const float>(data_).subspan(r * dims_[1], dims_[1]);
  }

  bool all_finite() const noexcept;

  /// Compares dims and the raw bit patterns of the payload.
  bool bit_equal(const Tensor& other) const noexcept;

  std::string shape_string() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<float> data_;
};

/// Gathers rows `indices` of a rank-2 tensor into a new [indices.size(), cols] tensor.
Tensor gather_rows(const Tensor& source, std::span<const std::size_t> indices);

/// Scales a rank-1 tensor to unit Euclidean norm.
/// Throws DegenerateInputError for the zero vector.
Tensor l2_normalize(const Tensor& v);

}  // namespace prunelab
