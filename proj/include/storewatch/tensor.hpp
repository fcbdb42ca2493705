#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace storewatch {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& dims);
std::string shape_to_string(const Shape& dims);

/// Dense row-major float tensor of rank 1..4. Convolutional activations use
/// height x width x channels; kernels use kh x kw x in x out.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 4;

  Tensor() = default;
  explicit Tensor(Shape dims);
  Tensor(Shape dims, float fill);
  Tensor(Shape dims, std::vector<float> data);
  Tensor(std::initializer_list<std::size_t> dims, std::vector<float> data)
      : Tensor(Shape(dims), std::move(data)) {}

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  const std::vector<float>& values() const noexcept { return data_; }

  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator[](std::size_t i) const noexcept { return data_[i]; }

  // Rank-3 accessors for HWC feature maps.
  float& at(std::size_t y, std::size_t x, std::size_t c) noexcept {
    return data_[(y * dims_[1] + x) * dims_[2] + c];
  }
  float at(std::size_t y, std::size_t x, std::size_t c) const noexcept {
    return data_[(y * dims_[1] + x) * dims_[2] + c];
  }

  /// Same data viewed with new dims; the element count must not change.
  Tensor reshaped(Shape dims) const&;
  Tensor reshaped(Shape dims) &&;

  bool operator==(const Tensor& other) const = default;

 private:
  Shape dims_;
  std::vector<float> data_;
};

}  // namespace storewatch
