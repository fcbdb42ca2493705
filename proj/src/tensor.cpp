#include "storewatch/tensor.hpp"

#include <sstream>
#include <utility>

#include "storewatch/error.hpp"

namespace storewatch {

namespace {

void check_dims(const Shape& dims) {
  if (dims.empty() || dims.size() > Tensor::kMaxRank) {
    throw ShapeError("tensor rank must be 1.." + std::to_string(Tensor::kMaxRank) + ", got " +
                     std::to_string(dims.size()));
  }
  for (std::size_t axis = 0; axis < dims.size(); ++axis) {
    if (dims[axis] == 0) {
      throw ShapeError("tensor axis " + std::to_string(axis) + " has zero extent");
    }
  }
}

}  // namespace

std::size_t shape_size(const Shape& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::string shape_to_string(const Shape& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << 'x';
    os << dims[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape dims) : Tensor(std::move(dims), 0.0f) {}

Tensor::Tensor(Shape dims, float fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(shape_size(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<float> data) : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (shape_size(dims_) != data_.size()) {
    throw ShapeError("tensor dims " + shape_to_string(dims_) + " hold " +
                     std::to_string(shape_size(dims_)) + " values but " +
                     std::to_string(data_.size()) + " were given");
  }
}

Tensor Tensor::reshaped(Shape dims) const& { return Tensor(std::move(dims), data_); }

Tensor Tensor::reshaped(Shape dims) && { return Tensor(std::move(dims), std::move(data_)); }

}  // namespace storewatch
