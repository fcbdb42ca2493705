#pragma once

#include <optional>

#include "storewatch/tensor.hpp"

// Inference-time neural operators over HWC tensors. Every function is pure:
// inputs are never modified and results are freshly allocated.
namespace storewatch::ops {

enum class Padding { valid, same };

struct ConvSpec {
  std::size_t stride = 1;
  Padding padding = Padding::valid;
  std::size_t groups = 1;  // groups == in_channels gives a depthwise convolution
};

/// Output extent along one spatial axis.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding);

/// Leading (top/left) padding for `same`; the odd cell goes bottom/right.
std::size_t same_padding_before(std::size_t in, std::size_t kernel, std::size_t stride);

/// input H x W x Cin, kernels kh x kw x (Cin/groups) x Cout, optional bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& kernels, const std::optional<Tensor>& bias,
              const ConvSpec& spec);

Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                            const Tensor& variance, float epsilon);

Tensor relu(const Tensor& x);
void relu_inplace(Tensor& x) noexcept;

enum class PoolMode { max, global_avg };

/// `max` needs window and stride; `global_avg` collapses H x W x C to [C].
/// Max pooling with `same` padding ignores out-of-range cells.
Tensor pool2d(const Tensor& x, PoolMode mode, std::optional<std::size_t> window = std::nullopt,
              std::optional<std::size_t> stride = std::nullopt, Padding padding = Padding::valid);

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

Tensor softmax(const Tensor& x);

/// Elementwise sum of equally shaped tensors (residual joins).
Tensor add(const Tensor& a, const Tensor& b);

}  // namespace storewatch::ops
