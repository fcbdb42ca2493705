#pragma once

#include <optional>
#include <string>
#include <vector>

#include "storewatch/ops.hpp"
#include "storewatch/tensor.hpp"
#include "storewatch/weights_io.hpp"

namespace storewatch::nn {

enum class LayerKind { conv2d, batch_norm, relu, max_pool, global_avg_pool, dense, softmax, add };

const char* to_string(LayerKind kind) noexcept;

struct BatchNormParams {
  Tensor gamma, beta, mean, variance;
  float epsilon = 1e-3f;
};

/// One node of a feed-forward graph. `inputs` index value slots: slot 0 is
/// the network input and slot i + 1 is the output of layer i.
struct Layer {
  LayerKind kind;
  std::string name;
  std::vector<std::size_t> inputs;
  ops::ConvSpec conv{};
  Tensor weights;
  std::optional<Tensor> bias;
  BatchNormParams bn{};
  std::size_t window = 0;
  std::size_t stride = 0;
  ops::Padding padding = ops::Padding::valid;
};

/// Immutable once built; forward() keeps no state, so one instance can serve
/// concurrent callers.
class Network {
 public:
  using Slot = std::size_t;
  static constexpr Slot kInput = 0;

  Slot conv2d(Slot in, std::string name, Tensor kernel, std::optional<Tensor> bias, ops::ConvSpec spec);
  Slot batch_norm(Slot in, std::string name, BatchNormParams params);
  Slot relu(Slot in);
  Slot max_pool(Slot in, std::size_t window, std::size_t stride, ops::Padding padding);
  Slot global_avg_pool(Slot in);
  Slot dense(Slot in, std::string name, Tensor weights, Tensor bias);
  Slot softmax(Slot in);
  Slot add(Slot a, Slot b);
  void mark_output(Slot slot);

  /// Values of the marked output slots, in marking order.
  std::vector<Tensor> forward(const Tensor& input) const;

  const std::vector<Layer>& layers() const noexcept { return layers_; }
  std::size_t count(LayerKind kind) const noexcept;
  /// Kernels, biases and batch-norm scale/shift; moving statistics excluded.
  std::size_t trainable_parameter_count() const noexcept;
  std::size_t parameter_count() const noexcept;

 private:
  Slot push(Layer layer);

  std::vector<Layer> layers_;
  std::vector<Slot> outputs_;
};

/// Looks up `name` and checks its dims, throwing MissingWeightError or a
/// ShapeError that names the tensor.
Tensor take_weight(const weights::TensorArchive& archive, const std::string& name, const Shape& dims);

BatchNormParams take_batch_norm(const weights::TensorArchive& archive, const std::string& prefix, std::size_t channels,
                                float epsilon);

void append_batch_norm_manifest(weights::Manifest& manifest, const std::string& prefix, std::size_t channels);

}  // namespace storewatch::nn
