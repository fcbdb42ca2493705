#include "storewatch/network.hpp"

#include "storewatch/error.hpp"

namespace storewatch::nn {

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batch_norm: return "batch_norm";
    case LayerKind::relu: return "relu";
    case LayerKind::max_pool: return "max_pool";
    case LayerKind::global_avg_pool: return "global_avg_pool";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
    case LayerKind::add: return "add";
  }
  return "unknown";
}

namespace {

Layer make_layer(LayerKind kind, std::string name, std::vector<std::size_t> inputs) {
  Layer l;
  l.kind = kind;
  l.name = std::move(name);
  l.inputs = std::move(inputs);
  return l;
}

}  // namespace

Network::Slot Network::push(Layer layer) {
  for (auto in : layer.inputs) {
    if (in > layers_.size()) throw Error("layer '" + layer.name + "' reads slot " + std::to_string(in) + " before it exists");
  }
  layers_.push_back(std::move(layer));
  return layers_.size();
}

Network::Slot Network::conv2d(Slot in, std::string name, Tensor kernel, std::optional<Tensor> bias, ops::ConvSpec spec) {
  Layer l = make_layer(LayerKind::conv2d, std::move(name), {in});
  l.conv = spec;
  l.weights = std::move(kernel);
  l.bias = std::move(bias);
  return push(std::move(l));
}

Network::Slot Network::batch_norm(Slot in, std::string name, BatchNormParams params) {
  Layer l = make_layer(LayerKind::batch_norm, std::move(name), {in});
  l.bn = std::move(params);
  return push(std::move(l));
}

Network::Slot Network::relu(Slot in) { return push(make_layer(LayerKind::relu, "relu", {in})); }

Network::Slot Network::max_pool(Slot in, std::size_t window, std::size_t stride, ops::Padding padding) {
  Layer l = make_layer(LayerKind::max_pool, "max_pool", {in});
  l.window = window;
  l.stride = stride;
  l.padding = padding;
  return push(std::move(l));
}

Network::Slot Network::global_avg_pool(Slot in) { return push(make_layer(LayerKind::global_avg_pool, "global_avg_pool", {in})); }

Network::Slot Network::dense(Slot in, std::string name, Tensor weights, Tensor bias) {
  Layer l = make_layer(LayerKind::dense, std::move(name), {in});
  l.weights = std::move(weights);
  l.bias = std::move(bias);
  return push(std::move(l));
}

Network::Slot Network::softmax(Slot in) { return push(make_layer(LayerKind::softmax, "softmax", {in})); }

Network::Slot Network::add(Slot a, Slot b) { return push(make_layer(LayerKind::add, "add", {a, b})); }

void Network::mark_output(Slot slot) {
  if (slot > layers_.size()) throw Error("output slot " + std::to_string(slot) + " does not exist");
  outputs_.push_back(slot);
}

std::vector<Tensor> Network::forward(const Tensor& input) const {
  // Release each intermediate after its last reader to bound peak memory.
  std::vector<std::size_t> last_use(layers_.size() + 1, 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto in : layers_[i].inputs) last_use[in] = i + 1;
  }
  for (auto out : outputs_) last_use[out] = layers_.size() + 1;

  std::vector<Tensor> values(layers_.size() + 1);
  values[kInput] = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    const Tensor& x = values[l.inputs[0]];
    Tensor y;
    switch (l.kind) {
      case LayerKind::conv2d: y = ops::conv2d(x, l.weights, l.bias, l.conv); break;
      case LayerKind::batch_norm:
        y = ops::batch_norm_inference(x, l.bn.gamma, l.bn.beta, l.bn.mean, l.bn.variance, l.bn.epsilon);
        break;
      case LayerKind::relu:
        if (last_use[l.inputs[0]] == i + 1) {
          y = std::move(values[l.inputs[0]]);
          ops::relu_inplace(y);
        } else {
          y = ops::relu(x);
        }
        break;
      case LayerKind::max_pool: y = ops::pool2d(x, ops::PoolMode::max, l.window, l.stride, l.padding); break;
      case LayerKind::global_avg_pool: y = ops::pool2d(x, ops::PoolMode::global_avg); break;
      case LayerKind::dense: y = ops::dense(x, l.weights, *l.bias); break;
      case LayerKind::softmax: y = ops::softmax(x); break;
      case LayerKind::add: y = ops::add(x, values[l.inputs[1]]); break;
    }
    values[i + 1] = std::move(y);
    for (auto in : l.inputs) {
      if (last_use[in] == i + 1) values[in] = Tensor();
    }
  }
  std::vector<Tensor> out;
  out.reserve(outputs_.size());
  for (auto slot : outputs_) out.push_back(values[slot]);
  return out;
}

std::size_t Network::count(LayerKind kind) const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.kind == kind;
  return n;
}

std::size_t Network::trainable_parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) {
    n += l.weights.size() + (l.bias ? l.bias->size() : 0);
    if (l.kind == LayerKind::batch_norm) n += l.bn.gamma.size() + l.bn.beta.size();
  }
  return n;
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t n = trainable_parameter_count();
  for (const auto& l : layers_) {
    if (l.kind == LayerKind::batch_norm) n += l.bn.mean.size() + l.bn.variance.size();
  }
  return n;
}

Tensor take_weight(const weights::TensorArchive& archive, const std::string& name, const Shape& dims) {
  const Tensor& t = archive.at(name);
  if (t.dims() != dims) {
    throw ShapeError("weight '" + name + "' has shape " + shape_to_string(t.dims()) + ", expected " +
                     shape_to_string(dims));
  }
  return t;
}

BatchNormParams take_batch_norm(const weights::TensorArchive& archive, const std::string& prefix, std::size_t channels,
                                float epsilon) {
  const Shape dims{channels};
  return {take_weight(archive, prefix + ".gamma", dims), take_weight(archive, prefix + ".beta", dims),
          take_weight(archive, prefix + ".mean", dims), take_weight(archive, prefix + ".variance", dims), epsilon};
}

void append_batch_norm_manifest(weights::Manifest& manifest, const std::string& prefix, std::size_t channels) {
  for (const char* field : {"gamma", "beta", "mean", "variance"}) {
    manifest.push_back({prefix + "." + field, {channels}});
  }
}

}  // namespace storewatch::nn
