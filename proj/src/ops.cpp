#include "storewatch/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "storewatch/error.hpp"

namespace storewatch::ops {

namespace {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                     shape_to_string(t.dims()));
  }
}

void require_axis(bool ok, const std::string& axis, std::size_t expected, std::size_t actual) {
  if (!ok) {
    throw ShapeError("dimension mismatch on axis '" + axis + "': expected " + std::to_string(expected) +
                     ", got " + std::to_string(actual));
  }
}

struct Geometry {
  std::size_t in_h, in_w, out_h, out_w, pad_top, pad_left;
};

Geometry window_geometry(std::size_t in_h, std::size_t in_w, std::size_t kh, std::size_t kw, std::size_t stride,
                         Padding padding) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (padding == Padding::valid) {
    if (kh > in_h) throw ShapeError("window height " + std::to_string(kh) + " exceeds input height " + std::to_string(in_h));
    if (kw > in_w) throw ShapeError("window width " + std::to_string(kw) + " exceeds input width " + std::to_string(in_w));
  }
  Geometry g{in_h, in_w, conv_output_extent(in_h, kh, stride, padding), conv_output_extent(in_w, kw, stride, padding), 0, 0};
  if (padding == Padding::same) {
    g.pad_top = same_padding_before(in_h, kh, stride);
    g.pad_left = same_padding_before(in_w, kw, stride);
  }
  return g;
}

// Dense (groups == 1) convolution as an im2col matrix product.
void conv_dense(const Tensor& input, const Tensor& kernels, const Geometry& g, std::size_t stride, Tensor& out) {
  const std::size_t kh = kernels.dim(0), kw = kernels.dim(1), cin = kernels.dim(2), cout = kernels.dim(3);
  const std::size_t rows = g.out_h * g.out_w;
  const std::size_t cols = kh * kw * cin;
  ConstMatrixMap weights(kernels.data().data(), static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(cout));
  MatrixMap result(out.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cout));

  if (kh == 1 && kw == 1 && stride == 1) {
    ConstMatrixMap patches(input.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    result.noalias() = patches * weights;
    return;
  }

  RowMatrix patches = RowMatrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const float* src = input.data().data();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      float* row = patches.data() + (oy * g.out_w + ox) * cols;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          const float* pixel = src + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * cin;
          std::copy(pixel, pixel + cin, row + (ky * kw + kx) * cin);
        }
      }
    }
  }
  result.noalias() = patches * weights;
}

void conv_grouped(const Tensor& input, const Tensor& kernels, const Geometry& g, std::size_t stride,
                  std::size_t groups, Tensor& out) {
  const std::size_t kh = kernels.dim(0), kw = kernels.dim(1), cin_g = kernels.dim(2), cout = kernels.dim(3);
  const std::size_t cin = input.dim(2);
  const std::size_t cout_g = cout / groups;
  const float* src = input.data().data();
  const float* ker = kernels.data().data();
  float* dst = out.data().data();
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      float* acc = dst + (oy * g.out_w + ox) * cout;
      for (std::size_t ky = 0; ky < kh; ++ky) {
        const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.in_h)) continue;
        for (std::size_t kx = 0; kx < kw; ++kx) {
          const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.in_w)) continue;
          const float* pixel = src + (static_cast<std::size_t>(iy) * g.in_w + static_cast<std::size_t>(ix)) * cin;
          const float* tap = ker + (ky * kw + kx) * cin_g * cout;
          for (std::size_t co = 0; co < cout; ++co) {
            const std::size_t base = (co / cout_g) * cin_g;
            float sum = 0.0f;
            for (std::size_t ci = 0; ci < cin_g; ++ci) sum += pixel[base + ci] * tap[ci * cout + co];
            acc[co] += sum;
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, Padding padding) {
  if (stride == 0) throw ShapeError("stride must be >= 1");
  if (padding == Padding::same) return (in + stride - 1) / stride;
  if (kernel > in) throw ShapeError("kernel extent " + std::to_string(kernel) + " exceeds input extent " + std::to_string(in));
  return (in - kernel) / stride + 1;
}

std::size_t same_padding_before(std::size_t in, std::size_t kernel, std::size_t stride) {
  const std::size_t out = (in + stride - 1) / stride;
  const std::size_t needed = (out - 1) * stride + kernel;
  const std::size_t total = needed > in ? needed - in : 0;
  return total / 2;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const std::optional<Tensor>& bias, const ConvSpec& spec) {
  require_rank(input, 3, "conv2d input");
  require_rank(kernels, 4, "conv2d kernels");
  if (spec.groups == 0) throw ShapeError("conv2d groups must be >= 1");
  const std::size_t cin = input.dim(2);
  const std::size_t cout = kernels.dim(3);
  if (cin % spec.groups != 0) {
    throw ShapeError("dimension mismatch on axis 'in_channels': " + std::to_string(cin) +
                     " is not divisible by groups " + std::to_string(spec.groups));
  }
  require_axis(kernels.dim(2) == cin / spec.groups, "kernel_in_channels", cin / spec.groups, kernels.dim(2));
  if (cout % spec.groups != 0) {
    throw ShapeError("dimension mismatch on axis 'out_channels': " + std::to_string(cout) +
                     " is not divisible by groups " + std::to_string(spec.groups));
  }
  if (bias) {
    require_rank(*bias, 1, "conv2d bias");
    require_axis(bias->dim(0) == cout, "bias", cout, bias->dim(0));
  }

  const Geometry g = window_geometry(input.dim(0), input.dim(1), kernels.dim(0), kernels.dim(1), spec.stride, spec.padding);
  Tensor out({g.out_h, g.out_w, cout});
  if (spec.groups == 1) {
    conv_dense(input, kernels, g, spec.stride, out);
  } else {
    conv_grouped(input, kernels, g, spec.stride, spec.groups, out);
  }
  if (bias) {
    float* dst = out.data().data();
    const float* b = bias->data().data();
    for (std::size_t p = 0; p < g.out_h * g.out_w; ++p) {
      for (std::size_t co = 0; co < cout; ++co) dst[p * cout + co] += b[co];
    }
  }
  return out;
}

Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                            const Tensor& variance, float epsilon) {
  const std::size_t channels = x.dims().back();
  for (const auto* p : {&gamma, &beta, &mean, &variance}) {
    if (p->rank() != 1 || p->dim(0) != channels) {
      throw ShapeError("dimension mismatch on axis 'channels': batch norm expects " + std::to_string(channels) +
                       " parameters, got " + shape_to_string(p->dims()));
    }
  }
  if (!(epsilon >= 0.0f)) throw DomainError("batch norm epsilon must be non-negative");

  std::vector<float> scale(channels), shift(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const float denom = variance[c] + epsilon;
    if (!(variance[c] >= 0.0f) || !(denom > 0.0f)) {
      throw DomainError("batch norm variance + epsilon must be positive (channel " + std::to_string(c) + ")");
    }
    scale[c] = gamma[c] / std::sqrt(denom);
    shift[c] = beta[c] - mean[c] * scale[c];
  }
  Tensor out = x;
  float* d = out.data().data();
  for (std::size_t i = 0; i < out.size(); i += channels) {
    for (std::size_t c = 0; c < channels; ++c) d[i + c] = d[i + c] * scale[c] + shift[c];
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = x;
  relu_inplace(out);
  return out;
}

void relu_inplace(Tensor& x) noexcept {
  for (float& v : x.data()) v = v > 0.0f ? v : 0.0f;
}

Tensor pool2d(const Tensor& x, PoolMode mode, std::optional<std::size_t> window, std::optional<std::size_t> stride,
              Padding padding) {
  require_rank(x, 3, "pool2d input");
  const std::size_t h = x.dim(0), w = x.dim(1), c = x.dim(2);

  if (mode == PoolMode::global_avg) {
    Tensor out({c});
    std::vector<double> acc(c, 0.0);
    const float* src = x.data().data();
    for (std::size_t p = 0; p < h * w; ++p) {
      for (std::size_t ch = 0; ch < c; ++ch) acc[ch] += src[p * c + ch];
    }
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] = static_cast<float>(acc[ch] / static_cast<double>(h * w));
    return out;
  }

  if (!window || !stride) throw ShapeError("max pooling requires window and stride");
  if (*window == 0) throw ShapeError("pool window must be >= 1");
  const Geometry g = window_geometry(h, w, *window, *window, *stride, padding);
  Tensor out({g.out_h, g.out_w, c});
  for (std::size_t oy = 0; oy < g.out_h; ++oy) {
    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        float best = -std::numeric_limits<float>::infinity();
        for (std::size_t ky = 0; ky < *window; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * *stride + ky) - static_cast<std::ptrdiff_t>(g.pad_top);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < *window; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * *stride + kx) - static_cast<std::ptrdiff_t>(g.pad_left);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            best = std::max(best, x.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ch));
          }
        }
        out.at(oy, ox, ch) = best;
      }
    }
  }
  return out;
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  require_rank(x, 1, "dense input");
  require_rank(weights, 2, "dense weights");
  require_rank(bias, 1, "dense bias");
  const std::size_t n = x.dim(0), m = weights.dim(1);
  require_axis(weights.dim(0) == n, "weights_rows", n, weights.dim(0));
  require_axis(bias.dim(0) == m, "bias", m, bias.dim(0));
  Tensor out({m});
  for (std::size_t j = 0; j < m; ++j) out[j] = bias[j];
  const float* wd = weights.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const float xi = x[i];
    const float* row = wd + i * m;
    for (std::size_t j = 0; j < m; ++j) out[j] += xi * row[j];
  }
  return out;
}

Tensor softmax(const Tensor& x) {
  if (x.empty()) throw ShapeError("softmax of an empty tensor");
  require_rank(x, 1, "softmax input");
  const float top = *std::max_element(x.data().begin(), x.data().end());
  Tensor out = x;
  double total = 0.0;
  for (float& v : out.data()) {
    v = std::exp(v - top);
    total += v;
  }
  const double inv = 1.0 / total;
  for (float& v : out.data()) v = static_cast<float>(v * inv);
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims()) {
    throw ShapeError("cannot add " + shape_to_string(a.dims()) + " and " + shape_to_string(b.dims()));
  }
  Tensor out = a;
  float* d = out.data().data();
  const float* s = b.data().data();
  for (std::size_t i = 0; i < out.size(); ++i) d[i] += s[i];
  return out;
}

}  // namespace storewatch::ops
