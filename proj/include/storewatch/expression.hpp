#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "storewatch/face_input.hpp"
#include "storewatch/network.hpp"
#include "storewatch/weights_io.hpp"

// Facial expression recognition with a fully convolutional mini-Xception.
namespace storewatch::expression {

struct XceptionConfig {
  std::size_t input_side = 64;
  std::size_t stem_filters = 8;
  std::size_t blocks = 4;
  std::vector<std::size_t> block_filters{16, 32, 64, 128};
  std::size_t classes = 7;

  void validate() const;
};

/// Index order is fixed by the pretrained checkpoint.
enum class Expression { angry = 0, disgust, fear, happy, sad, surprise, neutral };
inline constexpr std::size_t kExpressionCount = 7;

std::string_view to_string(Expression e) noexcept;
/// Accepts the canonical labels plus "anger" as an alias of "angry".
std::optional<Expression> parse_expression(std::string_view text) noexcept;

struct ExpressionResult {
  std::array<float, kExpressionCount> probs{};
  Expression label = Expression::angry;
};

weights::Manifest xception_manifest(const XceptionConfig& config = {});

class ExpressionNet {
 public:
  static ExpressionNet build(const XceptionConfig& config, const weights::TensorArchive& archive);

  /// face: input_side x input_side x 1, values in [-1, 1].
  ExpressionResult predict(const Tensor& face) const;
  Tensor forward(const Tensor& face) const;

  const XceptionConfig& config() const noexcept { return config_; }
  const nn::Network& network() const noexcept { return net_; }

 private:
  XceptionConfig config_;
  nn::Network net_;
};

/// Lowest index wins ties.
ExpressionResult decode(const Tensor& probs);

/// Crop (no margin), luma, bilinear resize, then x / 127.5 - 1.
Tensor preprocess_gray(const RgbImage& frame, const haar::Box& box, std::size_t side = 64);

}  // namespace storewatch::expression
