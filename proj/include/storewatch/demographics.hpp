#pragma once

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "storewatch/face_input.hpp"
#include "storewatch/network.hpp"
#include "storewatch/weights_io.hpp"

// Age and gender estimation with a pre-activation Wide Residual Network.
namespace storewatch::demographics {

struct WrnConfig {
  std::size_t depth = 16;
  std::size_t widen_factor = 8;
  std::size_t input_side = 64;
  std::size_t age_bins = 101;
  std::size_t gender_classes = 2;

  /// Residual blocks per group, (depth - 4) / 6.
  std::size_t blocks_per_group() const { return (depth - 4) / 6; }
  void validate() const;
};

enum class Gender { female = 0, male = 1 };

std::string_view to_string(Gender g) noexcept;
std::optional<Gender> parse_gender(std::string_view text) noexcept;

/// Decade bins 0-9 .. 70-79; ages of 70 and above land in the last bin.
enum class AgeGroup { g0_9, g10_19, g20_29, g30_39, g40_49, g50_59, g60_69, g70_79 };
inline constexpr std::size_t kAgeGroupCount = 8;

std::string_view to_string(AgeGroup g) noexcept;
std::optional<AgeGroup> parse_age_group(std::string_view text) noexcept;
/// Throws DomainError for negative or non-finite ages.
AgeGroup age_group(double age);

struct AgeGenderResult {
  std::array<float, 2> gender_probs{};
  Gender gender = Gender::female;
  std::vector<float> age_probs;
  double age_estimate = 0.0;
  AgeGroup group = AgeGroup::g0_9;
};

weights::Manifest wrn_manifest(const WrnConfig& config = {});

class AgeGenderNet {
 public:
  /// Throws MissingWeightError / ShapeError naming the offending tensor.
  static AgeGenderNet build(const WrnConfig& config, const weights::TensorArchive& archive);

  /// face: input_side x input_side x 3, RGB values in [0, 255].
  AgeGenderResult predict(const Tensor& face) const;

  /// Raw head outputs: {gender probs [2], age probs [age_bins]}.
  std::vector<Tensor> forward(const Tensor& face) const;

  const WrnConfig& config() const noexcept { return config_; }
  const nn::Network& network() const noexcept { return net_; }

 private:
  WrnConfig config_;
  nn::Network net_;
};

/// Decodes head probabilities into labels and the expected age.
AgeGenderResult decode(const Tensor& gender_probs, const Tensor& age_probs);

/// Crop with margin, clamp, bilinear resize to side x side x 3 in [0, 255].
Tensor preprocess_face(const RgbImage& frame, const haar::Box& box, double margin, std::size_t side = 64);

inline constexpr float kBatchNormEpsilon = 1e-3f;
inline constexpr double kDefaultCropMargin = 0.4;

}  // namespace storewatch::demographics
