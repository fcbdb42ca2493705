#include "storewatch/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#ifdef STOREWATCH_HAVE_PNG
#include <png.h>
#endif

#include "storewatch/error.hpp"

namespace storewatch::io {

namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class HeaderScanner {
 public:
  explicit HeaderScanner(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  // Next whitespace-delimited token, skipping '#' comments.
  std::string token() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
    std::string out;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') out.push_back(static_cast<char>(bytes_[pos_++]));
    if (out.empty()) throw FormatError("PPM header ended early");
    return out;
  }

  int positive(const char* what) {
    const auto t = token();
    if (t.size() > 9 || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw FormatError(std::string("PPM ") + what + " is not a positive integer: '" + t + "'");
    }
    const int v = std::stoi(t);
    if (v <= 0) throw FormatError(std::string("PPM ") + what + " must be positive");
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw FormatError("PPM header lacks the raster separator");
    return pos_ + 1;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

RgbImage parse_ppm(std::span<const std::uint8_t> bytes) {
  HeaderScanner scan(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError("not a binary PPM (P6) file");
  scan.token();
  const int width = scan.positive("width");
  const int height = scan.positive("height");
  const int maxval = scan.positive("maxval");
  if (maxval != 255) throw FormatError("PPM maxval must be 255, got " + std::to_string(maxval));
  const std::size_t start = scan.raster_start();
  const std::size_t need = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
  if (bytes.size() - std::min(start, bytes.size()) < need) {
    throw TruncationError("PPM raster needs " + std::to_string(need) + " bytes", bytes.size());
  }
  return RgbImage(width, height, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                                                           bytes.begin() + static_cast<std::ptrdiff_t>(start + need)));
}

RgbImage read_ppm(const std::filesystem::path& path) { return parse_ppm(slurp(path)); }

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

bool png_supported() noexcept {
#ifdef STOREWATCH_HAVE_PNG
  return true;
#else
  return false;
#endif
}

RgbImage read_png(const std::filesystem::path& path) {
#ifdef STOREWATCH_HAVE_PNG
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  const auto bytes = slurp(path);
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return out;
#else
  throw UnsupportedFeatureError("PNG input requires a build with libpng: " + path.string());
#endif
}

RgbImage read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return read_png(path);
  return read_ppm(path);
}

}  // namespace storewatch::io
