#include <algorithm>
#include <cctype>
#include <iostream>

#include "storewatch/error.hpp"
#include "storewatch/image_io.hpp"
#include "storewatch/pipeline.hpp"

namespace storewatch::pipeline {

namespace {

bool is_frame_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".ppm" || (ext == ".png" && io::png_supported());
}

}  // namespace

FrameReader::FrameReader(FrameSource source) : source_(std::move(source)) {
  if (source_.frame_stride == 0) throw DomainError("frame stride must be >= 1");
  if (source_.kind == FrameSource::Kind::image_directory) {
    std::error_code ec;
    if (!std::filesystem::is_directory(source_.path, ec)) {
      throw IoError("input directory " + source_.path.string() + " is not readable");
    }
    for (const auto& entry : std::filesystem::directory_iterator(source_.path)) {
      if (entry.is_regular_file() && is_frame_file(entry.path())) files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    return;
  }
  if (source_.width <= 0 || source_.height <= 0) throw DomainError("raw streams need positive --width and --height");
  if (source_.path == "-") {
    stream_ = &std::cin;
  } else {
    file_.open(source_.path, std::ios::binary);
    if (!file_) throw IoError("cannot open raw stream " + source_.path.string());
    stream_ = &file_;
  }
}

FrameReader::~FrameReader() = default;

std::optional<Frame> FrameReader::next() {
  return source_.kind == FrameSource::Kind::image_directory ? next_from_directory() : next_from_stream();
}

std::optional<Frame> FrameReader::next_from_directory() {
  while (cursor_ < files_.size()) {
    const std::size_t index = cursor_++;
    if (index % source_.frame_stride != 0) continue;
    try {
      return Frame{index, io::read_image(files_[index])};
    } catch (const IoError& e) {
      warnings_.push_back({index, e.what()});
    } catch (const UnsupportedFeatureError& e) {
      warnings_.push_back({index, e.what()});
    }
  }
  return std::nullopt;
}

std::optional<Frame> FrameReader::next_from_stream() {
  const std::size_t frame_bytes = static_cast<std::size_t>(source_.width) * static_cast<std::size_t>(source_.height) * 3;
  std::vector<std::uint8_t> buffer(frame_bytes);
  while (stream_ && *stream_) {
    const std::size_t index = cursor_;
    stream_->read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(frame_bytes));
    const auto got = static_cast<std::size_t>(stream_->gcount());
    if (got == 0) break;
    ++cursor_;
    if (got < frame_bytes) {
      warnings_.push_back({index, "truncated raw frame: " + std::to_string(got) + " of " + std::to_string(frame_bytes) + " bytes"});
      break;
    }
    if (index % source_.frame_stride != 0) continue;
    return Frame{index, RgbImage(source_.width, source_.height, buffer)};
  }
  return std::nullopt;
}

std::vector<Frame> ingest_frames(const FrameSource& source, std::vector<IngestWarning>* warnings) {
  FrameReader reader(source);
  std::vector<Frame> frames;
  while (auto f = reader.next()) frames.push_back(std::move(*f));
  if (warnings) *warnings = reader.warnings();
  return frames;
}

}  // namespace storewatch::pipeline
