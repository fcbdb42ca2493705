#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "storewatch/demographics.hpp"
#include "storewatch/expression.hpp"
#include "storewatch/haar.hpp"
#include "storewatch/image.hpp"

namespace storewatch::pipeline {

// ---------------------------------------------------------------- ingestion

struct FrameSource {
  enum class Kind { image_directory, raw_stream };

  Kind kind = Kind::image_directory;
  std::filesystem::path path;  // "-" reads a raw stream from stdin
  int width = 0;               // raw_stream only
  int height = 0;
  std::size_t frame_stride = 1;
};

struct Frame {
  std::size_t index = 0;
  RgbImage image;
};

struct IngestWarning {
  std::size_t frame_index = 0;
  std::string message;
};

/// Streams every frame_stride-th frame, keeping original frame indices.
/// Directory frames (.ppm, and .png when built with libpng) are taken in
/// lexicographic filename order. Unreadable files are skipped with a warning;
/// a malformed PPM header is a FormatError.
class FrameReader {
 public:
  explicit FrameReader(FrameSource source);
  ~FrameReader();
  FrameReader(const FrameReader&) = delete;
  FrameReader& operator=(const FrameReader&) = delete;

  std::optional<Frame> next();

  const std::vector<IngestWarning>& warnings() const noexcept { return warnings_; }
  std::size_t frames_skipped() const noexcept { return warnings_.size(); }

 private:
  std::optional<Frame> next_from_directory();
  std::optional<Frame> next_from_stream();

  FrameSource source_;
  std::vector<std::filesystem::path> files_;
  std::size_t cursor_ = 0;
  std::ifstream file_;
  std::istream* stream_ = nullptr;
  std::vector<IngestWarning> warnings_;
};

std::vector<Frame> ingest_frames(const FrameSource& source, std::vector<IngestWarning>* warnings = nullptr);

// --------------------------------------------------------------- per frame

struct PersonAnnotation {
  haar::Box box;
  std::optional<std::string> error;  // set when inference failed for this face
  demographics::AgeGenderResult age_gender;
  expression::ExpressionResult expression;
};

struct FrameAnnotation {
  std::size_t frame_index = 0;
  std::vector<PersonAnnotation> persons;
};

struct Models {
  haar::Cascade cascade;
  demographics::AgeGenderNet age_gender;
  expression::ExpressionNet expression;
};

struct PipelineParams {
  haar::DetectParams detect;
  double crop_margin = demographics::kDefaultCropMargin;
};

/// Detect faces, then run both networks on every face in detector order.
FrameAnnotation process_frame(const Frame& frame, const Models& models, const PipelineParams& params);

// --------------------------------------------------------------- reporting

struct Evaluation {
  std::size_t labeled = 0;
  std::size_t matched = 0;
  std::size_t gender_correct = 0;
  std::size_t age_group_correct = 0;
  std::size_t age_group_within_one = 0;
  std::size_t expression_labeled = 0;
  std::size_t expression_correct = 0;
  bool operator==(const Evaluation&) const = default;
};

struct SummaryReport {
  std::size_t frames_processed = 0;
  std::size_t frames_skipped = 0;
  std::size_t total_detections = 0;
  std::size_t inference_failures = 0;
  std::array<std::size_t, 2> gender_counts{};
  std::array<std::size_t, demographics::kAgeGroupCount> age_group_histogram{};
  std::array<std::size_t, expression::kExpressionCount> expression_histogram{};
  std::vector<std::string> warnings;
  std::optional<Evaluation> evaluation;

  bool operator==(const SummaryReport&) const = default;
};

class SummaryAccumulator {
 public:
  void add(const FrameAnnotation& annotation);
  const SummaryReport& report() const noexcept { return report_; }
  SummaryReport& report() noexcept { return report_; }

 private:
  SummaryReport report_;
};

/// Per-detection counts; failed faces are tallied separately.
SummaryReport aggregate(std::span<const FrameAnnotation> annotations);

// ------------------------------------------------------------------ labels

struct PersonLabel {
  demographics::Gender gender;
  demographics::AgeGroup group;
  std::optional<expression::Expression> expression;
};

/// CSV with header `frame,person,gender,age_group[,expression]`; `person` is
/// the 0-based index in the frame's detector order.
using LabelSet = std::map<std::pair<std::size_t, std::size_t>, PersonLabel>;
LabelSet parse_labels(std::string_view csv);
LabelSet load_labels(const std::filesystem::path& path);

void score(const FrameAnnotation& annotation, const LabelSet& labels, Evaluation& evaluation);

// ------------------------------------------------------------- serialising

/// Rounds to 6 significant digits; the JSON writer then prints the shortest
/// decimal that round-trips the rounded value.
double canonical_float(double v);

std::string annotation_to_jsonl(const FrameAnnotation& annotation);
std::string summary_to_json(const SummaryReport& report);
std::string csv_header();
std::string annotation_to_csv(const FrameAnnotation& annotation);

/// Boxes plus "label: value" captions drawn onto a copy of the frame.
RgbImage render_annotations(const RgbImage& frame, const FrameAnnotation& annotation);

struct OutputOptions {
  std::filesystem::path out_dir;
  bool jsonl = true;
  bool csv = false;
  bool annotate = false;
};

/// Opens every output before any frame is processed so an unwritable
/// destination fails immediately with IoError.
class OutputWriter {
 public:
  static constexpr const char* kJsonlName = "annotations.jsonl";
  static constexpr const char* kSummaryName = "summary.json";
  static constexpr const char* kCsvName = "detections.csv";
  static constexpr const char* kAnnotatedDir = "annotated";

  explicit OutputWriter(OutputOptions options);

  void write(const FrameAnnotation& annotation, const RgbImage& frame);
  void finish(const SummaryReport& report);

 private:
  OutputOptions options_;
  std::ofstream jsonl_;
  std::ofstream csv_;
  std::ofstream summary_;
};

// ------------------------------------------------------------------- driver

struct RunOptions {
  PipelineParams params;
  std::size_t threads = 1;
  std::optional<LabelSet> labels;
};

/// Streams frames through a worker pool and hands results to `writer`
/// strictly in frame order; output equals a single-threaded run.
SummaryReport run_pipeline(FrameReader& reader, const Models& models, const RunOptions& options, OutputWriter& writer);

/// Command-line entry point: 0 success, 1 usage error, 2 data/format error.
int run_cli(int argc, const char* const* argv);

}  // namespace storewatch::pipeline
