#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <iostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <thread>

#include "storewatch/error.hpp"
#include "storewatch/pipeline.hpp"
#include "storewatch/weights_io.hpp"

namespace storewatch::pipeline {

namespace {

void configure_logging() {
  auto logger = spdlog::get("storewatch");
  if (!logger) logger = spdlog::stderr_color_mt("storewatch");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("STOREWATCH_LOG")) spdlog::set_level(spdlog::level::from_str(level));
}

std::vector<FrameAnnotation> process_batch(const std::vector<Frame>& batch, const Models& models,
                                           const PipelineParams& params, std::size_t threads) {
  std::vector<FrameAnnotation> results(batch.size());
  const std::size_t workers = std::min(threads, batch.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) results[i] = process_frame(batch[i], models, params);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(batch.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < batch.size(); i = next++) {
          try {
            results[i] = process_frame(batch[i], models, params);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace

SummaryReport run_pipeline(FrameReader& reader, const Models& models, const RunOptions& options, OutputWriter& writer) {
  const std::size_t threads = std::max<std::size_t>(1, options.threads);
  const std::size_t batch_size = threads * 2;
  SummaryAccumulator acc;
  Evaluation evaluation;
  if (options.labels) evaluation.labeled = options.labels->size();

  for (;;) {
    std::vector<Frame> batch;
    while (batch.size() < batch_size) {
      auto frame = reader.next();
      if (!frame) break;
      batch.push_back(std::move(*frame));
    }
    if (batch.empty()) break;
    const auto results = process_batch(batch, models, options.params, threads);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      writer.write(results[i], batch[i].image);
      acc.add(results[i]);
      if (options.labels) score(results[i], *options.labels, evaluation);
      spdlog::debug("frame {}: {} person(s)", results[i].frame_index, results[i].persons.size());
    }
  }

  SummaryReport report = acc.report();
  report.frames_skipped = reader.frames_skipped();
  for (const auto& w : reader.warnings()) {
    spdlog::warn("frame {} skipped: {}", w.frame_index, w.message);
    report.warnings.push_back("frame " + std::to_string(w.frame_index) + ": " + w.message);
  }
  if (options.labels) report.evaluation = evaluation;
  writer.finish(report);
  return report;
}

int run_cli(int argc, const char* const* argv) {
  configure_logging();

  CLI::App app{"Face detection with age, gender and expression estimation over frame streams", "storewatch"};
  std::string input, cascade_path, age_gender_path, expression_path, out_dir, format = "jsonl", labels_path;
  int width = 0, height = 0, min_neighbors = 3, min_face = 30;
  std::size_t stride = 1, threads = 1;
  double scale_factor = 1.1, crop_margin = demographics::kDefaultCropMargin;
  bool annotate = false;

  app.add_option("--input", input, "Frame directory, raw RGB24 file, or '-' for raw RGB24 on stdin")->required();
  app.add_option("--width", width, "Frame width (raw input)");
  app.add_option("--height", height, "Frame height (raw input)");
  app.add_option("--frame-stride", stride, "Process every Nth frame")->check(CLI::PositiveNumber);
  app.add_option("--cascade", cascade_path, "Haar cascade XML")->required();
  app.add_option("--age-gender-weights", age_gender_path, "NNWA archive for the age/gender network")->required();
  app.add_option("--expression-weights", expression_path, "NNWA archive for the expression network")->required();
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--format", format, "Per-detection output format")->check(CLI::IsMember({"jsonl", "csv", "both"}));
  app.add_flag("--annotate", annotate, "Write annotated PPM frames");
  app.add_option("--scale-factor", scale_factor, "Detector scale step (> 1)");
  app.add_option("--min-neighbors", min_neighbors, "Minimum grouped hits per face")->check(CLI::NonNegativeNumber);
  app.add_option("--min-face-size", min_face, "Smallest face side in pixels")->check(CLI::PositiveNumber);
  app.add_option("--crop-margin", crop_margin, "Face crop margin as a fraction of the box side")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--labels", labels_path, "CSV of ground-truth labels (frame,person,gender,age_group[,expression])");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? 0 : 1;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  FrameSource source;
  source.path = input;
  source.frame_stride = stride;
  source.width = width;
  source.height = height;
  std::error_code ec;
  if (input != "-" && std::filesystem::is_directory(input, ec)) {
    source.kind = FrameSource::Kind::image_directory;
  } else {
    source.kind = FrameSource::Kind::raw_stream;
    if (width <= 0 || height <= 0) {
      std::cerr << "error: raw input requires --width and --height\n" << app.help();
      return 1;
    }
  }
  if (!(scale_factor > 1.0)) {
    std::cerr << "error: --scale-factor must be greater than 1\n";
    return 1;
  }

  try {
    OutputOptions out{out_dir, format != "csv", format != "jsonl", annotate};
    OutputWriter writer(out);

    Models models{haar::load_cascade(cascade_path), {}, {}};
    const auto wrn_archive = weights::load_archive(age_gender_path);
    const auto xc_archive = weights::load_archive(expression_path);
    for (const auto& [name, archive, manifest] :
         {std::tuple{age_gender_path, &wrn_archive, demographics::wrn_manifest()},
          std::tuple{expression_path, &xc_archive, expression::xception_manifest()}}) {
      const auto report = weights::validate_manifest(*archive, manifest);
      if (!report.ok()) throw FormatError(name + " does not match the network manifest:\n" + report.describe());
    }
    models.age_gender = demographics::AgeGenderNet::build({}, wrn_archive);
    models.expression = expression::ExpressionNet::build({}, xc_archive);

    RunOptions options;
    options.params.detect.scale_factor = scale_factor;
    options.params.detect.min_neighbors = min_neighbors;
    options.params.detect.min_size = haar::Size{min_face, min_face};
    options.params.crop_margin = crop_margin;
    options.threads = threads;
    if (!labels_path.empty()) options.labels = load_labels(labels_path);

    FrameReader reader(source);
    const auto report = run_pipeline(reader, models, options, writer);
    spdlog::info("processed {} frame(s), {} detection(s)", report.frames_processed, report.total_detections);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace storewatch::pipeline
