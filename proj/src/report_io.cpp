#include <charconv>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "storewatch/error.hpp"
#include "storewatch/image_io.hpp"
#include "storewatch/pipeline.hpp"

namespace storewatch::pipeline {

namespace {

using Json = nlohmann::ordered_json;

Json float_array(std::span<const float> values) {
  Json arr = Json::array();
  for (float v : values) arr.push_back(canonical_float(v));
  return arr;
}

Json box_json(const haar::Box& b) { return Json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}}; }

template <typename Enum, std::size_t N>
Json histogram(const std::array<std::size_t, N>& counts) {
  Json obj = Json::object();
  for (std::size_t i = 0; i < N; ++i) obj[std::string(to_string(static_cast<Enum>(i)))] = counts[i];
  return obj;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : canonical_float(static_cast<double>(num) / static_cast<double>(den));
}

std::string csv_float(double v) {
  std::ostringstream os;
  os << Json(canonical_float(v)).dump();
  return os.str();
}

}  // namespace

double canonical_float(double v) {
  if (!std::isfinite(v)) return v;
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 6);
  double out = 0.0;
  std::from_chars(buf, res.ptr, out);
  return out == 0.0 ? 0.0 : out;  // folds -0 into 0
}

std::string annotation_to_jsonl(const FrameAnnotation& annotation) {
  Json persons = Json::array();
  for (const auto& p : annotation.persons) {
    Json person;
    person["box"] = box_json(p.box);
    if (p.error) {
      person["error"] = *p.error;
    } else {
      person["gender"] = {{"label", std::string(demographics::to_string(p.age_gender.gender))},
                          {"probs", float_array(p.age_gender.gender_probs)}};
      person["age"] = {{"estimate", canonical_float(p.age_gender.age_estimate)},
                       {"group", std::string(demographics::to_string(p.age_gender.group))},
                       {"probs_omitted", true}};
      person["expression"] = {{"label", std::string(expression::to_string(p.expression.label))},
                              {"probs", float_array(p.expression.probs)}};
    }
    persons.push_back(std::move(person));
  }
  Json line{{"frame", annotation.frame_index}, {"persons", std::move(persons)}};
  return line.dump();
}

std::string summary_to_json(const SummaryReport& r) {
  Json j;
  j["frames_processed"] = r.frames_processed;
  j["frames_skipped"] = r.frames_skipped;
  j["total_detections"] = r.total_detections;
  j["inference_failures"] = r.inference_failures;
  j["gender_counts"] = histogram<demographics::Gender>(r.gender_counts);
  j["age_group_histogram"] = histogram<demographics::AgeGroup>(r.age_group_histogram);
  j["expression_histogram"] = histogram<expression::Expression>(r.expression_histogram);
  j["warnings"] = r.warnings;
  if (r.evaluation) {
    const auto& e = *r.evaluation;
    j["evaluation"] = {{"labeled", e.labeled},
                       {"matched", e.matched},
                       {"gender_accuracy", ratio(e.gender_correct, e.matched)},
                       {"age_group_accuracy", ratio(e.age_group_correct, e.matched)},
                       {"age_group_within_one_accuracy", ratio(e.age_group_within_one, e.matched)},
                       {"expression_labeled", e.expression_labeled},
                       {"expression_accuracy", ratio(e.expression_correct, e.expression_labeled)}};
  }
  return j.dump(2) + "\n";
}

std::string csv_header() {
  std::string h = "frame,x,y,w,h,gender,p_female,p_male,age,age_group,expression";
  for (std::size_t i = 0; i < expression::kExpressionCount; ++i) {
    h += ",p_" + std::string(expression::to_string(static_cast<expression::Expression>(i)));
  }
  return h + "\n";
}

std::string annotation_to_csv(const FrameAnnotation& annotation) {
  std::ostringstream os;
  for (const auto& p : annotation.persons) {
    if (p.error) continue;
    os << annotation.frame_index << ',' << p.box.x << ',' << p.box.y << ',' << p.box.w << ',' << p.box.h << ','
       << demographics::to_string(p.age_gender.gender) << ',' << csv_float(p.age_gender.gender_probs[0]) << ','
       << csv_float(p.age_gender.gender_probs[1]) << ',' << csv_float(p.age_gender.age_estimate) << ','
       << demographics::to_string(p.age_gender.group) << ',' << expression::to_string(p.expression.label);
    for (float v : p.expression.probs) os << ',' << csv_float(v);
    os << '\n';
  }
  return os.str();
}

OutputWriter::OutputWriter(OutputOptions options) : options_(std::move(options)) {
  std::error_code ec;
  std::filesystem::create_directories(options_.out_dir, ec);
  if (ec || !std::filesystem::is_directory(options_.out_dir)) {
    throw IoError("cannot create output directory " + options_.out_dir.string());
  }
  const auto open = [](std::ofstream& f, const std::filesystem::path& p) {
    f.open(p, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + p.string());
  };
  if (options_.jsonl) open(jsonl_, options_.out_dir / kJsonlName);
  if (options_.csv) {
    open(csv_, options_.out_dir / kCsvName);
    csv_ << csv_header();
  }
  open(summary_, options_.out_dir / kSummaryName);
  if (options_.annotate) {
    std::filesystem::create_directories(options_.out_dir / kAnnotatedDir, ec);
    if (ec) throw IoError("cannot create " + (options_.out_dir / kAnnotatedDir).string());
  }
}

void OutputWriter::write(const FrameAnnotation& annotation, const RgbImage& frame) {
  if (jsonl_.is_open()) jsonl_ << annotation_to_jsonl(annotation) << '\n';
  if (csv_.is_open()) csv_ << annotation_to_csv(annotation);
  if (options_.annotate) {
    std::ostringstream name;
    name << "frame_" << std::setw(6) << std::setfill('0') << annotation.frame_index << ".ppm";
    io::write_ppm(render_annotations(frame, annotation), options_.out_dir / kAnnotatedDir / name.str());
  }
  if ((jsonl_.is_open() && !jsonl_) || (csv_.is_open() && !csv_)) throw IoError("failed writing outputs");
}

void OutputWriter::finish(const SummaryReport& report) {
  summary_ << summary_to_json(report);
  summary_.flush();
  jsonl_.flush();
  csv_.flush();
  if (!summary_ || (jsonl_.is_open() && !jsonl_) || (csv_.is_open() && !csv_)) throw IoError("failed writing outputs");
}

}  // namespace storewatch::pipeline
