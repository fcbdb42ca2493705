#include "storewatch/pipeline.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "storewatch/error.hpp"

namespace storewatch::pipeline {

FrameAnnotation process_frame(const Frame& frame, const Models& models, const PipelineParams& params) {
  FrameAnnotation out;
  out.frame_index = frame.index;
  const auto gray = to_gray(frame.image);
  if (gray.width < models.cascade.window_width || gray.height < models.cascade.window_height) return out;

  for (const auto& det : haar::detect_multiscale(models.cascade, gray, params.detect)) {
    PersonAnnotation person;
    person.box = det.box();
    try {
      const auto side = models.age_gender.config().input_side;
      person.age_gender = models.age_gender.predict(demographics::preprocess_face(frame.image, person.box, params.crop_margin, side));
      person.expression = models.expression.predict(
          expression::preprocess_gray(frame.image, person.box, models.expression.config().input_side));
    } catch (const std::exception& e) {
      person.error = e.what();
    }
    out.persons.push_back(std::move(person));
  }
  return out;
}

void SummaryAccumulator::add(const FrameAnnotation& annotation) {
  ++report_.frames_processed;
  for (const auto& p : annotation.persons) {
    if (p.error) {
      ++report_.inference_failures;
      continue;
    }
    ++report_.total_detections;
    ++report_.gender_counts[static_cast<std::size_t>(p.age_gender.gender)];
    ++report_.age_group_histogram[static_cast<std::size_t>(p.age_gender.group)];
    ++report_.expression_histogram[static_cast<std::size_t>(p.expression.label)];
  }
}

SummaryReport aggregate(std::span<const FrameAnnotation> annotations) {
  SummaryAccumulator acc;
  for (const auto& a : annotations) acc.add(a);
  return acc.report();
}

LabelSet parse_labels(std::string_view csv) {
  LabelSet labels;
  std::istringstream in{std::string(csv)};
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      header_seen = true;
      if (cells.size() < 4 || cells[0] != "frame" || cells[1] != "person" || cells[2] != "gender" || cells[3] != "age_group") {
        throw ParseError("labels header must start with frame,person,gender,age_group", line_no);
      }
      continue;
    }
    if (cells.size() < 4 || cells.size() > 5) throw ParseError("labels row needs 4 or 5 cells", line_no);
    char* end = nullptr;
    const auto frame = std::strtoull(cells[0].c_str(), &end, 10);
    if (cells[0].empty() || *end) throw ParseError("bad frame index '" + cells[0] + "'", line_no);
    const auto person = std::strtoull(cells[1].c_str(), &end, 10);
    if (cells[1].empty() || *end) throw ParseError("bad person index '" + cells[1] + "'", line_no);
    auto gender = demographics::parse_gender(cells[2]);
    if (!gender) throw ParseError("unknown gender '" + cells[2] + "'", line_no);
    auto group = demographics::parse_age_group(cells[3]);
    if (!group) throw ParseError("unknown age group '" + cells[3] + "'", line_no);
    PersonLabel label{*gender, *group, std::nullopt};
    if (cells.size() == 5 && !cells[4].empty()) {
      label.expression = expression::parse_expression(cells[4]);
      if (!label.expression) throw ParseError("unknown expression '" + cells[4] + "'", line_no);
    }
    if (!labels.emplace(std::pair{frame, person}, label).second) {
      throw ParseError("duplicate label for frame " + cells[0] + " person " + cells[1], line_no);
    }
  }
  return labels;
}

LabelSet load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_labels(buf.str());
}

void score(const FrameAnnotation& annotation, const LabelSet& labels, Evaluation& evaluation) {
  for (std::size_t i = 0; i < annotation.persons.size(); ++i) {
    const auto& p = annotation.persons[i];
    auto it = labels.find({annotation.frame_index, i});
    if (it == labels.end() || p.error) continue;
    const auto& truth = it->second;
    ++evaluation.matched;
    evaluation.gender_correct += p.age_gender.gender == truth.gender;
    const auto predicted = static_cast<int>(p.age_gender.group);
    const auto expected = static_cast<int>(truth.group);
    evaluation.age_group_correct += predicted == expected;
    evaluation.age_group_within_one += std::abs(predicted - expected) <= 1;
    if (truth.expression) {
      ++evaluation.expression_labeled;
      evaluation.expression_correct += p.expression.label == *truth.expression;
    }
  }
}

}  // namespace storewatch::pipeline
