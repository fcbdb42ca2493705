#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <fstream>
#include <sstream>
#include <string>

#include "storewatch/error.hpp"
#include "storewatch/haar.hpp"

namespace storewatch::haar {

namespace {

namespace pt = boost::property_tree;

bool is_meta_key(const std::string& key) { return key == "<xmlcomment>" || key == "<xmlattr>"; }

// Children that are real elements, skipping comments and attribute bags.
std::vector<const pt::ptree*> elements(const pt::ptree& node, const std::string& key = "_") {
  std::vector<const pt::ptree*> out;
  for (const auto& [k, child] : node) {
    if (!is_meta_key(k) && k == key) out.push_back(&child);
  }
  return out;
}

const pt::ptree& child(const pt::ptree& node, const std::string& key, const std::string& where) {
  auto found = node.get_child_optional(key);
  if (!found) throw ParseError("cascade " + where + " is missing <" + key + ">");
  return *found;
}

std::vector<double> numbers(const pt::ptree& node, const std::string& where) {
  std::istringstream in(node.data());
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw ParseError("non-numeric payload in " + where + ": '" + node.data() + "'");
  return out;
}

double number(const pt::ptree& node, const std::string& key, const std::string& where) {
  auto values = numbers(child(node, key, where), where + "/" + key);
  if (values.size() != 1) throw ParseError(where + "/" + key + " must hold one number");
  return values.front();
}

int integer(const pt::ptree& node, const std::string& key, const std::string& where) {
  const double v = number(node, key, where);
  if (v != static_cast<double>(static_cast<int>(v))) throw ParseError(where + "/" + key + " must be an integer");
  return static_cast<int>(v);
}

bool tilted_flag(const pt::ptree& feature) {
  auto tilted = feature.get_child_optional("tilted");
  if (!tilted) return false;
  std::istringstream in(tilted->data());
  int flag = 0;
  in >> flag;
  return flag != 0;
}

std::vector<WeightedRect> parse_rects(const pt::ptree& feature, const std::string& where) {
  if (tilted_flag(feature)) throw UnsupportedFeatureError(where + ": tilted Haar features are not supported");
  std::vector<WeightedRect> rects;
  for (const auto* r : elements(child(feature, "rects", where))) {
    auto v = numbers(*r, where + "/rects");
    if (v.size() != 5) throw ParseError(where + ": rect needs 'x y w h weight', got " + std::to_string(v.size()) + " values");
    rects.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]), static_cast<int>(v[2]), static_cast<int>(v[3]), v[4]});
  }
  return rects;
}

void validate(const Cascade& cascade) {
  if (cascade.window_width < 4 || cascade.window_height < 4) {
    throw ParseError("cascade window must be at least 4x4, got " + std::to_string(cascade.window_width) + "x" +
                     std::to_string(cascade.window_height));
  }
  if (cascade.stages.empty()) throw ParseError("cascade has no stages");
  for (std::size_t s = 0; s < cascade.stages.size(); ++s) {
    const auto& stage = cascade.stages[s];
    const std::string where = "stage " + std::to_string(s);
    if (stage.weak_classifiers.empty()) throw ParseError(where + " has no weak classifiers");
    for (std::size_t c = 0; c < stage.weak_classifiers.size(); ++c) {
      const auto& rects = stage.weak_classifiers[c].rects;
      const std::string at = where + " classifier " + std::to_string(c);
      if (rects.empty() || rects.size() > 3) {
        throw ParseError(at + " must have 1..3 rects, got " + std::to_string(rects.size()));
      }
      int negatives = 0;
      for (const auto& r : rects) {
        if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.x + r.w > cascade.window_width ||
            r.y + r.h > cascade.window_height) {
          throw ParseError(at + " has a rect outside the " + std::to_string(cascade.window_width) + "x" +
                           std::to_string(cascade.window_height) + " window");
        }
        if (r.weight < 0) ++negatives;
      }
      if (rects.size() > 1 && negatives != 1) {
        throw UnsupportedFeatureError(at + " must have exactly one negative-weight rect");
      }
    }
  }
}

// <size>W H</size> <stages><_><trees><_><_>node</_></_>...<stage_threshold>
Cascade parse_legacy(const pt::ptree& root) {
  Cascade cascade;
  auto size = numbers(child(root, "size", "root"), "size");
  if (size.size() != 2) throw ParseError("<size> must hold 'width height'");
  cascade.window_width = static_cast<int>(size[0]);
  cascade.window_height = static_cast<int>(size[1]);

  std::size_t s = 0;
  for (const auto* stage_node : elements(child(root, "stages", "root"))) {
    const std::string where = "stage " + std::to_string(s++);
    Stage stage;
    stage.stage_threshold = number(*stage_node, "stage_threshold", where);
    std::size_t t = 0;
    for (const auto* tree : elements(child(*stage_node, "trees", where))) {
      const std::string at = where + " tree " + std::to_string(t++);
      auto nodes = elements(*tree);
      if (nodes.size() != 1) {
        throw UnsupportedFeatureError(at + " has " + std::to_string(nodes.size()) + " nodes; only stumps are supported");
      }
      const auto& node = *nodes.front();
      if (node.get_child_optional("left_node") || node.get_child_optional("right_node")) {
        throw UnsupportedFeatureError(at + " references child nodes; only stumps are supported");
      }
      WeakClassifier weak;
      weak.rects = parse_rects(child(node, "feature", at), at);
      weak.threshold = number(node, "threshold", at);
      weak.left_value = number(node, "left_val", at);
      weak.right_value = number(node, "right_val", at);
      stage.weak_classifiers.push_back(std::move(weak));
    }
    cascade.stages.push_back(std::move(stage));
  }
  return cascade;
}

// <width>, <height>, <stages> with internalNodes/leafValues, shared <features>.
Cascade parse_boost(const pt::ptree& root) {
  if (auto type = root.get_optional<std::string>("featureType")) {
    std::istringstream in(*type);
    std::string word;
    in >> word;
    if (word != "HAAR") throw UnsupportedFeatureError("feature type '" + word + "' is not supported");
  }
  Cascade cascade;
  cascade.window_width = integer(root, "width", "root");
  cascade.window_height = integer(root, "height", "root");

  std::vector<std::vector<WeightedRect>> features;
  std::size_t f = 0;
  for (const auto* feature : elements(child(root, "features", "root"))) {
    features.push_back(parse_rects(*feature, "feature " + std::to_string(f++)));
  }

  std::size_t s = 0;
  for (const auto* stage_node : elements(child(root, "stages", "root"))) {
    const std::string where = "stage " + std::to_string(s++);
    Stage stage;
    stage.stage_threshold = number(*stage_node, "stageThreshold", where);
    std::size_t c = 0;
    for (const auto* weak_node : elements(child(*stage_node, "weakClassifiers", where))) {
      const std::string at = where + " classifier " + std::to_string(c++);
      auto internal = numbers(child(*weak_node, "internalNodes", at), at + "/internalNodes");
      auto leaves = numbers(child(*weak_node, "leafValues", at), at + "/leafValues");
      if (internal.size() != 4 || leaves.size() != 2) {
        throw UnsupportedFeatureError(at + " is not a single-node stump");
      }
      if (internal[0] != 0 || internal[1] != -1) throw UnsupportedFeatureError(at + " has non-stump node links");
      const auto index = static_cast<long>(internal[2]);
      if (index < 0 || static_cast<std::size_t>(index) >= features.size()) {
        throw ParseError(at + " references missing feature " + std::to_string(index));
      }
      WeakClassifier weak;
      weak.rects = features[static_cast<std::size_t>(index)];
      weak.threshold = internal[3];
      weak.left_value = leaves[0];
      weak.right_value = leaves[1];
      stage.weak_classifiers.push_back(std::move(weak));
    }
    cascade.stages.push_back(std::move(stage));
  }
  return cascade;
}

}  // namespace

std::size_t Cascade::classifier_count() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.weak_classifiers.size();
  return n;
}

Cascade parse_cascade_xml(std::string_view text) {
  pt::ptree doc;
  try {
    std::istringstream in{std::string(text)};
    pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError("malformed cascade XML: " + e.message(), e.line());
  }

  const pt::ptree* top = &doc;
  if (auto storage = doc.get_child_optional("opencv_storage")) top = &*storage;

  for (const auto& [key, node] : *top) {
    if (is_meta_key(key)) continue;
    Cascade cascade;
    if (node.get_child_optional("size") && node.get_child_optional("stages")) {
      cascade = parse_legacy(node);
    } else if (node.get_child_optional("stages") && node.get_child_optional("features")) {
      cascade = parse_boost(node);
    } else {
      continue;
    }
    validate(cascade);
    return cascade;
  }
  throw ParseError("no cascade element found (expected <size>/<stages> or <stages>/<features>)");
}

Cascade load_cascade(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open cascade file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cascade_xml(buf.str());
}

}  // namespace storewatch::haar
