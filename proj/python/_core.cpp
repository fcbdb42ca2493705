#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "storewatch/error.hpp"
#include "storewatch/pipeline.hpp"
#include "storewatch/weights_io.hpp"

namespace py = pybind11;
using namespace storewatch;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const FloatArray& a) {
  Shape dims(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(dims), std::vector<float>(a.data(), a.data() + a.size()));
}

py::array_t<float> to_numpy(const Tensor& t) {
  py::array_t<float> out(std::vector<py::ssize_t>(t.dims().begin(), t.dims().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

GrayImage to_gray_image(const ByteArray& a) {
  if (a.ndim() != 2) throw ShapeError("gray image must be a 2-D uint8 array");
  return GrayImage(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                   std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

RgbImage to_rgb_image(const ByteArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("RGB image must be an H x W x 3 uint8 array");
  return RgbImage(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                  std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

py::array_t<std::int64_t> table(std::span<const std::int64_t> t, int w, int h) {
  py::array_t<std::int64_t> out({h + 1, w + 1});
  std::copy(t.begin(), t.end(), out.mutable_data());
  return out;
}

ops::Padding padding(const std::string& s) {
  if (s == "valid") return ops::Padding::valid;
  if (s == "same") return ops::Padding::same;
  throw DomainError("padding must be 'valid' or 'same', got '" + s + "'");
}

weights::TensorArchive to_archive(const std::map<std::string, FloatArray>& entries,
                                  const std::map<std::string, std::string>& metadata) {
  weights::TensorArchive a;
  for (const auto& [k, v] : metadata) a.metadata[k] = v;
  for (const auto& [name, arr] : entries) a.entries.emplace(name, to_tensor(arr));
  return a;
}

py::dict entries_to_dict(const weights::TensorArchive& a) {
  py::dict d;
  for (const auto& [name, t] : a.entries) d[py::str(name)] = to_numpy(t);
  return d;
}

weights::Manifest manifest_for(const std::string& network) {
  if (network == "wrn") return demographics::wrn_manifest();
  if (network == "xception") return expression::xception_manifest();
  throw DomainError("network must be 'wrn' or 'xception', got '" + network + "'");
}

nn::LayerKind layer_kind(const std::string& name) {
  using K = nn::LayerKind;
  for (K k : {K::conv2d, K::batch_norm, K::relu, K::max_pool, K::global_avg_pool, K::dense, K::softmax, K::add})
    if (name == nn::to_string(k)) return k;
  throw DomainError("unknown layer kind '" + name + "'");
}

haar::Box to_box(const std::tuple<int, int, int, int>& b) {
  return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)};
}

py::dict age_gender_dict(const demographics::AgeGenderResult& r) {
  py::dict d;
  d["gender"] = std::string(demographics::to_string(r.gender));
  d["gender_probs"] = std::vector<float>(r.gender_probs.begin(), r.gender_probs.end());
  d["age_estimate"] = r.age_estimate;
  d["age_group"] = std::string(demographics::to_string(r.group));
  d["age_probs"] = r.age_probs;
  return d;
}

py::dict expression_dict(const expression::ExpressionResult& r) {
  py::dict d;
  d["label"] = std::string(expression::to_string(r.label));
  d["probs"] = std::vector<float>(r.probs.begin(), r.probs.end());
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Face detection with age, gender and expression estimation";

  auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", error);
  py::register_exception<BoundsError>(m, "BoundsError", error);
  py::register_exception<DomainError>(m, "DomainError", error);
  py::register_exception<GeometryError>(m, "GeometryError", error);
  py::register_exception<ParseError>(m, "ParseError", error);
  py::register_exception<UnsupportedFeatureError>(m, "UnsupportedFeatureError", error);
  auto format = py::register_exception<FormatError>(m, "FormatError", error);
  py::register_exception<TruncationError>(m, "TruncationError", format);
  py::register_exception<DuplicateError>(m, "DuplicateError", format);
  py::register_exception<VersionError>(m, "VersionError", format);
  py::register_exception<MissingWeightError>(m, "MissingWeightError", error);
  py::register_exception<IoError>(m, "IoError", error);

  // ops
  m.def(
      "conv2d",
      [](const FloatArray& x, const FloatArray& k, std::optional<FloatArray> bias, std::size_t stride,
         const std::string& pad, std::size_t groups) {
        std::optional<Tensor> b;
        if (bias) b = to_tensor(*bias);
        return to_numpy(ops::conv2d(to_tensor(x), to_tensor(k), b, {stride, padding(pad), groups}));
      },
      py::arg("x"), py::arg("kernels"), py::arg("bias") = py::none(), py::arg("stride") = 1,
      py::arg("padding") = "valid", py::arg("groups") = 1);
  m.def(
      "batch_norm",
      [](const FloatArray& x, const FloatArray& g, const FloatArray& b, const FloatArray& mean,
         const FloatArray& var, float eps) {
        return to_numpy(ops::batch_norm_inference(to_tensor(x), to_tensor(g), to_tensor(b), to_tensor(mean),
                                                  to_tensor(var), eps));
      },
      py::arg("x"), py::arg("gamma"), py::arg("beta"), py::arg("mean"), py::arg("variance"),
      py::arg("epsilon") = 1e-3f);
  m.def("relu", [](const FloatArray& x) { return to_numpy(ops::relu(to_tensor(x))); });
  m.def(
      "max_pool",
      [](const FloatArray& x, std::size_t window, std::size_t stride, const std::string& pad) {
        return to_numpy(ops::pool2d(to_tensor(x), ops::PoolMode::max, window, stride, padding(pad)));
      },
      py::arg("x"), py::arg("window"), py::arg("stride"), py::arg("padding") = "valid");
  m.def("global_avg_pool",
        [](const FloatArray& x) { return to_numpy(ops::pool2d(to_tensor(x), ops::PoolMode::global_avg)); });
  m.def("dense", [](const FloatArray& x, const FloatArray& w, const FloatArray& b) {
    return to_numpy(ops::dense(to_tensor(x), to_tensor(w), to_tensor(b)));
  });
  m.def("softmax", [](const FloatArray& x) { return to_numpy(ops::softmax(to_tensor(x))); });

  // integral images
  m.def(
      "integral",
      [](const ByteArray& img) {
        const auto ii = haar::compute_integral(to_gray_image(img));
        return py::make_tuple(table(ii.sum_table(), ii.width(), ii.height()),
                              table(ii.sq_sum_table(), ii.width(), ii.height()));
      },
      "(sum, sq_sum) tables of shape (H+1, W+1).");
  m.def("rect_sum", [](const ByteArray& img, int x, int y, int w, int h) {
    return haar::rect_sum(haar::compute_integral(to_gray_image(img)), x, y, w, h);
  });

  // cascades
  py::class_<haar::Cascade>(m, "Cascade")
      .def_readonly("window_width", &haar::Cascade::window_width)
      .def_readonly("window_height", &haar::Cascade::window_height)
      .def_property_readonly("stage_count", [](const haar::Cascade& c) { return c.stages.size(); })
      .def_property_readonly("classifier_count", &haar::Cascade::classifier_count)
      .def("__eq__", [](const haar::Cascade& a, const haar::Cascade& b) { return a == b; });
  m.def("load_cascade", &haar::load_cascade, py::arg("path"));
  m.def("parse_cascade_xml", [](const std::string& text) { return haar::parse_cascade_xml(text); });
  m.def(
      "detect_multiscale",
      [](const haar::Cascade& c, const ByteArray& gray, double scale_factor, int min_neighbors,
         std::optional<int> min_size, std::optional<int> max_size, double group_eps) {
        haar::DetectParams p;
        p.scale_factor = scale_factor;
        p.min_neighbors = min_neighbors;
        p.group_eps = group_eps;
        p.min_size = min_size ? std::optional(haar::Size{*min_size, *min_size}) : std::nullopt;
        p.max_size = max_size ? std::optional(haar::Size{*max_size, *max_size}) : std::nullopt;
        std::vector<std::tuple<int, int, int, int, int>> out;
        for (const auto& d : haar::detect_multiscale(c, to_gray_image(gray), p))
          out.emplace_back(d.x, d.y, d.w, d.h, d.neighbor_count);
        return out;
      },
      py::arg("cascade"), py::arg("gray"), py::arg("scale_factor") = 1.1, py::arg("min_neighbors") = 3,
      py::arg("min_size") = 30, py::arg("max_size") = py::none(), py::arg("group_eps") = 0.2,
      "List of (x, y, w, h, neighbors).");
  m.def(
      "group_rectangles",
      [](const std::vector<std::tuple<int, int, int, int>>& boxes, int min_neighbors, double eps) {
        std::vector<haar::Box> in;
        for (const auto& b : boxes) in.push_back(to_box(b));
        std::vector<std::tuple<int, int, int, int, int>> out;
        for (const auto& d : haar::group_rectangles(in, min_neighbors, eps))
          out.emplace_back(d.x, d.y, d.w, d.h, d.neighbor_count);
        return out;
      },
      py::arg("boxes"), py::arg("min_neighbors"), py::arg("eps") = 0.2);
  m.def("to_gray", [](const ByteArray& rgb) {
    const auto g = to_gray(to_rgb_image(rgb));
    py::array_t<std::uint8_t> out({g.height, g.width});
    std::copy(g.pixels.begin(), g.pixels.end(), out.mutable_data());
    return out;
  });

  // NNWA archives
  m.def(
      "write_archive",
      [](const std::map<std::string, FloatArray>& entries, const std::map<std::string, std::string>& metadata) {
        const auto bytes = weights::write_archive(to_archive(entries, metadata));
        return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
      },
      py::arg("entries"), py::arg("metadata") = std::map<std::string, std::string>{});
  m.def(
      "read_archive",
      [](const py::bytes& data) {
        const std::string_view view = data;
        const auto a = weights::read_archive(
            std::span(reinterpret_cast<const std::uint8_t*>(view.data()), view.size()));
        return py::make_tuple(entries_to_dict(a), a.metadata);
      },
      "(entries, metadata) from NNWA bytes.");
  m.def("load_archive", [](const std::filesystem::path& p) {
    const auto a = weights::load_archive(p);
    return py::make_tuple(entries_to_dict(a), a.metadata);
  });
  m.def(
      "save_random_archive",
      [](const std::string& network, std::uint64_t seed, const std::filesystem::path& path) {
        weights::save_archive(weights::random_archive(manifest_for(network), seed), path);
      },
      py::arg("network"), py::arg("seed"), py::arg("path"));
  m.def("manifest", [](const std::string& network) {
    std::vector<std::pair<std::string, Shape>> out;
    for (const auto& e : manifest_for(network)) out.emplace_back(e.name, e.dims);
    return out;
  });

  // networks
  py::class_<demographics::AgeGenderNet>(m, "AgeGenderNet")
      .def_static(
          "load", [](const std::filesystem::path& p) { return demographics::AgeGenderNet::build({}, weights::load_archive(p)); })
      .def("predict", [](const demographics::AgeGenderNet& n, const FloatArray& face) {
        return age_gender_dict(n.predict(to_tensor(face)));
      })
      .def("forward",
           [](const demographics::AgeGenderNet& n, const FloatArray& face) {
             const auto out = n.forward(to_tensor(face));
             return py::make_tuple(to_numpy(out[0]), to_numpy(out[1]));
           })
      .def_property_readonly("trainable_parameter_count",
                             [](const demographics::AgeGenderNet& n) { return n.network().trainable_parameter_count(); })
      .def("layer_count", [](const demographics::AgeGenderNet& n, const std::string& kind) {
        return n.network().count(layer_kind(kind));
      });
  py::class_<expression::ExpressionNet>(m, "ExpressionNet")
      .def_static(
          "load", [](const std::filesystem::path& p) { return expression::ExpressionNet::build({}, weights::load_archive(p)); })
      .def("predict", [](const expression::ExpressionNet& n, const FloatArray& face) {
        return expression_dict(n.predict(to_tensor(face)));
      })
      .def("forward", [](const expression::ExpressionNet& n, const FloatArray& face) {
        return to_numpy(n.forward(to_tensor(face)));
      })
      .def_property_readonly("trainable_parameter_count",
                             [](const expression::ExpressionNet& n) { return n.network().trainable_parameter_count(); })
      .def("layer_count", [](const expression::ExpressionNet& n, const std::string& kind) {
        return n.network().count(layer_kind(kind));
      });
  m.def(
      "preprocess_face",
      [](const ByteArray& frame, const std::tuple<int, int, int, int>& box, double margin) {
        return to_numpy(demographics::preprocess_face(to_rgb_image(frame), to_box(box), margin));
      },
      py::arg("frame"), py::arg("box"), py::arg("margin") = demographics::kDefaultCropMargin);
  m.def("preprocess_gray", [](const ByteArray& frame, const std::tuple<int, int, int, int>& box) {
    return to_numpy(expression::preprocess_gray(to_rgb_image(frame), to_box(box)));
  });
  m.def("age_group", [](double age) { return std::string(demographics::to_string(demographics::age_group(age))); });

  // pipeline
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"storewatch"};
        for (const auto& a : args) argv.push_back(a.c_str());
        py::gil_scoped_release release;
        return pipeline::run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "Runs the storewatch command line; returns its exit code.");
}
