#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "dc2/combine.hpp"
#include "dc2/divide.hpp"
#include "dc2/eval.hpp"
#include "dc2/geometry.hpp"
#include "dc2/inference.hpp"
#include "dc2/synthetic.hpp"

namespace py = pybind11;
using namespace dc2;

namespace {

Image image_from_array(const py::array_t<std::uint8_t>& array) {
    const auto buf = array.request();
    if (buf.ndim != 3 || buf.shape[2] != 3) {
        throw py::value_error("expected an HxWx3 uint8 array");
    }
    Image img(static_cast<int>(buf.shape[1]), static_cast<int>(buf.shape[0]));
    const auto view = array.unchecked<3>();
    for (py::ssize_t y = 0; y < view.shape(0); ++y) {
        for (py::ssize_t x = 0; x < view.shape(1); ++x) {
            std::uint8_t* p = img.px(static_cast<int>(x), static_cast<int>(y));
            p[0] = view(y, x, 0);
            p[1] = view(y, x, 1);
            p[2] = view(y, x, 2);
        }
    }
    return img;
}

py::array_t<std::uint8_t> image_to_array(const Image& img) {
    py::array_t<std::uint8_t> out({img.h, img.w, 3});
    auto view = out.mutable_unchecked<3>();
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            const std::uint8_t* p = img.px(x, y);
            view(y, x, 0) = p[0];
            view(y, x, 1) = p[1];
            view(y, x, 2) = p[2];
        }
    }
    return out;
}

std::vector<std::vector<double>> features_from_arrays(
    const std::vector<std::vector<double>>& features) {
    return features;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Divide, conquer and combine pipeline for high-resolution "
              "image question answering";

    py::class_<Region>(m, "Region")
        .def(py::init<>())
        .def(py::init([](int x, int y, int w, int h) {
                 return Region{x, y, w, h};
             }),
             py::arg("x"), py::arg("y"), py::arg("w"), py::arg("h"))
        .def_readwrite("x", &Region::x)
        .def_readwrite("y", &Region::y)
        .def_readwrite("w", &Region::w)
        .def_readwrite("h", &Region::h)
        .def("area", &Region::area)
        .def("__eq__", [](const Region& a, const Region& b) { return a == b; })
        .def("__repr__", [](const Region& r) {
            return "Region(x=" + std::to_string(r.x) + ", y=" +
                   std::to_string(r.y) + ", w=" + std::to_string(r.w) +
                   ", h=" + std::to_string(r.h) + ")";
        });

    py::class_<ScoredRegion>(m, "ScoredRegion")
        .def(py::init([](const Region& region, int layer, int tiebreak) {
                 return ScoredRegion{region, layer, tiebreak};
             }),
             py::arg("region"), py::arg("layer"), py::arg("tiebreak") = 0)
        .def_readwrite("region", &ScoredRegion::region)
        .def_readwrite("layer", &ScoredRegion::layer)
        .def_readwrite("tiebreak", &ScoredRegion::tiebreak);

    m.def("split_region", &split_region, py::arg("parent"),
          "Split into the four quadrants (TL, TR, BL, BR)");
    m.def("iou", &iou, py::arg("a"), py::arg("b"));
    m.def("nms", &nms, py::arg("candidates"), py::arg("iou_threshold"),
          "Greedy NMS, deeper layer first");

    m.def(
        "patch_feature",
        [](const py::array_t<std::uint8_t>& array) {
            PatchImage patch;
            patch.pixels = image_from_array(array);
            patch.source_regions = {
                Region{0, 0, patch.pixels.w, patch.pixels.h}};
            return patch_feature(patch);
        },
        py::arg("image"), "32x32 bilinear thumbnail feature in [0, 1]");
    m.def("cosine_distance", &cosine_distance, py::arg("a"), py::arg("b"));
    m.def(
        "cluster_patches",
        [](const std::vector<std::vector<double>>& features, double theta) {
            return cluster_patches(features_from_arrays(features), theta);
        },
        py::arg("features"), py::arg("theta"),
        "Average-linkage cosine clustering of four feature vectors");
    m.def(
        "bilinear_resize",
        [](const py::array_t<std::uint8_t>& array, int w, int h) {
            return image_to_array(bilinear_resize(image_from_array(array), w, h));
        },
        py::arg("image"), py::arg("w"), py::arg("h"));

    m.def("normalize_name",
          [](const std::string& raw) -> std::optional<std::string> {
              return normalize_name(raw);
          });
    m.def("filter_objects", &filter_objects, py::arg("parent_objects"),
          py::arg("child_objects_union"));
    m.def("score_query_object", &score_query_object, py::arg("query"),
          py::arg("name"));

    m.def("cyclic_permutations", &cyclic_permutations, py::arg("options"));
    m.def(
        "parse_choice",
        [](const std::string& output, const std::vector<std::string>& options)
            -> std::optional<int> { return parse_choice(output, options); },
        py::arg("model_output"), py::arg("options"));
    m.def("recall_at_k", &recall_at_k, py::arg("ranked_names"),
          py::arg("targets"), py::arg("k"));
    m.def("miou", &miou, py::arg("pred"), py::arg("gt"));
    m.def(
        "uncertainty",
        [](const std::vector<double>& lps) -> std::optional<double> {
            return uncertainty(lps);
        },
        py::arg("token_logprobs"));
    m.def("mg", &mg, py::arg("s_v"), py::arg("s_wv"));
    m.def("ml", &ml, py::arg("s_wv"), py::arg("s_t"));
    m.def("cache_key", &cache_key, py::arg("request"));

    py::class_<ChatRequest>(m, "ChatRequest")
        .def(py::init<>())
        .def_readwrite("model", &ChatRequest::model)
        .def_readwrite("system", &ChatRequest::system)
        .def_readwrite("user_text", &ChatRequest::user_text)
        .def_readwrite("image_png", &ChatRequest::image_png)
        .def_readwrite("temperature", &ChatRequest::temperature)
        .def_readwrite("want_logprobs", &ChatRequest::want_logprobs);

    py::class_<VisualMemory>(m, "VisualMemory")
        .def(py::init<>())
        .def("store",
             [](VisualMemory& mem, const std::set<std::string>& objects,
                const std::vector<Region>& regions, int layer,
                double nms_threshold) {
                 mem.store(objects, regions, layer, nms_threshold);
             })
        .def("record_count", &VisualMemory::record_count)
        .def("to_json", &VisualMemory::to_json_string)
        .def_static("from_json", &VisualMemory::from_json_string)
        .def("records", [](const VisualMemory& mem) {
            std::map<std::string, std::vector<ScoredRegion>> out(
                mem.records().begin(), mem.records().end());
            return out;
        });

    py::class_<RetrievalHit>(m, "RetrievalHit")
        .def_readonly("name", &RetrievalHit::name)
        .def_readonly("region", &RetrievalHit::region)
        .def_readonly("layer", &RetrievalHit::layer)
        .def_readonly("score", &RetrievalHit::score);

    m.def(
        "retrieve",
        [](const VisualMemory& memory, const std::string& query, double alpha) {
            return retrieve(memory, query, alpha);
        },
        py::arg("memory"), py::arg("query"), py::arg("alpha"));

    // end-to-end convenience over the mock backend
    m.def(
        "ask_mock",
        [](const std::string& image_path, const std::string& scenes_path,
           const std::string& question, double theta, double alpha) {
            PipelineConfig cfg;
            cfg.theta = theta;
            cfg.alpha = alpha;
            MockBackend backend(load_scenes(scenes_path));
            const Image image = load_image(image_path);
            const std::string id =
                std::filesystem::path(image_path).stem().string();
            const PipelineRun run = run_pipeline(
                image, id, question, "", backend, cfg, default_prompts());
            py::dict out;
            out["answer"] = run.answer_text;
            out["auxiliary"] = run.auxiliary_text;
            out["root_caption"] = run.root_caption;
            out["memory"] = run.memory.to_json_string();
            return out;
        },
        py::arg("image_path"), py::arg("scenes_path"), py::arg("question"),
        py::arg("theta") = 0.1, py::arg("alpha") = 0.3);

    m.attr("__version__") = "0.1.0";
}
