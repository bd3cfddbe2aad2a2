// Python bindings for the grounding pipeline. Heavy state (scenes, weights,
// per-scene forward results) stays opaque; per-query results cross as dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "ham/pipeline.hpp"

namespace py = pybind11;

namespace {

ham::Vec3 to_vec3(const std::vector<double>& v, const char* what) {
    if (v.size() != 3) throw ham::ShapeError(std::string(what) + " needs 3 values");
    return {v[0], v[1], v[2]};
}

py::tuple from_vec3(const ham::Vec3& v) { return py::make_tuple(v.x, v.y, v.z); }

py::dict box_dict(const ham::Box3& b) {
    py::dict d;
    d["center"] = from_vec3(b.center);
    d["size"] = from_vec3(b.size);
    return d;
}

py::dict match_dict(const ham::QueryForward& q) {
    py::dict d;
    d["best_index"] = q.match.best_index;
    d["best_prob"] = q.match.probs[q.match.best_index];
    d["best_box"] = box_dict(q.match.best_box);
    d["logits"] = q.match.logits;
    d["probs"] = q.match.probs;
    if (q.loss) {
        py::dict loss;
        loss["l_match"] = q.loss->l_match;
        loss["l_det"] = q.loss->l_det;
        loss["l_cls"] = q.loss->l_cls;
        loss["l_total"] = q.loss->l_total;
        d["loss"] = loss;
    } else {
        d["loss"] = py::none();
    }
    return d;
}

ham::SampleResult run_sample(const ham::Scene& scene, const std::string& strategy,
                             std::size_t n, std::size_t start,
                             const std::vector<double>& weights) {
    if (strategy == "dfps") return ham::dfps(scene.cloud, n, start);
    if (strategy == "ffps") return ham::ffps(scene.cloud, n, start, weights);
    if (strategy == "fs") return ham::fusion_sampling(scene.cloud, n, start, weights);
    if (strategy == "cs")
        return ham::concentration_sampling(scene.cloud, n, start, weights);
    throw ham::ValueError("unknown strategy: " + strategy);
}

}  // namespace

PYBIND11_MODULE(_ham, m) {
    m.doc() = "Point-language grounding pipeline";
    m.attr("__version__") = "0.1.0";

    py::register_exception<ham::Error>(m, "HamError");

    py::class_<ham::Box3>(m, "Box3")
        .def(py::init([](const std::vector<double>& center,
                         const std::vector<double>& size) {
                 return ham::Box3{to_vec3(center, "center"), to_vec3(size, "size")};
             }),
             py::arg("center"), py::arg("size"))
        .def_property_readonly(
            "center", [](const ham::Box3& b) { return from_vec3(b.center); })
        .def_property_readonly("size",
                               [](const ham::Box3& b) { return from_vec3(b.size); })
        .def("volume", &ham::Box3::volume)
        .def("contains",
             [](const ham::Box3& b, const std::vector<double>& p) {
                 return b.contains(to_vec3(p, "point"));
             },
             py::arg("point"))
        .def("__repr__", [](const ham::Box3& b) {
            return "Box3(center=(" + std::to_string(b.center.x) + ", " +
                   std::to_string(b.center.y) + ", " + std::to_string(b.center.z) +
                   "), size=(" + std::to_string(b.size.x) + ", " +
                   std::to_string(b.size.y) + ", " + std::to_string(b.size.z) + "))";
        });

    m.def("iou3d", &ham::iou3d, py::arg("a"), py::arg("b"),
          "Axis-aligned 3D IoU of two boxes.");
    m.def("acc_at_iou", &ham::acc_at_iou, py::arg("pred"), py::arg("gt"),
          py::arg("threshold"),
          "Fraction of box pairs with IoU strictly above the threshold.");

    py::class_<ham::SceneObject>(m, "SceneObject")
        .def_readonly("instance_id", &ham::SceneObject::instance_id)
        .def_readonly("class_id", &ham::SceneObject::class_id)
        .def_readonly("box", &ham::SceneObject::box);

    py::class_<ham::Scene>(m, "Scene")
        .def_property_readonly(
            "n_points", [](const ham::Scene& s) { return s.cloud.count; })
        .def_property_readonly(
            "attr_dim", [](const ham::Scene& s) { return s.cloud.attr_dim; })
        .def_property_readonly(
            "objects", [](const ham::Scene& s) { return s.objects; })
        .def_property_readonly(
            "bounds_min", [](const ham::Scene& s) { return from_vec3(s.bounds_min); })
        .def_property_readonly(
            "bounds_max", [](const ham::Scene& s) { return from_vec3(s.bounds_max); })
        .def("position",
             [](const ham::Scene& s, std::size_t i) {
                 if (i >= s.cloud.count) throw ham::ValueError("point id out of range");
                 return from_vec3(s.cloud.position(i));
             },
             py::arg("index"))
        .def("save", &ham::save_scene, py::arg("path"))
        .def_static("load", &ham::load_scene, py::arg("path"));

    m.def(
        "generate_scene",
        [](std::uint64_t seed, std::size_t n_points, std::size_t n_objects,
           const std::vector<double>& room, double foreground_fraction,
           std::size_t n_classes, double max_overlap) {
            ham::GenerateParams p;
            p.seed = seed;
            p.n_points = n_points;
            p.n_objects = n_objects;
            p.room_size = to_vec3(room, "room");
            p.foreground_fraction = foreground_fraction;
            p.n_classes = n_classes;
            p.max_overlap = max_overlap;
            return ham::generate_scene(p);
        },
        py::arg("seed") = 0, py::arg("n_points") = 50000, py::arg("n_objects") = 5,
        py::arg("room") = std::vector<double>{6.0, 6.0, 3.0},
        py::arg("foreground_fraction") = 0.7, py::arg("n_classes") = 8,
        py::arg("max_overlap") = 0.3);

    py::class_<ham::QueryRecord>(m, "QueryRecord")
        .def(py::init([](std::string scene_id, std::string text,
                         std::vector<std::uint32_t> targets) {
                 ham::QueryRecord r;
                 r.scene_id = std::move(scene_id);
                 r.text = std::move(text);
                 r.target_instance_ids = std::move(targets);
                 return r;
             }),
             py::arg("scene_id"), py::arg("text"),
             py::arg("target_instance_ids") = std::vector<std::uint32_t>{})
        .def_readwrite("scene_id", &ham::QueryRecord::scene_id)
        .def_readwrite("text", &ham::QueryRecord::text)
        .def_readwrite("target_instance_ids", &ham::QueryRecord::target_instance_ids)
        .def_readwrite("group", &ham::QueryRecord::group);

    m.def("generate_queries", &ham::generate_queries, py::arg("scene"),
          py::arg("scene_id"), py::arg("n"), py::arg("seed"));
    m.def("load_queries", &ham::load_queries, py::arg("path"));
    m.def("save_queries", &ham::save_queries, py::arg("records"), py::arg("path"));

    m.def(
        "sample",
        [](const ham::Scene& scene, const std::string& strategy, std::size_t n,
           std::size_t start, const std::vector<double>& weights) {
            return run_sample(scene, strategy, n, start, weights).indices;
        },
        py::arg("scene"), py::arg("strategy"), py::arg("n"), py::arg("start") = 0,
        py::arg("weights") = std::vector<double>{},
        "Run one of dfps|ffps|fs|cs and return the sampled point ids.");

    py::class_<ham::PipelineConfig>(m, "Config")
        .def(py::init<>())
        .def_readwrite("l", &ham::PipelineConfig::l)
        .def_readwrite("n", &ham::PipelineConfig::n)
        .def_readwrite("m", &ham::PipelineConfig::m)
        .def_readwrite("c", &ham::PipelineConfig::c)
        .def_readwrite("t", &ham::PipelineConfig::t)
        .def_readwrite("r", &ham::PipelineConfig::r)
        .def_readwrite("heads", &ham::PipelineConfig::heads)
        .def_readwrite("placm_depth", &ham::PipelineConfig::placm_depth)
        .def_readwrite("mask_ratio", &ham::PipelineConfig::mask_ratio)
        .def_readwrite("seed", &ham::PipelineConfig::seed)
        .def("validate", &ham::PipelineConfig::validate)
        .def("to_json", &ham::PipelineConfig::to_json)
        .def_static("from_json", &ham::PipelineConfig::from_json, py::arg("text"))
        .def_static("load", &ham::PipelineConfig::load, py::arg("path"));

    py::class_<ham::Vocabulary>(m, "Vocabulary")
        .def_static("builtin", &ham::Vocabulary::builtin)
        .def_static("from_file", &ham::Vocabulary::from_file, py::arg("path"))
        .def("id_of", &ham::Vocabulary::id_of, py::arg("word"))
        .def("word_of", &ham::Vocabulary::word_of, py::arg("id"))
        .def("__len__", &ham::Vocabulary::size);

    m.def("tokenize", &ham::tokenize, py::arg("text"), py::arg("vocab"),
          py::arg("t_max") = ham::kMaxSentenceLen);
    m.def(
        "mask_words",
        [](const std::vector<std::uint32_t>& tokens, double ratio_max,
           std::uint64_t seed) {
            ham::Rng rng(seed);
            return ham::mask_words(tokens, ratio_max, rng);
        },
        py::arg("tokens"), py::arg("ratio_max"), py::arg("seed"));

    py::class_<ham::HamWeights>(m, "Weights")
        .def_static("random", &ham::HamWeights::random, py::arg("config"),
                    py::arg("vocab_size"), py::arg("n_classes") = 8)
        .def("save", &ham::HamWeights::save, py::arg("path"))
        .def_static("load", &ham::HamWeights::load, py::arg("path"),
                    py::arg("config"));

    py::class_<ham::SceneForward>(m, "SceneForward")
        .def_property_readonly(
            "n_keys", [](const ham::SceneForward& s) { return s.keys.count(); })
        .def_property_readonly(
            "n_proposals",
            [](const ham::SceneForward& s) { return s.proposals.count(); })
        .def_property_readonly(
            "objectness", [](const ham::SceneForward& s) { return s.objectness; })
        .def_property_readonly("proposal_boxes", [](const ham::SceneForward& s) {
            return s.proposals.boxes;
        });

    m.def("scene_forward", &ham::scene_forward, py::arg("scene"), py::arg("config"),
          py::arg("weights"));
    m.def(
        "forward_query",
        [](const ham::Scene& scene, const ham::SceneForward& sf,
           const ham::QueryRecord& query, const ham::PipelineConfig& config,
           const ham::HamWeights& weights, const ham::Vocabulary& vocab) {
            return match_dict(ham::forward_query(scene, sf, query, config, weights,
                                                 vocab));
        },
        py::arg("scene"), py::arg("sf"), py::arg("query"), py::arg("config"),
        py::arg("weights"), py::arg("vocab"));
    m.def(
        "evaluate",
        [](const ham::Scene& scene, const std::vector<ham::QueryRecord>& queries,
           const ham::PipelineConfig& config, const ham::HamWeights& weights,
           const ham::Vocabulary& vocab) {
            const ham::EvalReport r =
                ham::evaluate_queries(scene, queries, config, weights, vocab);
            py::dict d;
            d["acc_at_025"] = r.acc_at_025;
            d["acc_at_05"] = r.acc_at_05;
            d["n_queries"] = r.n_queries;
            d["per_query"] = r.per_query_iou;
            return d;
        },
        py::arg("scene"), py::arg("queries"), py::arg("config"), py::arg("weights"),
        py::arg("vocab"));

    py::class_<ham::Rng>(m, "Rng")
        .def(py::init<std::uint64_t>(), py::arg("seed"))
        .def("next", &ham::Rng::next)
        .def("next_below", &ham::Rng::next_below, py::arg("n"))
        .def("next_unit", &ham::Rng::next_unit)
        .def("next_normal", &ham::Rng::next_normal);
    m.def(
        "derive_seed",
        [](std::uint64_t seed, const std::string& stream) {
            return ham::derive_seed(seed, std::string_view(stream));
        },
        py::arg("seed"), py::arg("stream"));
}
