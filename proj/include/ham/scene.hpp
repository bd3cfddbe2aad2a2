#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ham/common.hpp"

namespace ham {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Axis-aligned box: center plus full edge lengths, all in meters.
struct Box3 {
    Vec3 center;
    Vec3 size;

    Vec3 min_corner() const {
        return {center.x - size.x / 2, center.y - size.y / 2, center.z - size.z / 2};
    }
    Vec3 max_corner() const {
        return {center.x + size.x / 2, center.y + size.y / 2, center.z + size.z / 2};
    }
    double volume() const { return size.x * size.y * size.z; }
    bool contains(const Vec3& p) const;
};

// Axis-aligned intersection-over-union, in [0, 1].
double iou3d(const Box3& a, const Box3& b);

// Raw scene points. positions is L x 3, attributes is L x x, both row-major
// and widened to f64 in memory (the file stores f32).
struct PointCloud {
    std::size_t count = 0;       // L
    std::size_t attr_dim = 0;    // x
    std::vector<double> positions;
    std::vector<double> attributes;

    Vec3 position(std::size_t i) const {
        return {positions[3 * i], positions[3 * i + 1], positions[3 * i + 2]};
    }
    std::span<const double> attr_row(std::size_t i) const {
        return {attributes.data() + i * attr_dim, attr_dim};
    }
};

struct SceneObject {
    std::uint32_t instance_id = 0;
    std::uint32_t class_id = 0;
    Box3 box;
};

struct Scene {
    PointCloud cloud;
    std::vector<SceneObject> objects;
    Vec3 bounds_min;
    Vec3 bounds_max;

    void recompute_bounds();
    const SceneObject* find_instance(std::uint32_t instance_id) const;
};

// Binary scene container, magic "HAMP". Positions and attributes are f32 on
// disk; save(load(save(s))) is byte-identical.
void save_scene(const Scene& scene, const std::string& path);
Scene load_scene(const std::string& path);
std::vector<std::uint8_t> serialize_scene(const Scene& scene);
Scene deserialize_scene(std::span<const std::uint8_t> bytes);

struct QueryRecord {
    std::string scene_id;
    std::string text;
    std::vector<std::uint32_t> target_instance_ids;
    std::optional<std::uint32_t> group;
};

// JSON-lines, one record per line.
std::vector<QueryRecord> load_queries(const std::string& path);
void save_queries(const std::vector<QueryRecord>& records, const std::string& path);

struct GenerateParams {
    std::uint64_t seed = 0;
    std::size_t n_objects = 5;
    Vec3 room_size{6.0, 6.0, 3.0};
    std::size_t n_points = 50000;
    double foreground_fraction = 0.7;
    std::size_t n_classes = 8;
    double max_overlap = 0.3;  // rejection threshold on pairwise box IoU
};

// Deterministic synthetic scene: boxes rejected above the overlap threshold,
// points on box surfaces (constant rgb per object, outward unit normals)
// plus floor and walls. Attribute layout: rgb in [0,1] then unit normal.
Scene generate_scene(const GenerateParams& params);

// Templated referring expressions for generated scenes ("the red chair ...").
std::vector<QueryRecord> generate_queries(const Scene& scene, const std::string& scene_id,
                                          std::size_t n_queries, std::uint64_t seed);

extern const std::array<const char*, 8> kClassNames;

}  // namespace ham
