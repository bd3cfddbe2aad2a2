#include "ham/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "ham/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace ham {

const std::array<const char*, 8> kClassNames = {
    "chair", "table", "sofa", "bed", "desk", "cabinet", "lamp", "shelf"};

namespace {

struct PaletteColor {
    const char* name;
    double r, g, b;
};

constexpr std::array<PaletteColor, 8> kPalette = {{
    {"red", 0.80, 0.15, 0.15},
    {"green", 0.15, 0.70, 0.20},
    {"blue", 0.15, 0.25, 0.80},
    {"yellow", 0.85, 0.80, 0.15},
    {"brown", 0.55, 0.35, 0.20},
    {"white", 0.95, 0.95, 0.95},
    {"black", 0.10, 0.10, 0.10},
    {"orange", 0.90, 0.55, 0.15},
}};

double axis_overlap(double c1, double s1, double c2, double s2) {
    const double lo = std::max(c1 - s1 / 2, c2 - s2 / 2);
    const double hi = std::min(c1 + s1 / 2, c2 + s2 / 2);
    return hi > lo ? hi - lo : 0.0;
}

}  // namespace

bool Box3::contains(const Vec3& p) const {
    return std::fabs(p.x - center.x) <= size.x / 2 &&
           std::fabs(p.y - center.y) <= size.y / 2 &&
           std::fabs(p.z - center.z) <= size.z / 2;
}

double iou3d(const Box3& a, const Box3& b) {
    const double ix = axis_overlap(a.center.x, a.size.x, b.center.x, b.size.x);
    const double iy = axis_overlap(a.center.y, a.size.y, b.center.y, b.size.y);
    const double iz = axis_overlap(a.center.z, a.size.z, b.center.z, b.size.z);
    const double inter = ix * iy * iz;
    if (inter <= 0.0) return 0.0;
    const double uni = a.volume() + b.volume() - inter;
    return inter / uni;
}

void Scene::recompute_bounds() {
    if (cloud.count == 0) throw ValueError("scene has no points");
    bounds_min = bounds_max = cloud.position(0);
    for (std::size_t i = 1; i < cloud.count; ++i) {
        const Vec3 p = cloud.position(i);
        bounds_min.x = std::min(bounds_min.x, p.x);
        bounds_min.y = std::min(bounds_min.y, p.y);
        bounds_min.z = std::min(bounds_min.z, p.z);
        bounds_max.x = std::max(bounds_max.x, p.x);
        bounds_max.y = std::max(bounds_max.y, p.y);
        bounds_max.z = std::max(bounds_max.z, p.z);
    }
}

const SceneObject* Scene::find_instance(std::uint32_t instance_id) const {
    for (const auto& o : objects)
        if (o.instance_id == instance_id) return &o;
    return nullptr;
}

std::vector<std::uint8_t> serialize_scene(const Scene& scene) {
    std::vector<std::uint8_t> out;
    auto push_raw = [&out](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    };
    auto push_u32 = [&](std::uint32_t v) { push_raw(&v, 4); };
    auto push_f32 = [&](double v) {
        const float f = static_cast<float>(v);
        push_raw(&f, 4);
    };

    push_raw("HAMP", 4);
    push_u32(static_cast<std::uint32_t>(scene.cloud.count));
    push_u32(static_cast<std::uint32_t>(scene.cloud.attr_dim));
    for (double v : scene.cloud.positions) push_f32(v);
    for (double v : scene.cloud.attributes) push_f32(v);
    push_u32(static_cast<std::uint32_t>(scene.objects.size()));
    for (const auto& o : scene.objects) {
        push_u32(o.instance_id);
        push_u32(o.class_id);
        push_f32(o.box.center.x);
        push_f32(o.box.center.y);
        push_f32(o.box.center.z);
        push_f32(o.box.size.x);
        push_f32(o.box.size.y);
        push_f32(o.box.size.z);
    }
    return out;
}

Scene deserialize_scene(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    auto need = [&](std::size_t n, const char* what) {
        if (pos + n > bytes.size())
            throw FormatError(std::string("truncated payload reading ") + what, pos);
    };
    auto read_u32 = [&](const char* what) {
        need(4, what);
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return v;
    };
    auto read_f32 = [&](const char* what) {
        need(4, what);
        float v;
        std::memcpy(&v, bytes.data() + pos, 4);
        pos += 4;
        return static_cast<double>(v);
    };

    need(4, "magic");
    if (std::memcmp(bytes.data(), "HAMP", 4) != 0)
        throw FormatError("bad magic, expected HAMP", 0);
    pos = 4;

    Scene scene;
    const std::uint32_t count = read_u32("point count");
    const std::uint32_t attr_dim = read_u32("attribute dim");
    if (count == 0) throw FormatError("point count must be at least 1", 4);
    scene.cloud.count = count;
    scene.cloud.attr_dim = attr_dim;
    scene.cloud.positions.resize(static_cast<std::size_t>(count) * 3);
    for (auto& v : scene.cloud.positions) {
        const std::size_t at = pos;
        v = read_f32("positions");
        if (std::isnan(v)) throw FormatError("NaN position", at);
    }
    scene.cloud.attributes.resize(static_cast<std::size_t>(count) * attr_dim);
    for (auto& v : scene.cloud.attributes) v = read_f32("attributes");

    const std::uint32_t n_objects = read_u32("object count");
    scene.objects.resize(n_objects);
    for (auto& o : scene.objects) {
        const std::size_t at = pos;
        o.instance_id = read_u32("instance id");
        for (const auto& seen : scene.objects) {
            if (&seen == &o) break;
            if (seen.instance_id == o.instance_id)
                throw FormatError("duplicate instance id " +
                                      std::to_string(o.instance_id),
                                  at);
        }
        o.class_id = read_u32("class id");
        o.box.center.x = read_f32("box");
        o.box.center.y = read_f32("box");
        o.box.center.z = read_f32("box");
        o.box.size.x = read_f32("box");
        o.box.size.y = read_f32("box");
        o.box.size.z = read_f32("box");
    }
    if (pos != bytes.size())
        throw FormatError("trailing bytes after scene payload", pos);
    scene.recompute_bounds();
    return scene;
}

void save_scene(const Scene& scene, const std::string& path) {
    const auto bytes = serialize_scene(scene);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + path);
}

Scene load_scene(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_scene(bytes);
}

std::vector<QueryRecord> load_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    std::vector<QueryRecord> records;
    std::string line;
    std::size_t offset = 0;
    while (std::getline(in, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw FormatError("invalid JSON query record", line_start);
        QueryRecord rec;
        rec.scene_id = j.at("scene_id").get<std::string>();
        rec.text = j.at("text").get<std::string>();
        rec.target_instance_ids =
            j.at("target_instance_ids").get<std::vector<std::uint32_t>>();
        if (rec.target_instance_ids.empty())
            throw FormatError("target_instance_ids must be nonempty", line_start);
        if (j.contains("group")) rec.group = j.at("group").get<std::uint32_t>();
        records.push_back(std::move(rec));
    }
    return records;
}

void save_queries(const std::vector<QueryRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path);
    for (const auto& rec : records) {
        nlohmann::json j;
        j["scene_id"] = rec.scene_id;
        j["text"] = rec.text;
        j["target_instance_ids"] = rec.target_instance_ids;
        if (rec.group) j["group"] = *rec.group;
        out << j.dump() << "\n";
    }
}

namespace {

// Uniform point on the surface of a box; faces weighted by area. Returns
// position and the outward unit normal.
void sample_box_surface(const Box3& box, Rng& rng, Vec3& p, Vec3& n) {
    const double ax = box.size.y * box.size.z;  // +-x faces
    const double ay = box.size.x * box.size.z;
    const double az = box.size.x * box.size.y;
    const double total = 2 * (ax + ay + az);
    double u = rng.next_unit() * total;
    const Vec3 lo = box.min_corner();
    const double rx = rng.next_unit() * box.size.x;
    const double ry = rng.next_unit() * box.size.y;
    const double rz = rng.next_unit() * box.size.z;
    if (u < ax) {
        p = {lo.x, lo.y + ry, lo.z + rz};
        n = {-1, 0, 0};
    } else if (u < 2 * ax) {
        p = {lo.x + box.size.x, lo.y + ry, lo.z + rz};
        n = {1, 0, 0};
    } else if (u < 2 * ax + ay) {
        p = {lo.x + rx, lo.y, lo.z + rz};
        n = {0, -1, 0};
    } else if (u < 2 * (ax + ay)) {
        p = {lo.x + rx, lo.y + box.size.y, lo.z + rz};
        n = {0, 1, 0};
    } else if (u < 2 * (ax + ay) + az) {
        p = {lo.x + rx, lo.y + ry, lo.z};
        n = {0, 0, -1};
    } else {
        p = {lo.x + rx, lo.y + ry, lo.z + box.size.z};
        n = {0, 0, 1};
    }
}

}  // namespace

Scene generate_scene(const GenerateParams& params) {
    if (params.n_objects < 1) throw ValueError("n_objects must be at least 1");
    if (params.n_points < 1) throw ValueError("n_points must be at least 1");
    if (params.room_size.x <= 0 || params.room_size.y <= 0 || params.room_size.z <= 0)
        throw ValueError("room_size components must be positive");

    Rng rng(derive_seed(params.seed, "scene.layout"));
    Scene scene;

    const double room[3] = {params.room_size.x, params.room_size.y, params.room_size.z};
    std::vector<std::size_t> color_of;
    for (std::size_t i = 0; i < params.n_objects; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            Box3 box;
            double* c = &box.center.x;
            double* s = &box.size.x;
            for (int a = 0; a < 3; ++a) {
                const double hi = std::min(1.2, room[a] * 0.8);
                const double lo = std::min(0.3, room[a] * 0.4);
                s[a] = lo + rng.next_unit() * (hi - lo);
                c[a] = s[a] / 2 + rng.next_unit() * (room[a] - s[a]);
            }
            bool ok = true;
            for (const auto& other : scene.objects)
                if (iou3d(box, other.box) > params.max_overlap) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            SceneObject obj;
            obj.instance_id = static_cast<std::uint32_t>(i + 1);
            obj.class_id = static_cast<std::uint32_t>(rng.next_below(params.n_classes));
            obj.box = box;
            scene.objects.push_back(obj);
            color_of.push_back(static_cast<std::size_t>(rng.next_below(kPalette.size())));
            placed = true;
        }
        if (!placed)
            throw Error("cannot place object " + std::to_string(i) +
                        " after 1000 rejection attempts");
    }

    Rng prng(derive_seed(params.seed, "scene.points"));
    const std::size_t n_fg = std::min(
        params.n_points,
        static_cast<std::size_t>(std::llround(
            static_cast<double>(params.n_points) * params.foreground_fraction)));
    const std::size_t n_bg = params.n_points - n_fg;

    scene.cloud.count = params.n_points;
    scene.cloud.attr_dim = 6;  // rgb + normal
    scene.cloud.positions.reserve(params.n_points * 3);
    scene.cloud.attributes.reserve(params.n_points * 6);
    auto emit = [&scene](const Vec3& p, const PaletteColor& col, const Vec3& n) {
        scene.cloud.positions.insert(scene.cloud.positions.end(), {p.x, p.y, p.z});
        scene.cloud.attributes.insert(scene.cloud.attributes.end(),
                                      {col.r, col.g, col.b, n.x, n.y, n.z});
    };

    for (std::size_t i = 0; i < n_fg; ++i) {
        const std::size_t obj = static_cast<std::size_t>(prng.next_below(scene.objects.size()));
        Vec3 p, n;
        sample_box_surface(scene.objects[obj].box, prng, p, n);
        emit(p, kPalette[color_of[obj]], n);
    }

    // Background: floor plus four walls, weighted by area. Wall normals
    // point into the room.
    const PaletteColor floor_col{"gray", 0.70, 0.70, 0.70};
    const PaletteColor wall_col{"gray", 0.85, 0.85, 0.85};
    const double floor_area = room[0] * room[1];
    const double wall_x = room[1] * room[2];  // walls at x=0 and x=room_x
    const double wall_y = room[0] * room[2];
    const double total = floor_area + 2 * wall_x + 2 * wall_y;
    for (std::size_t i = 0; i < n_bg; ++i) {
        double u = prng.next_unit() * total;
        const double a = prng.next_unit();
        const double b = prng.next_unit();
        if (u < floor_area) {
            emit({a * room[0], b * room[1], 0.0}, floor_col, {0, 0, 1});
        } else if (u < floor_area + wall_x) {
            emit({0.0, a * room[1], b * room[2]}, wall_col, {1, 0, 0});
        } else if (u < floor_area + 2 * wall_x) {
            emit({room[0], a * room[1], b * room[2]}, wall_col, {-1, 0, 0});
        } else if (u < floor_area + 2 * wall_x + wall_y) {
            emit({a * room[0], 0.0, b * room[2]}, wall_col, {0, 1, 0});
        } else {
            emit({a * room[0], room[1], b * room[2]}, wall_col, {0, -1, 0});
        }
    }

    scene.recompute_bounds();
    return scene;
}

std::vector<QueryRecord> generate_queries(const Scene& scene, const std::string& scene_id,
                                          std::size_t n_queries, std::uint64_t seed) {
    if (scene.objects.empty()) throw ValueError("scene has no objects");
    Rng rng(derive_seed(seed, "queries"));
    std::vector<QueryRecord> records;
    records.reserve(n_queries);
    for (std::size_t q = 0; q < n_queries; ++q) {
        const auto& obj = scene.objects[q % scene.objects.size()];
        // Recover the object color word from a point on its surface.
        const char* color = "gray";
        for (std::size_t i = 0; i < scene.cloud.count; ++i) {
            if (!obj.box.contains(scene.cloud.position(i))) continue;
            const auto attr = scene.cloud.attr_row(i);
            double best = std::numeric_limits<double>::infinity();
            for (const auto& pc : kPalette) {
                const double d = (attr[0] - pc.r) * (attr[0] - pc.r) +
                                 (attr[1] - pc.g) * (attr[1] - pc.g) +
                                 (attr[2] - pc.b) * (attr[2] - pc.b);
                if (d < best) {
                    best = d;
                    color = pc.name;
                }
            }
            break;
        }
        const char* cls = kClassNames[obj.class_id % kClassNames.size()];
        QueryRecord rec;
        rec.scene_id = scene_id;
        switch (rng.next_below(3)) {
            case 0: rec.text = std::string("the ") + color + " " + cls + " in the room"; break;
            case 1: rec.text = std::string("the ") + color + " " + cls; break;
            default: rec.text = std::string("find the ") + color + " " + cls + " near the wall"; break;
        }
        rec.target_instance_ids = {obj.instance_id};
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace ham
