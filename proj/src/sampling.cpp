#include "ham/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <span>
#include <string>

#include "ham/common.hpp"
#include "ham/rng.hpp"

namespace ham {

namespace {

// Greedy farthest-point order of length n over row vectors of `feat`
// (L rows, width dim). Ties in the argmax break toward the lowest id.
std::vector<std::size_t> fps_order(std::span<const double> feat, std::size_t l,
                                   std::size_t dim, std::size_t n,
                                   std::size_t start_id) {
    std::vector<std::size_t> order;
    order.reserve(n);
    if (n == 0) return order;
    std::vector<double> min_d2(l, std::numeric_limits<double>::infinity());
    std::size_t current = start_id;
    order.push_back(current);
    for (std::size_t step = 1; step < n; ++step) {
        const double* cur = feat.data() + current * dim;
        std::size_t best = l;
        double best_d2 = -1.0;
        for (std::size_t i = 0; i < l; ++i) {
            const double* p = feat.data() + i * dim;
            double d2 = 0.0;
            for (std::size_t k = 0; k < dim; ++k) {
                const double d = p[k] - cur[k];
                d2 += d * d;
            }
            if (d2 < min_d2[i]) min_d2[i] = d2;
            if (min_d2[i] > best_d2 && min_d2[i] > 0.0) {
                best_d2 = min_d2[i];
                best = i;
            }
        }
        // All remaining distances are zero: every point coincides with a
        // selected one. Fall back to the lowest unselected id.
        if (best == l) {
            std::vector<char> taken(l, 0);
            for (std::size_t id : order) taken[id] = 1;
            for (std::size_t i = 0; i < l; ++i)
                if (!taken[i]) {
                    best = i;
                    break;
                }
        }
        min_d2[best] = 0.0;
        order.push_back(best);
        current = best;
    }
    return order;
}

void check_request(const PointCloud& cloud, std::size_t n, std::size_t start_id) {
    if (n > cloud.count)
        throw SizeError("requested " + std::to_string(n) + " samples from " +
                        std::to_string(cloud.count) + " points");
    if (start_id >= cloud.count) throw ValueError("start_id out of range");
}

std::vector<double> weighted_features(const PointCloud& cloud,
                                      const std::vector<double>& channel_weights) {
    const std::size_t dim = 3 + cloud.attr_dim;
    std::vector<double> w = channel_weights;
    if (w.empty()) w.assign(dim, 1.0);
    if (w.size() != dim)
        throw ShapeError("channel_weights must have " + std::to_string(dim) +
                         " entries, got " + std::to_string(w.size()));
    std::vector<double> feat(cloud.count * dim);
    for (std::size_t i = 0; i < cloud.count; ++i) {
        double* row = feat.data() + i * dim;
        const Vec3 p = cloud.position(i);
        row[0] = w[0] * p.x;
        row[1] = w[1] * p.y;
        row[2] = w[2] * p.z;
        const auto attrs = cloud.attr_row(i);
        for (std::size_t k = 0; k < cloud.attr_dim; ++k)
            row[3 + k] = w[3 + k] * attrs[k];
    }
    return feat;
}

}  // namespace

SampleResult dfps(const PointCloud& cloud, std::size_t n, std::size_t start_id) {
    check_request(cloud, n, start_id);
    return {fps_order(cloud.positions, cloud.count, 3, n, start_id), Strategy::DFPS};
}

SampleResult ffps(const PointCloud& cloud, std::size_t n, std::size_t start_id,
                  const std::vector<double>& channel_weights) {
    check_request(cloud, n, start_id);
    const auto feat = weighted_features(cloud, channel_weights);
    return {fps_order(feat, cloud.count, 3 + cloud.attr_dim, n, start_id),
            Strategy::FFPS};
}

SampleResult fusion_sampling(const PointCloud& cloud, std::size_t n,
                             std::size_t start_id,
                             const std::vector<double>& channel_weights) {
    if (n % 2 != 0) throw SizeError("fusion sampling needs an even n");
    check_request(cloud, n, start_id);
    SampleResult out = dfps(cloud, n / 2, start_id);
    const SampleResult f = ffps(cloud, n / 2, start_id, channel_weights);
    out.indices.insert(out.indices.end(), f.indices.begin(), f.indices.end());
    out.strategy = Strategy::FS;
    return out;
}

std::vector<std::size_t> interleave_unique(const std::vector<std::size_t>& d,
                                           const std::vector<std::size_t>& f,
                                           std::size_t n) {
    std::vector<std::size_t> out;
    out.reserve(n);
    std::vector<char> taken;
    auto is_taken = [&taken](std::size_t id) {
        return id < taken.size() && taken[id];
    };
    auto mark = [&taken](std::size_t id) {
        if (id >= taken.size()) taken.resize(id + 1, 0);
        taken[id] = 1;
    };
    std::size_t dp = 0, fp = 0;
    bool d_turn = true;
    while (out.size() < n) {
        const std::vector<std::size_t>& q = d_turn ? d : f;
        std::size_t& p = d_turn ? dp : fp;
        while (p < q.size() && is_taken(q[p])) ++p;
        if (p < q.size()) {
            mark(q[p]);
            out.push_back(q[p]);
            ++p;
        } else if ((d_turn ? fp : dp) >= (d_turn ? f : d).size()) {
            throw SizeError("queues exhausted before collecting " +
                            std::to_string(n) + " unique ids");
        }
        d_turn = !d_turn;
    }
    return out;
}

SampleResult concentration_sampling(const PointCloud& cloud, std::size_t n,
                                    std::size_t start_id,
                                    const std::vector<double>& channel_weights) {
    check_request(cloud, n, start_id);
    // Each queue consumes at most n takes plus n skips, so 2n per order is
    // always enough; capped at L where the order enumerates every point.
    const std::size_t order_len = std::min(cloud.count, 2 * n);
    const auto d = fps_order(cloud.positions, cloud.count, 3, order_len, start_id);
    const auto feat = weighted_features(cloud, channel_weights);
    const auto f = fps_order(feat, cloud.count, 3 + cloud.attr_dim, order_len, start_id);
    return {interleave_unique(d, f, n), Strategy::CS};
}

KeyPointSet build_key_point_set(const Scene& scene,
                                const std::vector<std::size_t>& sample_ids,
                                std::size_t c, std::uint64_t seed) {
    if (sample_ids.empty()) throw SizeError("need at least one sampled point");
    if (c == 0) throw ValueError("feature width must be positive");
    const std::size_t n = sample_ids.size();
    const std::size_t raw_dim = 3 + scene.cloud.attr_dim + 1;

    Mat raw(n, c);
    Mat points(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t id = sample_ids[i];
        if (id >= scene.cloud.count) throw ValueError("sample id out of range");
        const Vec3 p = scene.cloud.position(id);
        points.at(i, 0) = p.x;
        points.at(i, 1) = p.y;
        points.at(i, 2) = p.z;
        double nearest = 0.0;
        if (!scene.objects.empty()) {
            nearest = std::numeric_limits<double>::infinity();
            for (const auto& o : scene.objects) {
                const double dx = p.x - o.box.center.x;
                const double dy = p.y - o.box.center.y;
                const double dz = p.z - o.box.center.z;
                nearest = std::min(nearest, std::sqrt(dx * dx + dy * dy + dz * dz));
            }
        }
        const auto attrs = scene.cloud.attr_row(id);
        auto raw_at = [&](std::size_t k) {
            if (k < 3) return k == 0 ? p.x : (k == 1 ? p.y : p.z);
            if (k < 3 + scene.cloud.attr_dim) return attrs[k - 3];
            return nearest;
        };
        for (std::size_t k = 0; k < c; ++k) raw.at(i, k) = raw_at(k % raw_dim);
    }

    Rng rng(derive_seed(seed, "keys.feature_map"));
    const Mat map = Mat::random_normal(c, c, rng, 1.0 / std::sqrt(static_cast<double>(c)));

    KeyPointSet keys;
    keys.points = std::move(points);
    keys.features = matmul(raw, map);
    keys.source_ids = sample_ids;
    return keys;
}

ProposalSet select_proposals(const KeyPointSet& keys, std::size_t m, double box_edge,
                             const std::vector<Box3>* detector_boxes) {
    const std::size_t n = keys.count();
    if (m > n)
        throw SizeError("requested " + std::to_string(m) + " proposals from " +
                        std::to_string(n) + " keys");
    if (m == 0) throw ValueError("need at least one proposal");
    if (box_edge <= 0.0) throw ValueError("box edge must be positive");
    if (detector_boxes && detector_boxes->size() != m)
        throw ShapeError("detector boxes must supply exactly one box per proposal");

    Vec3 centroid{0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
        centroid.x += keys.points.at(i, 0);
        centroid.y += keys.points.at(i, 1);
        centroid.z += keys.points.at(i, 2);
    }
    centroid.x /= static_cast<double>(n);
    centroid.y /= static_cast<double>(n);
    centroid.z /= static_cast<double>(n);

    std::size_t start = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = keys.points.at(i, 0) - centroid.x;
        const double dy = keys.points.at(i, 1) - centroid.y;
        const double dz = keys.points.at(i, 2) - centroid.z;
        const double d2 = dx * dx + dy * dy + dz * dz;
        if (d2 < best) {
            best = d2;
            start = i;
        }
    }

    const auto order = fps_order(keys.points.data(), n, 3, m, start);

    ProposalSet props;
    props.points = Mat(m, 3);
    props.features = Mat(m, keys.features.cols());
    props.boxes.reserve(m);
    props.key_indices = order;
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t k = order[i];
        for (std::size_t a = 0; a < 3; ++a) props.points.at(i, a) = keys.points.at(k, a);
        for (std::size_t a = 0; a < keys.features.cols(); ++a)
            props.features.at(i, a) = keys.features.at(k, a);
        if (detector_boxes) {
            props.boxes.push_back((*detector_boxes)[i]);
        } else {
            Box3 box;
            box.center = {props.points.at(i, 0), props.points.at(i, 1),
                          props.points.at(i, 2)};
            box.size = {box_edge, box_edge, box_edge};
            props.boxes.push_back(box);
        }
    }
    return props;
}

void save_indices(const std::vector<std::size_t>& ids, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write: " + path);
    const auto count = static_cast<std::uint32_t>(ids.size());
    out.write(reinterpret_cast<const char*>(&count), 4);
    for (std::size_t id : ids) {
        const auto v = static_cast<std::uint32_t>(id);
        out.write(reinterpret_cast<const char*>(&v), 4);
    }
    if (!out) throw Error("write failed: " + path);
}

std::vector<std::size_t> load_indices(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::uint32_t count = 0;
    if (!in.read(reinterpret_cast<char*>(&count), 4))
        throw FormatError("truncated payload reading count", 0);
    std::vector<std::size_t> ids(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t v = 0;
        if (!in.read(reinterpret_cast<char*>(&v), 4))
            throw FormatError("truncated payload reading id", 4 + 4 * i);
        ids[i] = v;
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("trailing bytes after the id list",
                          4 + 4 * static_cast<std::size_t>(count));
    return ids;
}

}  // namespace ham
