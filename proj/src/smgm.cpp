#include "ham/smgm.hpp"

#include <algorithm>
#include <cmath>

#include "ham/common.hpp"

namespace ham {

namespace {

std::size_t axis_cell(double v, double lo, double edge, std::size_t r) {
    // ceil((v - lo) / edge) - 1 puts exact internal-face coordinates into
    // the lower cell; clamping closes the outer faces.
    const double t = std::ceil((v - lo) / edge) - 1.0;
    if (t < 0.0) return 0;
    const auto cell = static_cast<std::size_t>(t);
    return std::min(cell, r - 1);
}

}  // namespace

std::size_t region_index(const Vec3& p, const Vec3& lo, const Vec3& hi, std::size_t r) {
    const double ex = (hi.x - lo.x) / static_cast<double>(r);
    const double ey = (hi.y - lo.y) / static_cast<double>(r);
    const double ez = (hi.z - lo.z) / static_cast<double>(r);
    const std::size_t ix = axis_cell(p.x, lo.x, ex, r);
    const std::size_t iy = axis_cell(p.y, lo.y, ey, r);
    const std::size_t iz = axis_cell(p.z, lo.z, ez, r);
    return ix * r * r + iy * r + iz;
}

SpacePartition build_partition(const Vec3& bounds_min, const Vec3& bounds_max,
                               std::size_t r, const Mat& key_points,
                               const Mat& proposal_points) {
    if (r < 1) throw ValueError("resolution must be at least 1");
    if (!(bounds_max.x > bounds_min.x) || !(bounds_max.y > bounds_min.y) ||
        !(bounds_max.z > bounds_min.z))
        throw ValueError("degenerate bounds: every axis needs positive extent");
    if (key_points.cols() != 3 || proposal_points.cols() != 3)
        throw ShapeError("points must be n x 3");

    SpacePartition part;
    part.r = r;
    part.lo = bounds_min;
    part.hi = bounds_max;
    auto assign = [&part, r](const Mat& pts, std::vector<std::size_t>& out) {
        out.resize(pts.rows());
        for (std::size_t i = 0; i < pts.rows(); ++i)
            out[i] = region_index({pts.at(i, 0), pts.at(i, 1), pts.at(i, 2)},
                                  part.lo, part.hi, r);
    };
    assign(key_points, part.key_region);
    assign(proposal_points, part.proposal_region);
    return part;
}

KeyMask region_mask(const SpacePartition& partition) {
    const std::size_t m = partition.proposal_region.size();
    const std::size_t n = partition.key_region.size();
    KeyMask mask(m, n, false);
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t k = 0; k < n; ++k)
            mask.set(p, k, partition.proposal_region[p] == partition.key_region[k]);
    return mask;
}

KeyMask self_region_mask(const SpacePartition& partition) {
    const std::size_t m = partition.proposal_region.size();
    KeyMask mask(m, m, false);
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < m; ++q)
            mask.set(p, q, partition.proposal_region[p] == partition.proposal_region[q]);
    return mask;
}

SmgmWeights SmgmWeights::random(std::size_t c, std::size_t heads, std::size_t depth,
                                Rng& rng) {
    SmgmWeights w;
    w.global = PlacmWeights::random(c, heads, depth, rng);
    w.local = PlacmWeights::random(c, heads, depth, rng);
    return w;
}

void SmgmWeights::put(TensorFile& file) const {
    global.put(file, "placm.global");
    local.put(file, "placm.local");
}

SmgmWeights SmgmWeights::from_file(const TensorFile& file, std::size_t heads) {
    SmgmWeights w;
    w.global = PlacmWeights::from_file(file, "placm.global", heads);
    w.local = PlacmWeights::from_file(file, "placm.local", heads);
    return w;
}

SmgmOutput smgm_forward(const Mat& proposals, const Mat& keys,
                        const LanguageEmbedding& lang, const SmgmWeights& weights,
                        const SpacePartition& partition) {
    if (partition.proposal_region.size() != proposals.rows() ||
        partition.key_region.size() != keys.rows())
        throw ShapeError("partition does not cover the given points");

    const Mat words =
        lang.valid_len == lang.word.rows()
            ? lang.word
            : slice_rows(lang.word, 0, lang.valid_len);

    SmgmOutput out;
    out.global_features =
        placm_block(proposals, keys, words, lang.sentence, weights.global);
    const KeyMask key_mask = region_mask(partition);
    const KeyMask self_mask = self_region_mask(partition);
    out.local_features = placm_block(proposals, keys, words, lang.sentence,
                                     weights.local, &key_mask, &self_mask);
    out.fused = add(out.global_features, out.local_features);
    return out;
}

}  // namespace ham
