#pragma once

#include <cstddef>
#include <vector>

#include "ham/attention.hpp"
#include "ham/language.hpp"
#include "ham/mat.hpp"
#include "ham/scene.hpp"

namespace ham {

// Cubic partition of the scene bounds into r*r*r regions. The region index
// is ix*r^2 + iy*r + iz; a coordinate exactly on an internal face belongs to
// the lower cell, and the last cell is closed.
struct SpacePartition {
    std::size_t r = 4;
    Vec3 lo, hi;
    std::vector<std::size_t> key_region;       // N entries
    std::vector<std::size_t> proposal_region;  // M entries

    std::size_t region_count() const { return r * r * r; }
};

// Cell index of one point; exposed for direct boundary checks.
std::size_t region_index(const Vec3& p, const Vec3& lo, const Vec3& hi, std::size_t r);

SpacePartition build_partition(const Vec3& bounds_min, const Vec3& bounds_max,
                               std::size_t r, const Mat& key_points,
                               const Mat& proposal_points);

// mask[p][k] true iff proposal p and key k share a region.
KeyMask region_mask(const SpacePartition& partition);

// Proposal-to-proposal visibility for the local branch's self-attention;
// needed so the masked branch matches a physical per-region split.
KeyMask self_region_mask(const SpacePartition& partition);

struct SmgmWeights {
    PlacmWeights global;
    PlacmWeights local;

    static SmgmWeights random(std::size_t c, std::size_t heads, std::size_t depth,
                              Rng& rng);
    void put(TensorFile& file) const;
    static SmgmWeights from_file(const TensorFile& file, std::size_t heads);
};

struct SmgmOutput {
    Mat global_features;  // M x C
    Mat local_features;   // M x C
    Mat fused;            // global + local, elementwise
};

// Global branch: unmasked alignment. Local branch: alignment under the
// region masks. Branches use independent weight sets; fused = sum.
SmgmOutput smgm_forward(const Mat& proposals, const Mat& keys,
                        const LanguageEmbedding& lang, const SmgmWeights& weights,
                        const SpacePartition& partition);

}  // namespace ham
