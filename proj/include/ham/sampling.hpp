#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ham/mat.hpp"
#include "ham/scene.hpp"

namespace ham {

enum class Strategy { DFPS, FFPS, FS, CS };

struct SampleResult {
    std::vector<std::size_t> indices;
    Strategy strategy = Strategy::DFPS;
};

// Greedy farthest-point sampling over Euclidean distance on positions.
// Ties break toward the lowest original id. n > L is a size error.
SampleResult dfps(const PointCloud& cloud, std::size_t n, std::size_t start_id = 0);

// Same greedy procedure with distance over the weighted concatenation
// [positions || attributes]. channel_weights must have 3 + attr_dim entries;
// empty means all ones. Zero weight on the attribute channels reduces to dfps.
SampleResult ffps(const PointCloud& cloud, std::size_t n, std::size_t start_id = 0,
                  const std::vector<double>& channel_weights = {});

// Concatenation of dfps(n/2) and ffps(n/2), in that order. Duplicates are
// retained; n must be even.
SampleResult fusion_sampling(const PointCloud& cloud, std::size_t n,
                             std::size_t start_id = 0,
                             const std::vector<double>& channel_weights = {});

// Interleaves the two orders starting with `d`, skipping ids already taken
// and falling through to the other queue when one is exhausted, until n
// unique ids are collected.
std::vector<std::size_t> interleave_unique(const std::vector<std::size_t>& d,
                                           const std::vector<std::size_t>& f,
                                           std::size_t n);

// Dedup-interleaved combination of the D-FPS and F-FPS orders via a point-id
// queue; returns exactly n unique indices.
SampleResult concentration_sampling(const PointCloud& cloud, std::size_t n,
                                    std::size_t start_id = 0,
                                    const std::vector<double>& channel_weights = {});

struct KeyPointSet {
    Mat points;                           // N x 3
    Mat features;                         // N x C
    std::vector<std::size_t> source_ids;  // N ids into the source cloud

    std::size_t count() const { return source_ids.size(); }
};

struct ProposalSet {
    Mat points;    // M x 3
    Mat features;  // M x C
    std::vector<Box3> boxes;
    std::vector<std::size_t> key_indices;  // M ids into the KeyPointSet

    std::size_t count() const { return key_indices.size(); }
};

// Builds key-point features from sampled cloud points. Each raw row is
// [position, attributes, distance to the nearest object center], tiled to
// width C and passed through one fixed random linear map derived from seed.
KeyPointSet build_key_point_set(const Scene& scene,
                                const std::vector<std::size_t>& sample_ids,
                                std::size_t c, std::uint64_t seed);

// Proposal selection stand-in for a learned picker: D-FPS over the key-point
// positions starting from the key nearest the key-set centroid. Boxes are
// cubes of edge `box_edge` centered on each proposal point unless
// detector_boxes supplies one per proposal.
ProposalSet select_proposals(const KeyPointSet& keys, std::size_t m,
                             double box_edge = 0.5,
                             const std::vector<Box3>* detector_boxes = nullptr);

// Index list file: u32 count then u32 ids, little-endian.
void save_indices(const std::vector<std::size_t>& ids, const std::string& path);
std::vector<std::size_t> load_indices(const std::string& path);

}  // namespace ham
