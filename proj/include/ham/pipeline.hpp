#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ham/attention.hpp"
#include "ham/grounding.hpp"
#include "ham/language.hpp"
#include "ham/sampling.hpp"
#include "ham/scene.hpp"
#include "ham/smgm.hpp"
#include "ham/tensor_io.hpp"

namespace ham {

struct PipelineConfig {
    std::size_t l = 50000;  // input points
    std::size_t n = 1024;   // key points
    std::size_t m = 512;    // proposal points
    std::size_t c = 288;    // model width
    std::size_t t = 200;    // max sentence length
    std::size_t r = 4;      // partition resolution
    std::size_t heads = 8;
    std::size_t placm_depth = 1;
    double mask_ratio = 0.2;
    std::uint64_t seed = 0;

    void validate() const;  // m <= n <= l, c divisible by heads, r >= 1

    std::string to_json() const;
    static PipelineConfig from_json(const std::string& text);
    static PipelineConfig load(const std::string& path);
};

// Every weight tensor of the forward pipeline. Random initialization derives
// one RNG stream per component from (seed, component name), so adding a
// component leaves the others untouched.
struct HamWeights {
    Mat embedding;  // vocab x C
    GruWeights gru;
    PosEmbedWeights pos_key;       // 3 -> C
    PosEmbedWeights pos_proposal;  // 9 -> C
    SmgmWeights smgm;
    MatchMlpWeights match;
    std::vector<double> objectness_w;  // C
    double objectness_b = 0.0;
    Mat cls_w;  // C x K
    std::vector<double> cls_b;

    static HamWeights random(const PipelineConfig& config, std::size_t vocab_size,
                             std::size_t n_classes);
    void save(const std::string& path) const;
    static HamWeights load(const std::string& path, const PipelineConfig& config);
};

// Language-independent per-scene stage: concentration-sampled keys with
// positional-embedded features, proposals, partition, and objectness.
struct SceneForward {
    KeyPointSet keys;
    ProposalSet proposals;
    SpacePartition partition;
    std::vector<double> objectness;  // sigmoid of a linear head, per proposal
};

SceneForward scene_forward(const Scene& scene, const PipelineConfig& config,
                           const HamWeights& weights);

struct QueryForward {
    MatchResult match;
    std::optional<LossReport> loss;  // present when the query carries targets
};

// tokenize -> embed (+ sinusoid position rows) -> GRU -> SMGM -> matching.
// Losses are reported when the target instance exists in the scene.
QueryForward forward_query(const Scene& scene, const SceneForward& sf,
                           const QueryRecord& query, const PipelineConfig& config,
                           const HamWeights& weights, const Vocabulary& vocab);

struct EvalReport {
    double acc_at_025 = 0.0;
    double acc_at_05 = 0.0;
    std::size_t n_queries = 0;
    std::vector<double> per_query_iou;
};

EvalReport evaluate_queries(const Scene& scene, const std::vector<QueryRecord>& queries,
                            const PipelineConfig& config, const HamWeights& weights,
                            const Vocabulary& vocab);

}  // namespace ham
