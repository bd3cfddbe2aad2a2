#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ham/mat.hpp"
#include "ham/rng.hpp"
#include "ham/tensor_io.hpp"

namespace ham {

// Boolean visibility matrix: rows = queries, cols = keys, true = visible.
struct KeyMask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<char> visible;

    KeyMask() = default;
    KeyMask(std::size_t r, std::size_t c, bool value = true)
        : rows(r), cols(c), visible(r * c, value ? 1 : 0) {}

    bool at(std::size_t r, std::size_t c) const { return visible[r * cols + c] != 0; }
    void set(std::size_t r, std::size_t c, bool value) {
        visible[r * cols + c] = value ? 1 : 0;
    }
};

// Mask file: u32 rows, u32 cols, then each row bit-packed LSB-first and
// padded to a byte boundary. Little-endian.
void save_mask(const KeyMask& mask, const std::string& path);
KeyMask load_mask(const std::string& path);

// One attention sublayer-block: projections, FFN (C -> 4C -> C, rectified
// linear), and the two post-norm layer norms.
struct MhaWeights {
    std::size_t heads = 8;
    Mat wq, wk, wv, wo;  // C x C
    std::vector<double> bq, bk, bv, bo;
    Mat ffn_w1, ffn_w2;  // C x 4C, 4C x C
    std::vector<double> ffn_b1, ffn_b2;
    std::vector<double> ln1_gain, ln1_bias, ln2_gain, ln2_bias;

    std::size_t width() const { return wq.rows(); }
    std::size_t head_dim() const { return width() / heads; }

    static MhaWeights random(std::size_t c, std::size_t heads, Rng& rng);
    void put(TensorFile& file, const std::string& prefix) const;
    static MhaWeights from_file(const TensorFile& file, const std::string& prefix,
                                std::size_t heads);
};

// Per-head post-softmax attention weights, appended by each block that is
// handed a trace.
struct AttnTrace {
    std::vector<Mat> head_weights;
};

// Self-attention block: H-head scaled dot-product attention (scores divided
// by sqrt(C/H)), residual + layer norm, FFN, residual + layer norm. The
// optional mask hides query-to-query positions the same way mhca hides keys.
Mat mhsa(const Mat& x, const MhaWeights& w, const KeyMask* mask = nullptr,
         AttnTrace* trace = nullptr);

// Cross-attention block over keys/values y with the same block structure.
// Mask entries that are false contribute exactly zero attention weight; a row
// with no visible key is an error.
Mat mhca(const Mat& x, const Mat& y, const MhaWeights& w,
         const KeyMask* mask = nullptr, AttnTrace* trace = nullptr);

struct PosEmbedWeights {
    Mat w;  // 3 x C for keys, 9 x C for proposals (xyz + box center + size)
    std::vector<double> b;

    static PosEmbedWeights random(std::size_t in_dim, std::size_t c, Rng& rng);
    void put(TensorFile& file, const std::string& prefix) const;
    static PosEmbedWeights from_file(const TensorFile& file, const std::string& prefix);
};

// Linear positional embedding for point rows; callers add it to features.
// box_info (n x 6, center + size) widens the input to 9 channels.
Mat positional_embed_points(const Mat& points, const Mat* box_info,
                            const PosEmbedWeights& w);

// Interleaved sine/cosine table with base 10000: channel 2i of position p is
// sin(p / 10000^(2i/C)) and channel 2i+1 the matching cosine.
Mat positional_embed_text(std::size_t length, std::size_t c);

// Weights of one alignment stage pair: a self block feeding a cross block,
// first against [keys || words], then against [keys || sentence].
struct PlacmStage {
    MhaWeights self_w;
    MhaWeights cross_w;
};

struct PlacmWeights {
    std::vector<PlacmStage> word_stages;      // one per layer
    std::vector<PlacmStage> sentence_stages;  // one per layer

    std::size_t depth() const { return word_stages.size(); }

    static PlacmWeights random(std::size_t c, std::size_t heads, std::size_t depth,
                               Rng& rng);
    void put(TensorFile& file, const std::string& prefix) const;
    static PlacmWeights from_file(const TensorFile& file, const std::string& prefix,
                                  std::size_t heads);
};

// Word-level then sentence-level alignment of proposal features q.
// key_mask (q rows x key rows) governs only the key columns of the
// concatenated attention targets; word and sentence columns stay visible to
// every query. self_mask (q rows x q rows) restricts the self-attention
// blocks; both default to fully visible.
Mat placm_block(const Mat& q, const Mat& keys, const Mat& words, const Mat& sentence,
                const PlacmWeights& w, const KeyMask* key_mask = nullptr,
                const KeyMask* self_mask = nullptr, AttnTrace* trace = nullptr);

}  // namespace ham
