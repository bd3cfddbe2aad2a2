#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ham/mat.hpp"
#include "ham/rng.hpp"
#include "ham/scene.hpp"
#include "ham/tensor_io.hpp"

namespace ham {

inline constexpr std::uint32_t kPadId = 0;
inline constexpr std::uint32_t kUnkId = 1;
inline constexpr std::size_t kMaxSentenceLen = 200;

// Token table. Id 0 is PAD, id 1 is UNK; real words start at 2.
class Vocabulary {
public:
    static Vocabulary builtin();
    // UTF-8, one token per line, line number = id. Lines 0 and 1 name the
    // PAD and UNK slots.
    static Vocabulary from_file(const std::string& path);

    std::uint32_t id_of(const std::string& word) const;  // UNK when missing
    const std::string& word_of(std::uint32_t id) const;
    std::size_t size() const { return words_.size(); }

    void add(const std::string& word);

private:
    Vocabulary();
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// Lowercases, splits on non-alphanumerics, maps through the vocabulary and
// truncates to t_max. Empty result is an error.
std::vector<std::uint32_t> tokenize(const std::string& text, const Vocabulary& vocab,
                                    std::size_t t_max = kMaxSentenceLen);

// Row lookup into the embedding table; the UNK id yields a zero row.
Mat embed(const std::vector<std::uint32_t>& tokens, const Mat& table);

// Seeded N(0, 1/sqrt(c)) table with the PAD row zeroed.
Mat make_embedding_table(std::size_t vocab_size, std::size_t c, std::uint64_t seed);

struct GruWeights {
    // Input path (c_in x c) and hidden path (c x c) per gate, with separate
    // input/hidden biases.
    Mat wz, wr, wn;
    Mat uz, ur, un;
    std::vector<double> biz, bir, bin_;
    std::vector<double> bhz, bhr, bhn;

    std::size_t input_dim() const { return wz.rows(); }
    std::size_t hidden_dim() const { return wz.cols(); }

    static GruWeights random(std::size_t c_in, std::size_t c, Rng& rng);
    void put(TensorFile& file, const std::string& prefix) const;
    static GruWeights from_file(const TensorFile& file, const std::string& prefix);
};

struct LanguageEmbedding {
    Mat word;      // t_max x c, rows at and beyond valid_len exactly zero
    Mat sentence;  // 1 x c, hidden state after the last valid step
    std::size_t valid_len = 0;
};

// GRU over the rows of `vectors` (valid_len x c_in). Word row t is the hidden
// state after step t; the sentence row is the final hidden state.
LanguageEmbedding gru_encode(const Mat& vectors, const GruWeights& w,
                             std::size_t t_max = kMaxSentenceLen);

// Replaces k distinct positions with UNK, k drawn uniformly from
// [0, floor(ratio_max * len)].
std::vector<std::uint32_t> mask_words(const std::vector<std::uint32_t>& tokens,
                                      double ratio_max, Rng& rng);

// Fuses k records (k drawn from [lo, hi], clamped to the pool size) of one
// scene into a single record; texts joined by ". ", targets deduplicated in
// concatenation order.
QueryRecord intra_sentence_ensemble(const std::vector<QueryRecord>& records,
                                    std::size_t lo, std::size_t hi, Rng& rng);

// Partitions per-scene record pools into groups of exactly group_size,
// topping up short final groups by sampling that scene's pool with
// replacement. Each emitted record carries its group index.
std::vector<std::vector<QueryRecord>> inter_sentence_ensemble(
    const std::vector<QueryRecord>& records, std::size_t group_size, Rng& rng);

}  // namespace ham
