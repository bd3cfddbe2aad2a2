#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "ham/common.hpp"
#include "ham/language.hpp"
#include "ham/mat.hpp"
#include "ham/oracle.hpp"
#include "ham/rng.hpp"

using namespace ham;

TEST_CASE("tokenize lowercases and splits on punctuation") {
    const Vocabulary v = Vocabulary::builtin();
    const auto ids = tokenize("The CHAIR.", v);
    REQUIRE(ids.size() == 2);
    CHECK(ids[0] == v.id_of("the"));
    CHECK(ids[1] == v.id_of("chair"));
    CHECK(ids[0] != kUnkId);
    CHECK(ids[1] != kUnkId);
}

TEST_CASE("tokenize truncates to the sentence limit") {
    const Vocabulary v = Vocabulary::builtin();
    std::string text;
    for (int i = 0; i < 300; ++i) text += "chair ";
    CHECK(tokenize(text, v).size() == kMaxSentenceLen);
    CHECK(tokenize(text, v, 7).size() == 7);
}

TEST_CASE("tokenize maps unknown words to UNK and rejects empty text") {
    const Vocabulary v = Vocabulary::builtin();
    const auto ids = tokenize("zzyzx", v);
    CHECK(ids == std::vector<std::uint32_t>{kUnkId});
    CHECK_THROWS_AS(tokenize("", v), ValueError);
    CHECK_THROWS_AS(tokenize("...!!!", v), ValueError);
}

TEST_CASE("embed looks rows up and zeroes UNK") {
    const Mat table = Mat::identity(4);
    const Mat out = embed({0, 2, kUnkId}, table);
    REQUIRE(out.rows() == 3);
    CHECK(out.at(0, 0) == 1.0);  // PAD id still resolves to its row
    CHECK(out.at(1, 2) == 1.0);
    for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(2, c) == 0.0);
    CHECK_THROWS_AS(embed({4}, table), ValueError);
}

TEST_CASE("embedding table is seeded and PAD row is zero") {
    const Mat a = make_embedding_table(20, 8, 3);
    const Mat b = make_embedding_table(20, 8, 3);
    const Mat c = make_embedding_table(20, 8, 4);
    CHECK(bit_equal(a, b));
    CHECK(max_abs_diff(a, c) > 0.0);
    for (std::size_t k = 0; k < 8; ++k) CHECK(a.at(kPadId, k) == 0.0);
}

TEST_CASE("gru with all-zero weights stays at the zero state") {
    GruWeights w;
    w.wz = Mat(4, 4);
    w.wr = Mat(4, 4);
    w.wn = Mat(4, 4);
    w.uz = Mat(4, 4);
    w.ur = Mat(4, 4);
    w.un = Mat(4, 4);
    w.biz.assign(4, 0.0);
    w.bir.assign(4, 0.0);
    w.bin_.assign(4, 0.0);
    w.bhz.assign(4, 0.0);
    w.bhr.assign(4, 0.0);
    w.bhn.assign(4, 0.0);

    Rng rng(9);
    const Mat x = Mat::random_normal(5, 4, rng, 1.0);
    const LanguageEmbedding e = gru_encode(x, w, 10);
    for (std::size_t t = 0; t < 10; ++t)
        for (std::size_t c = 0; c < 4; ++c) CHECK(e.word.at(t, c) == 0.0);
    for (std::size_t c = 0; c < 4; ++c) CHECK(e.sentence.at(0, c) == 0.0);
}

TEST_CASE("single-step sentence state equals the first word row exactly") {
    Rng rng(11);
    const GruWeights w = GruWeights::random(6, 6, rng);
    const Mat x = Mat::random_normal(1, 6, rng, 1.0);
    const LanguageEmbedding e = gru_encode(x, w, 8);
    CHECK(e.valid_len == 1);
    for (std::size_t c = 0; c < 6; ++c) CHECK(e.sentence.at(0, c) == e.word.at(0, c));
}

TEST_CASE("gru matches the scalar-loop oracle") {
    Rng rng(13);
    const GruWeights w = GruWeights::random(8, 8, rng);
    const Mat x = Mat::random_normal(5, 8, rng, 1.0);
    std::vector<std::vector<double>> raw(5, std::vector<double>(8));
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 8; ++c) raw[t][c] = x.at(t, c);

    const LanguageEmbedding e = gru_encode(x, w, 12);
    const auto ref = oracle::gru_scalar(raw, w);
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t c = 0; c < 8; ++c)
            CHECK(std::fabs(e.word.at(t, c) - ref[t][c]) < 1e-12);
}

TEST_CASE("word rows beyond the valid length are exactly zero") {
    Rng rng(17);
    const GruWeights w = GruWeights::random(4, 4, rng);
    const Mat x = Mat::random_normal(3, 4, rng, 1.0);
    const LanguageEmbedding e = gru_encode(x, w, 9);
    CHECK(e.valid_len == 3);
    CHECK(e.word.rows() == 9);
    for (std::size_t t = 3; t < 9; ++t)
        for (std::size_t c = 0; c < 4; ++c) CHECK(e.word.at(t, c) == 0.0);
    CHECK_THROWS_AS(gru_encode(Mat::random_normal(10, 4, rng, 1.0), w, 9), SizeError);
}

TEST_CASE("gru weight files round-trip") {
    Rng rng(19);
    const GruWeights w = GruWeights::random(5, 7, rng);
    TensorFile f;
    w.put(f, "gru");
    const GruWeights back = GruWeights::from_file(f, "gru");
    CHECK(bit_equal(w.wn, back.wn));
    CHECK(bit_equal(w.un, back.un));
    CHECK(w.bhn == back.bhn);
}

TEST_CASE("mask_words is bounded, deterministic, and length preserving") {
    const std::vector<std::uint32_t> tokens(10, 42);

    Rng zero(3);
    CHECK(mask_words(tokens, 0.0, zero) == tokens);

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const auto masked = mask_words(tokens, 0.2, rng);
        CHECK(masked.size() == tokens.size());
        std::size_t flips = 0;
        for (std::size_t i = 0; i < masked.size(); ++i) {
            if (masked[i] != tokens[i]) {
                CHECK(masked[i] == kUnkId);
                ++flips;
            }
        }
        CHECK(flips <= 2);  // floor(0.2 * 10)
    }

    Rng a(7), b(7);
    CHECK(mask_words(tokens, 0.5, a) == mask_words(tokens, 0.5, b));

    Rng r(1);
    CHECK_THROWS_AS(mask_words(tokens, -0.1, r), ValueError);
    CHECK_THROWS_AS(mask_words(tokens, 1.5, r), ValueError);
}

TEST_CASE("mask_words reaches every admissible count") {
    const std::vector<std::uint32_t> tokens(10, 42);
    std::set<std::size_t> seen;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed);
        const auto masked = mask_words(tokens, 0.2, rng);
        std::size_t flips = 0;
        for (std::size_t i = 0; i < masked.size(); ++i)
            if (masked[i] != tokens[i]) ++flips;
        seen.insert(flips);
    }
    CHECK(seen == std::set<std::size_t>{0, 1, 2});
}

namespace {

QueryRecord rec(const std::string& scene, const std::string& text,
                std::vector<std::uint32_t> targets) {
    QueryRecord r;
    r.scene_id = scene;
    r.text = text;
    r.target_instance_ids = std::move(targets);
    return r;
}

}  // namespace

TEST_CASE("intra ensemble with a single record is the identity") {
    Rng rng(23);
    const std::vector<QueryRecord> pool{rec("s0", "the red chair", {3})};
    const QueryRecord out = intra_sentence_ensemble(pool, 1, 1, rng);
    CHECK(out.text == "the red chair");
    CHECK(out.target_instance_ids == std::vector<std::uint32_t>{3});
}

TEST_CASE("intra ensemble fuses texts and deduplicates targets") {
    const std::vector<QueryRecord> pool{rec("s0", "the red chair", {3}),
                                        rec("s0", "the blue table", {7, 3})};
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        Rng rng(seed);
        const QueryRecord out = intra_sentence_ensemble(pool, 2, 2, rng);
        CHECK(out.text == "the red chair. the blue table");
        CHECK(out.target_instance_ids == std::vector<std::uint32_t>{3, 7});
    }
}

TEST_CASE("intra ensemble clamps k to the pool and validates input") {
    Rng rng(29);
    const std::vector<QueryRecord> pool{rec("s0", "a", {1}), rec("s0", "b", {2})};
    const QueryRecord out = intra_sentence_ensemble(pool, 5, 6, rng);
    CHECK(out.text == "a. b");

    CHECK_THROWS_AS(intra_sentence_ensemble({}, 1, 2, rng), ValueError);
    CHECK_THROWS_AS(intra_sentence_ensemble(pool, 0, 2, rng), ValueError);
    CHECK_THROWS_AS(intra_sentence_ensemble(pool, 3, 2, rng), ValueError);
    const std::vector<QueryRecord> mixed{rec("s0", "a", {1}), rec("s1", "b", {2})};
    CHECK_THROWS_AS(intra_sentence_ensemble(mixed, 1, 2, rng), ValueError);
}

TEST_CASE("inter ensemble partitions one scene into full groups") {
    std::vector<QueryRecord> pool;
    for (int i = 0; i < 20; ++i)
        pool.push_back(rec("s0", "q" + std::to_string(i), {static_cast<std::uint32_t>(i)}));
    Rng rng(31);
    const auto groups = inter_sentence_ensemble(pool, 8, rng);
    REQUIRE(groups.size() == 3);
    for (const auto& g : groups) CHECK(g.size() == 8);

    // The first 16 records land in order; the short tail is topped up from s0.
    CHECK(groups[0][0].text == "q0");
    CHECK(groups[1][7].text == "q15");
    CHECK(groups[2][0].text == "q16");
    for (const auto& r : groups[2]) CHECK(r.scene_id == "s0");
    for (std::size_t gi = 0; gi < groups.size(); ++gi)
        for (const auto& r : groups[gi]) CHECK(r.group == gi);
}

TEST_CASE("inter ensemble keeps scenes separate") {
    std::vector<QueryRecord> pool;
    for (int i = 0; i < 3; ++i) pool.push_back(rec("a", "a" + std::to_string(i), {1}));
    for (int i = 0; i < 2; ++i) pool.push_back(rec("b", "b" + std::to_string(i), {1}));
    Rng rng(37);
    const auto groups = inter_sentence_ensemble(pool, 2, rng);
    REQUIRE(groups.size() == 3);
    for (const auto& g : groups) {
        CHECK(g.size() == 2);
        CHECK(g[0].scene_id == g[1].scene_id);
    }
    CHECK(groups[0][0].scene_id == "a");
    CHECK(groups[2][0].scene_id == "b");
    CHECK(groups[2][1].group == 2);

    CHECK_THROWS_AS(inter_sentence_ensemble(pool, 0, rng), ValueError);
}

TEST_CASE("group size one is a per-record wrap") {
    const std::vector<QueryRecord> pool{rec("s", "x", {1}), rec("s", "y", {2})};
    Rng rng(41);
    const auto groups = inter_sentence_ensemble(pool, 1, rng);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0][0].text == "x");
    CHECK(groups[1][0].text == "y");
}

TEST_CASE("vocabulary files load by line number and reject duplicates") {
    const std::string path = "vocab_test.txt";
    {
        std::ofstream out(path);
        out << "<pad>\n<unk>\nalpha\nbeta\n";
    }
    const Vocabulary v = Vocabulary::from_file(path);
    CHECK(v.size() == 4);
    CHECK(v.id_of("beta") == 3);
    CHECK(v.id_of("missing") == kUnkId);
    CHECK(v.word_of(2) == "alpha");
    CHECK_THROWS_AS(v.word_of(4), ValueError);

    {
        std::ofstream out(path);
        out << "<pad>\n<unk>\ndup\ndup\n";
    }
    CHECK_THROWS_AS(Vocabulary::from_file(path), ValueError);
    {
        std::ofstream out(path);
        out << "<pad>\n";
    }
    CHECK_THROWS_AS(Vocabulary::from_file(path), FormatError);
    std::remove(path.c_str());

    Vocabulary b = Vocabulary::builtin();
    CHECK_THROWS_AS(b.add("chair"), ValueError);
}
