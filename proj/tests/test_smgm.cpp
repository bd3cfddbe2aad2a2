#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstddef>
#include <vector>

#include "ham/common.hpp"
#include "ham/mat.hpp"
#include "ham/oracle.hpp"
#include "ham/rng.hpp"
#include "ham/smgm.hpp"

using namespace ham;

namespace {

LanguageEmbedding tiny_lang(std::size_t c, std::size_t words, std::uint64_t seed) {
    Rng rng(seed);
    LanguageEmbedding lang;
    lang.word = Mat::random_normal(words, c, rng, 1.0);
    lang.sentence = Mat::random_normal(1, c, rng, 1.0);
    lang.valid_len = words;
    return lang;
}

SpacePartition random_partition(std::size_t r, std::size_t n, std::size_t m,
                                std::uint64_t seed, Mat* keys_out, Mat* props_out) {
    Rng rng(seed);
    Mat keys(n, 3), props(m, 3);
    for (std::size_t i = 0; i < n; ++i)
        for (int a = 0; a < 3; ++a) keys.at(i, a) = rng.next_unit() * 4.0;
    for (std::size_t i = 0; i < m; ++i)
        for (int a = 0; a < 3; ++a) props.at(i, a) = rng.next_unit() * 4.0;
    if (keys_out) *keys_out = keys;
    if (props_out) *props_out = props;
    return build_partition({0, 0, 0}, {4, 4, 4}, r, keys, props);
}

}  // namespace

TEST_CASE("region_index follows the fixed-grid arithmetic") {
    const Vec3 lo{0, 0, 0}, hi{4, 4, 4};
    CHECK(region_index({3.5, 0.2, 1.1}, lo, hi, 4) == 3 * 16 + 0 * 4 + 1);
    CHECK(region_index({0, 0, 0}, lo, hi, 4) == 0);
    CHECK(region_index({4, 4, 4}, lo, hi, 4) == 63);
    CHECK(region_index({2.2, 3.3, 0.1}, lo, hi, 1) == 0);
}

TEST_CASE("an internal face point belongs to the lower cell") {
    const Vec3 lo{0, 0, 0}, hi{4, 4, 4};
    CHECK(region_index({1.0, 0.5, 0.5}, lo, hi, 4) == 0);
    CHECK(region_index({1.0 + 1e-12, 0.5, 0.5}, lo, hi, 4) == 16);
    CHECK(region_index({0.5, 2.0, 0.5}, lo, hi, 4) == 4);
    CHECK(region_index({0.5, 0.5, 3.0}, lo, hi, 4) == 2);
}

TEST_CASE("build_partition validates its input") {
    const Mat keys(4, 3), props(2, 3);
    CHECK_THROWS_AS(build_partition({0, 0, 0}, {4, 4, 4}, 0, keys, props), ValueError);
    CHECK_THROWS_AS(build_partition({0, 0, 0}, {0, 4, 4}, 2, keys, props), ValueError);
    CHECK_THROWS_AS(build_partition({1, 1, 1}, {1, 2, 2}, 2, keys, props), ValueError);
    const Mat bad(4, 2);
    CHECK_THROWS_AS(build_partition({0, 0, 0}, {4, 4, 4}, 2, bad, props), ShapeError);
}

TEST_CASE("every point receives exactly one region") {
    const SpacePartition p = random_partition(3, 40, 12, 5, nullptr, nullptr);
    CHECK(p.key_region.size() == 40);
    CHECK(p.proposal_region.size() == 12);
    CHECK(p.region_count() == 27);
    for (std::size_t r : p.key_region) CHECK(r < 27);
    for (std::size_t r : p.proposal_region) CHECK(r < 27);
}

TEST_CASE("region mask equals the pairwise equality oracle") {
    const SpacePartition p = random_partition(4, 30, 10, 7, nullptr, nullptr);
    const KeyMask mask = region_mask(p);
    REQUIRE(mask.rows == 10);
    REQUIRE(mask.cols == 30);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 30; ++j)
            CHECK(mask.at(i, j) == (p.proposal_region[i] == p.key_region[j]));

    const KeyMask self = self_region_mask(p);
    REQUIRE(self.rows == 10);
    REQUIRE(self.cols == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(self.at(i, i));
        for (std::size_t j = 0; j < 10; ++j)
            CHECK(self.at(i, j) == (p.proposal_region[i] == p.proposal_region[j]));
    }
}

TEST_CASE("r equal to one makes every mask entry true") {
    const SpacePartition p = random_partition(1, 20, 8, 11, nullptr, nullptr);
    const KeyMask mask = region_mask(p);
    for (std::size_t i = 0; i < mask.rows; ++i)
        for (std::size_t j = 0; j < mask.cols; ++j) CHECK(mask.at(i, j));
}

TEST_CASE("moving a point within its cell leaves the mask unchanged") {
    Mat keys(3, 3), props(2, 3);
    keys.at(0, 0) = 0.1; keys.at(0, 1) = 0.1; keys.at(0, 2) = 0.1;
    keys.at(1, 0) = 3.9; keys.at(1, 1) = 3.9; keys.at(1, 2) = 3.9;
    keys.at(2, 0) = 0.6; keys.at(2, 1) = 0.6; keys.at(2, 2) = 0.6;
    props.at(0, 0) = 0.5; props.at(0, 1) = 0.5; props.at(0, 2) = 0.5;
    props.at(1, 0) = 3.5; props.at(1, 1) = 3.5; props.at(1, 2) = 3.5;

    const auto base = region_mask(build_partition({0, 0, 0}, {4, 4, 4}, 2, keys, props));
    props.at(0, 0) = 1.9;  // still inside the low cell when r == 2
    const auto moved =
        region_mask(build_partition({0, 0, 0}, {4, 4, 4}, 2, keys, props));
    CHECK(base.visible == moved.visible);
}

TEST_CASE("with r one and tied weights the local branch equals the global branch") {
    const std::size_t c = 16;
    Rng rng(13);
    SmgmWeights w = SmgmWeights::random(c, 4, 1, rng);
    w.local = w.global;

    Mat keys, props;
    const SpacePartition p = random_partition(1, 24, 8, 17, &keys, &props);
    Rng frng(19);
    const Mat key_feat = Mat::random_normal(24, c, frng, 1.0);
    const Mat prop_feat = Mat::random_normal(8, c, frng, 1.0);
    const LanguageEmbedding lang = tiny_lang(c, 5, 23);

    const SmgmOutput out = smgm_forward(prop_feat, key_feat, lang, w, p);
    CHECK(bit_equal(out.local_features, out.global_features));
}

TEST_CASE("fused output is the exact elementwise sum") {
    const std::size_t c = 8;
    Rng rng(29);
    const SmgmWeights w = SmgmWeights::random(c, 2, 1, rng);
    Mat keys, props;
    const SpacePartition p = random_partition(2, 20, 6, 31, &keys, &props);
    Rng frng(37);
    const Mat key_feat = Mat::random_normal(20, c, frng, 1.0);
    const Mat prop_feat = Mat::random_normal(6, c, frng, 1.0);
    const LanguageEmbedding lang = tiny_lang(c, 4, 41);

    const SmgmOutput out = smgm_forward(prop_feat, key_feat, lang, w, p);
    CHECK(bit_equal(out.fused, add(out.global_features, out.local_features)));
    CHECK(max_abs_diff(out.global_features, out.local_features) > 0.0);
}

TEST_CASE("masked local branch matches a physical per-region split") {
    const std::size_t c = 16;
    for (std::size_t r : {2, 3, 4}) {
        Rng rng(43 + r);
        const SmgmWeights w = SmgmWeights::random(c, 4, 1, rng);
        Mat keys, props;
        const SpacePartition p = random_partition(r, 48, 16, 47 + r, &keys, &props);
        Rng frng(53 + r);
        const Mat key_feat = Mat::random_normal(48, c, frng, 1.0);
        const Mat prop_feat = Mat::random_normal(16, c, frng, 1.0);
        const LanguageEmbedding lang = tiny_lang(c, 6, 59 + r);

        const SmgmOutput out = smgm_forward(prop_feat, key_feat, lang, w, p);
        const Mat split =
            oracle::smgm_split_reference(prop_feat, key_feat, lang, w.local, p);
        CHECK(max_abs_diff(out.local_features, split) <= 1e-9);
    }
}

TEST_CASE("deeper stacks still match the split reference") {
    const std::size_t c = 8;
    Rng rng(61);
    const SmgmWeights w = SmgmWeights::random(c, 2, 2, rng);
    Mat keys, props;
    const SpacePartition p = random_partition(2, 24, 8, 67, &keys, &props);
    Rng frng(71);
    const Mat key_feat = Mat::random_normal(24, c, frng, 1.0);
    const Mat prop_feat = Mat::random_normal(8, c, frng, 1.0);
    const LanguageEmbedding lang = tiny_lang(c, 3, 73);

    const SmgmOutput out = smgm_forward(prop_feat, key_feat, lang, w, p);
    const Mat split = oracle::smgm_split_reference(prop_feat, key_feat, lang, w.local, p);
    CHECK(max_abs_diff(out.local_features, split) <= 1e-9);
}

TEST_CASE("smgm only attends to the valid word rows") {
    const std::size_t c = 8;
    Rng rng(79);
    const SmgmWeights w = SmgmWeights::random(c, 2, 1, rng);
    Mat keys, props;
    const SpacePartition p = random_partition(2, 16, 6, 83, &keys, &props);
    Rng frng(89);
    const Mat key_feat = Mat::random_normal(16, c, frng, 1.0);
    const Mat prop_feat = Mat::random_normal(6, c, frng, 1.0);

    LanguageEmbedding padded = tiny_lang(c, 4, 97);
    padded.valid_len = 2;  // rows 2..3 are padding noise that must not matter
    LanguageEmbedding trimmed;
    trimmed.word = slice_rows(padded.word, 0, 2);
    trimmed.sentence = padded.sentence;
    trimmed.valid_len = 2;

    const SmgmOutput a = smgm_forward(prop_feat, key_feat, padded, w, p);
    const SmgmOutput b = smgm_forward(prop_feat, key_feat, trimmed, w, p);
    CHECK(bit_equal(a.fused, b.fused));
}

TEST_CASE("smgm weights round-trip through tensor files") {
    const std::size_t c = 8;
    Rng rng(101);
    const SmgmWeights w = SmgmWeights::random(c, 2, 1, rng);
    TensorFile f;
    w.put(f);
    const SmgmWeights back = SmgmWeights::from_file(f, 2);

    Mat keys, props;
    const SpacePartition p = random_partition(2, 12, 4, 103, &keys, &props);
    Rng frng(107);
    const Mat key_feat = Mat::random_normal(12, c, frng, 1.0);
    const Mat prop_feat = Mat::random_normal(4, c, frng, 1.0);
    const LanguageEmbedding lang = tiny_lang(c, 3, 109);

    const SmgmOutput a = smgm_forward(prop_feat, key_feat, lang, w, p);
    const SmgmOutput b = smgm_forward(prop_feat, key_feat, lang, back, p);
    CHECK(bit_equal(a.fused, b.fused));
}
