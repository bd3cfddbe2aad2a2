#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "ham/common.hpp"
#include "ham/mat.hpp"
#include "ham/rng.hpp"

using namespace ham;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("matmul identity") {
    const Mat a = Mat::from_rows(2, 3, {1, 2, 3, 4, 5, 6});
    const Mat out = matmul(Mat::identity(2), a);
    CHECK(bit_equal(out, a));
}

TEST_CASE("matmul hand example") {
    const Mat a = Mat::from_rows(2, 2, {1, 2, 3, 4});
    const Mat b = Mat::from_rows(2, 1, {0, 1});
    const Mat out = matmul(a, b);
    CHECK(out.at(0, 0) == 2.0);
    CHECK(out.at(1, 0) == 4.0);
}

TEST_CASE("matmul equals triple-loop product exactly") {
    Rng rng(11);
    const Mat a = Mat::random_normal(7, 5, rng);
    const Mat b = Mat::random_normal(5, 3, rng);
    const Mat out = matmul(a, b);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
            CHECK(out.at(i, j) == s);
        }
}

TEST_CASE("matmul shape mismatch throws") {
    CHECK_THROWS_AS(matmul(Mat(2, 3), Mat(2, 3)), ShapeError);
}

TEST_CASE("matmul approximately associative on well-conditioned triples") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Mat a = Mat::random_normal(6, 4, rng);
        const Mat b = Mat::random_normal(4, 5, rng);
        const Mat c = Mat::random_normal(5, 3, rng);
        const Mat left = matmul(matmul(a, b), c);
        const Mat right = matmul(a, matmul(b, c));
        double scale = 1.0;
        for (std::size_t i = 0; i < left.data().size(); ++i)
            scale = std::max(scale, std::fabs(left.data()[i]));
        CHECK(max_abs_diff(left, right) / scale < 1e-9);
    }
}

TEST_CASE("softmax of a uniform row") {
    const Mat out = softmax_rows(Mat::from_rows(1, 4, {0, 0, 0, 0}));
    for (std::size_t j = 0; j < 4; ++j) CHECK(out.at(0, j) == doctest::Approx(0.25));
}

TEST_CASE("softmax maps -inf to exactly zero") {
    const Mat out = softmax_rows(Mat::from_rows(1, 2, {-kInf, 0.0}));
    CHECK(out.at(0, 0) == 0.0);
    CHECK(out.at(0, 1) == 1.0);
}

TEST_CASE("softmax matches extended-precision oracle") {
    const Mat out = softmax_rows(Mat::from_rows(1, 3, {1, 2, 3}));
    long double sum = 0.0L;
    for (int v = 1; v <= 3; ++v) sum += std::exp(static_cast<long double>(v));
    for (std::size_t j = 0; j < 3; ++j) {
        const double expect = static_cast<double>(
            std::exp(static_cast<long double>(j + 1)) / sum);
        CHECK(std::fabs(out.at(0, j) - expect) < 1e-12);
    }
}

TEST_CASE("softmax rejects a row of all -inf") {
    CHECK_THROWS_AS(softmax_rows(Mat::from_rows(1, 2, {-kInf, -kInf})), ValueError);
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(17);
    for (int trial = 0; trial < 1000; ++trial) {
        const Mat row = Mat::random_normal(1, 8, rng, 10.0);
        const Mat out = softmax_rows(row);
        double sum = 0.0;
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(out.at(0, j) >= 0.0);
            sum += out.at(0, j);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("softmax is shift invariant") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        Mat row = Mat::random_normal(1, 6, rng, 3.0);
        const Mat base = softmax_rows(row);
        const double c = rng.next_normal() * 50.0;
        for (std::size_t j = 0; j < 6; ++j) row.at(0, j) += c;
        CHECK(max_abs_diff(base, softmax_rows(row)) < 1e-12);
    }
}

TEST_CASE("layer_norm of a constant row is zero") {
    const Mat a = Mat::from_rows(1, 4, {5, 5, 5, 5});
    const std::vector<double> gain(4, 1.0), bias(4, 0.0);
    const Mat out = layer_norm(a, gain, bias);
    for (std::size_t j = 0; j < 4; ++j) CHECK(out.at(0, j) == 0.0);
}

TEST_CASE("layer_norm keeps an already normalized row") {
    const Mat a = Mat::from_rows(1, 2, {1, -1});
    const std::vector<double> gain(2, 1.0), bias(2, 0.0);
    const Mat out = layer_norm(a, gain, bias, 1e-15);
    CHECK(out.at(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("layer_norm output rows have tiny mean") {
    Rng rng(29);
    const Mat a = Mat::random_normal(4, 6, rng, 3.0);
    const std::vector<double> gain(6, 1.0), bias(6, 0.0);
    const Mat out = layer_norm(a, gain, bias);
    for (std::size_t i = 0; i < 4; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < 6; ++j) mean += out.at(i, j);
        CHECK(std::fabs(mean / 6.0) < 1e-9);
    }
}

TEST_CASE("layer_norm validates arguments") {
    const std::vector<double> ok(3, 1.0), bad(2, 0.0);
    CHECK_THROWS_AS(layer_norm(Mat(1, 3), ok, bad), ShapeError);
    CHECK_THROWS_AS(layer_norm(Mat(1, 3), ok, ok, 0.0), ValueError);
}

TEST_CASE("rng first output from seed zero") {
    Rng rng(0);
    CHECK(rng.next() == 0xE220A8397B1DCDAFull);
}

TEST_CASE("rng determinism and seed separation") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(Rng(1).next() != Rng(2).next());
}

TEST_CASE("rng matches the golden sequence file") {
    std::ifstream golden(std::string(HAM_DATA_DIR) + "/splitmix64_golden.txt");
    REQUIRE(golden.good());
    Rng rng(0);
    std::string line;
    int count = 0;
    while (std::getline(golden, line)) {
        if (line.empty()) continue;
        CHECK(std::stoull(line, nullptr, 16) == rng.next());
        ++count;
    }
    CHECK(count == 64);
}

TEST_CASE("rng bounded draws stay below the bound") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) CHECK(rng.next_below(7) < 7);
    CHECK_THROWS_AS(rng.next_below(0), ValueError);
}

TEST_CASE("rng unit draws stay inside the open interval") {
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.next_unit();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("derived seeds differ per stream") {
    CHECK(derive_seed(7, 0) != derive_seed(7, 1));
    CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
    CHECK(derive_seed(7, "a") == derive_seed(7, "a"));
}

TEST_CASE("mat helpers: concat, slice, gather") {
    const Mat a = Mat::from_rows(2, 2, {1, 2, 3, 4});
    const Mat b = Mat::from_rows(1, 2, {5, 6});
    const Mat cat = concat_rows(a, b);
    CHECK(cat.rows() == 3);
    CHECK(cat.at(2, 1) == 6.0);
    CHECK(bit_equal(concat_rows(Mat(0, 2), a), a));

    const Mat sc = slice_cols(cat, 1, 2);
    CHECK(sc.cols() == 1);
    CHECK(sc.at(0, 0) == 2.0);

    const Mat sr = slice_rows(cat, 1, 3);
    CHECK(sr.rows() == 2);
    CHECK(sr.at(0, 0) == 3.0);

    const std::vector<std::size_t> ids{2, 0};
    const Mat g = gather_rows(cat, ids);
    CHECK(g.at(0, 0) == 5.0);
    CHECK(g.at(1, 0) == 1.0);
}
