#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ham/common.hpp"
#include "ham/rng.hpp"

namespace ham {

// Dense row-major matrix of 64-bit floats. Entries stay finite except where
// a mask fills -inf ahead of a softmax.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat from_rows(std::size_t rows, std::size_t cols,
                         std::initializer_list<double> values);
    static Mat identity(std::size_t n);
    static Mat random_normal(std::size_t rows, std::size_t cols, Rng& rng,
                             double stddev = 1.0);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Standard product; per output entry the summation runs over ascending k,
// so results are bit-stable across runs and platforms.
Mat matmul(const Mat& a, const Mat& b);

Mat transpose(const Mat& a);

// Row-wise numerically stabilized softmax. -inf entries map to exactly 0.
// Throws ValueError if a row contains no finite entry.
Mat softmax_rows(const Mat& a);

// Per-row normalization to mean 0 / variance 1, then affine gain and bias.
Mat layer_norm(const Mat& a, std::span<const double> gain,
               std::span<const double> bias, double eps = 1e-5);

Mat add(const Mat& a, const Mat& b);
Mat scale(const Mat& a, double s);

// Adds `bias` (length == cols) to every row.
Mat add_row_bias(const Mat& a, std::span<const double> bias);

Mat relu(const Mat& a);

// Vertical stacking; either operand may have zero rows.
Mat concat_rows(const Mat& a, const Mat& b);

// Copy of columns [c0, c1).
Mat slice_cols(const Mat& a, std::size_t c0, std::size_t c1);

// Copy of rows [r0, r1).
Mat slice_rows(const Mat& a, std::size_t r0, std::size_t r1);

// Copy of the listed rows, in the given order.
Mat gather_rows(const Mat& a, std::span<const std::size_t> ids);

double max_abs_diff(const Mat& a, const Mat& b);
bool bit_equal(const Mat& a, const Mat& b);

}  // namespace ham
