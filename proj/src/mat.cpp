#include "ham/mat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace ham {

Mat Mat::from_rows(std::size_t rows, std::size_t cols,
                   std::initializer_list<double> values) {
    if (values.size() != rows * cols)
        throw ShapeError("from_rows: initializer size != rows*cols");
    Mat m(rows, cols);
    std::copy(values.begin(), values.end(), m.data_.begin());
    return m;
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Mat Mat::random_normal(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
    Mat m(rows, cols);
    for (double& v : m.data_) v = rng.next_normal() * stddev;
    return m;
}

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
    Mat c(a.rows(), b.cols());
    // i-k-j keeps the per-entry accumulation in ascending k while walking
    // both operands row-major.
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* crow = c.row(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a.at(i, k);
            const double* brow = b.row(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat transpose(const Mat& a) {
    Mat t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Mat softmax_rows(const Mat& a) {
    Mat out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto in = a.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (double v : in)
            if (std::isfinite(v) && v > mx) mx = v;
        if (!std::isfinite(mx))
            throw ValueError("softmax_rows: row " + std::to_string(i) +
                             " has no finite entry");
        double sum = 0.0;
        auto o = out.row(i);
        for (std::size_t j = 0; j < in.size(); ++j) {
            const double e = std::isinf(in[j]) ? 0.0 : std::exp(in[j] - mx);
            o[j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < in.size(); ++j) o[j] /= sum;
    }
    return out;
}

Mat layer_norm(const Mat& a, std::span<const double> gain,
               std::span<const double> bias, double eps) {
    if (gain.size() != a.cols() || bias.size() != a.cols())
        throw ShapeError("layer_norm: gain/bias length != cols");
    if (!(eps > 0.0)) throw ValueError("layer_norm: eps must be positive");
    Mat out(a.rows(), a.cols());
    const double inv_n = 1.0 / static_cast<double>(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto in = a.row(i);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean *= inv_n;
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var *= inv_n;
        const double denom = 1.0 / std::sqrt(var + eps);
        auto o = out.row(i);
        for (std::size_t j = 0; j < in.size(); ++j)
            o[j] = (in[j] - mean) * denom * gain[j] + bias[j];
    }
    return out;
}

Mat add(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw ShapeError("add: shape mismatch");
    Mat c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.data().size(); ++i)
        c.data()[i] = a.data()[i] + b.data()[i];
    return c;
}

Mat scale(const Mat& a, double s) {
    Mat c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.data().size(); ++i) c.data()[i] = a.data()[i] * s;
    return c;
}

Mat add_row_bias(const Mat& a, std::span<const double> bias) {
    if (bias.size() != a.cols()) throw ShapeError("add_row_bias: length != cols");
    Mat c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c.at(i, j) = a.at(i, j) + bias[j];
    return c;
}

Mat relu(const Mat& a) {
    Mat c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.data().size(); ++i)
        c.data()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    return c;
}

Mat concat_rows(const Mat& a, const Mat& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols()) throw ShapeError("concat_rows: column mismatch");
    Mat c(a.rows() + b.rows(), a.cols());
    std::copy(a.data().begin(), a.data().end(), c.data().begin());
    std::copy(b.data().begin(), b.data().end(), c.data().begin() + a.data().size());
    return c;
}

Mat slice_cols(const Mat& a, std::size_t c0, std::size_t c1) {
    if (c0 > c1 || c1 > a.cols()) throw ShapeError("slice_cols: bad range");
    Mat c(a.rows(), c1 - c0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = c0; j < c1; ++j) c.at(i, j - c0) = a.at(i, j);
    return c;
}

Mat slice_rows(const Mat& a, std::size_t r0, std::size_t r1) {
    if (r0 > r1 || r1 > a.rows()) throw ShapeError("slice_rows: bad range");
    Mat c(r1 - r0, a.cols());
    for (std::size_t i = r0; i < r1; ++i)
        std::copy(a.row(i).begin(), a.row(i).end(), c.row(i - r0).begin());
    return c;
}

Mat gather_rows(const Mat& a, std::span<const std::size_t> ids) {
    Mat c(ids.size(), a.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= a.rows()) throw ShapeError("gather_rows: row id out of range");
        std::copy(a.row(ids[i]).begin(), a.row(ids[i]).end(), c.row(i).begin());
    }
    return c;
}

double max_abs_diff(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

bool bit_equal(const Mat& a, const Mat& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data().data(), b.data().data(),
                       a.data().size() * sizeof(double)) == 0;
}

}  // namespace ham
