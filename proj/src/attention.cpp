#include "ham/attention.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "ham/common.hpp"

namespace ham {

namespace {

void check_block_shapes(const MhaWeights& w) {
    const std::size_t c = w.width();
    if (c == 0 || w.heads == 0 || c % w.heads != 0)
        throw ShapeError("model width must be a positive multiple of the head count");
    if (w.wq.cols() != c || !w.wk.same_shape(w.wq) || !w.wv.same_shape(w.wq) ||
        !w.wo.same_shape(w.wq))
        throw ShapeError("projection matrices must be square and equal-shaped");
    if (w.ffn_w1.rows() != c || w.ffn_w2.cols() != c ||
        w.ffn_w1.cols() != w.ffn_w2.rows())
        throw ShapeError("FFN matrices do not chain back to the model width");
}

// Multi-head scaled dot-product attention core (no residual, no norm).
Mat attention_core(const Mat& x, const Mat& y, const MhaWeights& w,
                   const KeyMask* mask, AttnTrace* trace) {
    const std::size_t c = w.width();
    const std::size_t dh = w.head_dim();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t m = x.rows();
    const std::size_t n = y.rows();
    if (x.cols() != c || y.cols() != c)
        throw ShapeError("attention inputs must match the model width");
    if (mask && (mask->rows != m || mask->cols != n))
        throw ShapeError("mask shape must be queries x keys");
    if (mask)
        for (std::size_t i = 0; i < m; ++i) {
            bool any = false;
            for (std::size_t j = 0; j < n && !any; ++j) any = mask->at(i, j);
            if (!any) throw ValueError("mask row " + std::to_string(i) +
                                       " leaves no key visible");
        }

    const Mat q = add_row_bias(matmul(x, w.wq), w.bq);
    const Mat k = add_row_bias(matmul(y, w.wk), w.bk);
    const Mat v = add_row_bias(matmul(y, w.wv), w.bv);

    Mat heads_out(m, c);
    for (std::size_t h = 0; h < w.heads; ++h) {
        const std::size_t off = h * dh;
        Mat scores(m, n);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (mask && !mask->at(i, j)) {
                    scores.at(i, j) = -std::numeric_limits<double>::infinity();
                    continue;
                }
                double s = 0.0;
                for (std::size_t d = 0; d < dh; ++d)
                    s += q.at(i, off + d) * k.at(j, off + d);
                scores.at(i, j) = s * inv_scale;
            }
        const Mat weights = softmax_rows(scores);
        if (trace) trace->head_weights.push_back(weights);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t d = 0; d < dh; ++d) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    s += weights.at(i, j) * v.at(j, off + d);
                heads_out.at(i, off + d) = s;
            }
    }
    return add_row_bias(matmul(heads_out, w.wo), w.bo);
}

Mat ffn(const Mat& x, const MhaWeights& w) {
    const Mat hidden = relu(add_row_bias(matmul(x, w.ffn_w1), w.ffn_b1));
    return add_row_bias(matmul(hidden, w.ffn_w2), w.ffn_b2);
}

Mat attention_block(const Mat& x, const Mat& y, const MhaWeights& w,
                    const KeyMask* mask, AttnTrace* trace) {
    check_block_shapes(w);
    const Mat attn = attention_core(x, y, w, mask, trace);
    const Mat h1 = layer_norm(add(x, attn), w.ln1_gain, w.ln1_bias);
    return layer_norm(add(h1, ffn(h1, w)), w.ln2_gain, w.ln2_bias);
}

}  // namespace

MhaWeights MhaWeights::random(std::size_t c, std::size_t heads, Rng& rng) {
    if (c == 0 || heads == 0 || c % heads != 0)
        throw ShapeError("model width must be a positive multiple of the head count");
    const double s = 1.0 / std::sqrt(static_cast<double>(c));
    MhaWeights w;
    w.heads = heads;
    w.wq = Mat::random_normal(c, c, rng, s);
    w.wk = Mat::random_normal(c, c, rng, s);
    w.wv = Mat::random_normal(c, c, rng, s);
    w.wo = Mat::random_normal(c, c, rng, s);
    auto bias = [&rng, s](std::size_t n) {
        std::vector<double> b(n);
        for (auto& v : b) v = rng.next_normal() * s;
        return b;
    };
    w.bq = bias(c);
    w.bk = bias(c);
    w.bv = bias(c);
    w.bo = bias(c);
    w.ffn_w1 = Mat::random_normal(c, 4 * c, rng, s);
    w.ffn_b1 = bias(4 * c);
    w.ffn_w2 = Mat::random_normal(4 * c, c, rng, 0.5 / std::sqrt(static_cast<double>(c)));
    w.ffn_b2 = bias(c);
    w.ln1_gain.assign(c, 1.0);
    w.ln1_bias.assign(c, 0.0);
    w.ln2_gain.assign(c, 1.0);
    w.ln2_bias.assign(c, 0.0);
    return w;
}

void MhaWeights::put(TensorFile& file, const std::string& prefix) const {
    file.put(prefix + ".wq", NamedTensor::from_mat(wq));
    file.put(prefix + ".bq", NamedTensor::from_vector(bq));
    file.put(prefix + ".wk", NamedTensor::from_mat(wk));
    file.put(prefix + ".bk", NamedTensor::from_vector(bk));
    file.put(prefix + ".wv", NamedTensor::from_mat(wv));
    file.put(prefix + ".bv", NamedTensor::from_vector(bv));
    file.put(prefix + ".wo", NamedTensor::from_mat(wo));
    file.put(prefix + ".bo", NamedTensor::from_vector(bo));
    file.put(prefix + ".ffn_w1", NamedTensor::from_mat(ffn_w1));
    file.put(prefix + ".ffn_b1", NamedTensor::from_vector(ffn_b1));
    file.put(prefix + ".ffn_w2", NamedTensor::from_mat(ffn_w2));
    file.put(prefix + ".ffn_b2", NamedTensor::from_vector(ffn_b2));
    file.put(prefix + ".ln1_g", NamedTensor::from_vector(ln1_gain));
    file.put(prefix + ".ln1_b", NamedTensor::from_vector(ln1_bias));
    file.put(prefix + ".ln2_g", NamedTensor::from_vector(ln2_gain));
    file.put(prefix + ".ln2_b", NamedTensor::from_vector(ln2_bias));
}

MhaWeights MhaWeights::from_file(const TensorFile& file, const std::string& prefix,
                                 std::size_t heads) {
    MhaWeights w;
    w.heads = heads;
    w.wq = file.get(prefix + ".wq").to_mat();
    w.bq = file.get(prefix + ".bq").to_vector();
    w.wk = file.get(prefix + ".wk").to_mat();
    w.bk = file.get(prefix + ".bk").to_vector();
    w.wv = file.get(prefix + ".wv").to_mat();
    w.bv = file.get(prefix + ".bv").to_vector();
    w.wo = file.get(prefix + ".wo").to_mat();
    w.bo = file.get(prefix + ".bo").to_vector();
    w.ffn_w1 = file.get(prefix + ".ffn_w1").to_mat();
    w.ffn_b1 = file.get(prefix + ".ffn_b1").to_vector();
    w.ffn_w2 = file.get(prefix + ".ffn_w2").to_mat();
    w.ffn_b2 = file.get(prefix + ".ffn_b2").to_vector();
    w.ln1_gain = file.get(prefix + ".ln1_g").to_vector();
    w.ln1_bias = file.get(prefix + ".ln1_b").to_vector();
    w.ln2_gain = file.get(prefix + ".ln2_g").to_vector();
    w.ln2_bias = file.get(prefix + ".ln2_b").to_vector();
    check_block_shapes(w);
    return w;
}

Mat mhsa(const Mat& x, const MhaWeights& w, const KeyMask* mask, AttnTrace* trace) {
    return attention_block(x, x, w, mask, trace);
}

Mat mhca(const Mat& x, const Mat& y, const MhaWeights& w, const KeyMask* mask,
         AttnTrace* trace) {
    return attention_block(x, y, w, mask, trace);
}

PosEmbedWeights PosEmbedWeights::random(std::size_t in_dim, std::size_t c, Rng& rng) {
    PosEmbedWeights w;
    w.w = Mat::random_normal(in_dim, c, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    w.b.assign(c, 0.0);
    return w;
}

void PosEmbedWeights::put(TensorFile& file, const std::string& prefix) const {
    file.put(prefix + ".w", NamedTensor::from_mat(w));
    file.put(prefix + ".b", NamedTensor::from_vector(b));
}

PosEmbedWeights PosEmbedWeights::from_file(const TensorFile& file,
                                           const std::string& prefix) {
    PosEmbedWeights w;
    w.w = file.get(prefix + ".w").to_mat();
    w.b = file.get(prefix + ".b").to_vector();
    return w;
}

Mat positional_embed_points(const Mat& points, const Mat* box_info,
                            const PosEmbedWeights& w) {
    if (points.cols() != 3) throw ShapeError("points must be n x 3");
    Mat input = points;
    if (box_info) {
        if (box_info->rows() != points.rows() || box_info->cols() != 6)
            throw ShapeError("box info must be n x 6");
        input = Mat(points.rows(), 9);
        for (std::size_t i = 0; i < points.rows(); ++i) {
            for (std::size_t j = 0; j < 3; ++j) input.at(i, j) = points.at(i, j);
            for (std::size_t j = 0; j < 6; ++j) input.at(i, 3 + j) = box_info->at(i, j);
        }
    }
    if (w.w.rows() != input.cols())
        throw ShapeError("positional map expects " + std::to_string(w.w.rows()) +
                         " input channels, got " + std::to_string(input.cols()));
    return add_row_bias(matmul(input, w.w), w.b);
}

Mat positional_embed_text(std::size_t length, std::size_t c) {
    Mat pe(length, c);
    for (std::size_t p = 0; p < length; ++p)
        for (std::size_t i = 0; i < c; ++i) {
            const double exponent = static_cast<double>(i - i % 2) / static_cast<double>(c);
            const double angle =
                static_cast<double>(p) / std::pow(10000.0, exponent);
            pe.at(p, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
        }
    return pe;
}

PlacmWeights PlacmWeights::random(std::size_t c, std::size_t heads, std::size_t depth,
                                  Rng& rng) {
    if (depth == 0) throw ValueError("depth must be at least 1");
    PlacmWeights w;
    for (std::size_t l = 0; l < depth; ++l) {
        w.word_stages.push_back({MhaWeights::random(c, heads, rng),
                                 MhaWeights::random(c, heads, rng)});
        w.sentence_stages.push_back({MhaWeights::random(c, heads, rng),
                                     MhaWeights::random(c, heads, rng)});
    }
    return w;
}

void PlacmWeights::put(TensorFile& file, const std::string& prefix) const {
    for (std::size_t l = 0; l < word_stages.size(); ++l) {
        const std::string base = prefix + ".l" + std::to_string(l);
        word_stages[l].self_w.put(file, base + ".word.self");
        word_stages[l].cross_w.put(file, base + ".word.cross");
        sentence_stages[l].self_w.put(file, base + ".sentence.self");
        sentence_stages[l].cross_w.put(file, base + ".sentence.cross");
    }
}

PlacmWeights PlacmWeights::from_file(const TensorFile& file, const std::string& prefix,
                                     std::size_t heads) {
    PlacmWeights w;
    for (std::size_t l = 0;; ++l) {
        const std::string base = prefix + ".l" + std::to_string(l);
        if (!file.contains(base + ".word.self.wq")) break;
        PlacmStage word{MhaWeights::from_file(file, base + ".word.self", heads),
                        MhaWeights::from_file(file, base + ".word.cross", heads)};
        PlacmStage sent{MhaWeights::from_file(file, base + ".sentence.self", heads),
                        MhaWeights::from_file(file, base + ".sentence.cross", heads)};
        w.word_stages.push_back(std::move(word));
        w.sentence_stages.push_back(std::move(sent));
    }
    if (w.word_stages.empty())
        throw FormatError("no alignment stages under prefix " + prefix, 0);
    return w;
}

namespace {

// Widens a proposal-to-key mask with always-visible language columns.
KeyMask extend_mask(const KeyMask& key_mask, std::size_t extra_cols) {
    KeyMask out(key_mask.rows, key_mask.cols + extra_cols, true);
    for (std::size_t i = 0; i < key_mask.rows; ++i)
        for (std::size_t j = 0; j < key_mask.cols; ++j)
            out.set(i, j, key_mask.at(i, j));
    return out;
}

}  // namespace

Mat placm_block(const Mat& q, const Mat& keys, const Mat& words, const Mat& sentence,
                const PlacmWeights& w, const KeyMask* key_mask,
                const KeyMask* self_mask, AttnTrace* trace) {
    const std::size_t c = q.cols();
    if (keys.cols() != c || words.cols() != c || sentence.cols() != c)
        throw ShapeError("all alignment inputs must share the model width");
    if (sentence.rows() != 1) throw ShapeError("sentence embedding must be one row");
    if (key_mask && (key_mask->rows != q.rows() || key_mask->cols != keys.rows()))
        throw ShapeError("key mask shape must be proposals x keys");

    const Mat keys_words = concat_rows(keys, words);
    const Mat keys_sentence = concat_rows(keys, sentence);
    KeyMask word_mask, sentence_mask;
    if (key_mask) {
        word_mask = extend_mask(*key_mask, words.rows());
        sentence_mask = extend_mask(*key_mask, 1);
    }

    Mat state = q;
    for (std::size_t l = 0; l < w.depth(); ++l) {
        state = mhsa(state, w.word_stages[l].self_w, self_mask, trace);
        state = mhca(state, keys_words, w.word_stages[l].cross_w,
                     key_mask ? &word_mask : nullptr, trace);
        state = mhsa(state, w.sentence_stages[l].self_w, self_mask, trace);
        state = mhca(state, keys_sentence, w.sentence_stages[l].cross_w,
                     key_mask ? &sentence_mask : nullptr, trace);
    }
    return state;
}

void save_mask(const KeyMask& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write: " + path);
    const auto rows = static_cast<std::uint32_t>(mask.rows);
    const auto cols = static_cast<std::uint32_t>(mask.cols);
    out.write(reinterpret_cast<const char*>(&rows), 4);
    out.write(reinterpret_cast<const char*>(&cols), 4);
    const std::size_t row_bytes = (mask.cols + 7) / 8;
    std::vector<char> packed(row_bytes);
    for (std::size_t r = 0; r < mask.rows; ++r) {
        std::fill(packed.begin(), packed.end(), 0);
        for (std::size_t c = 0; c < mask.cols; ++c)
            if (mask.at(r, c)) packed[c / 8] |= static_cast<char>(1 << (c % 8));
        out.write(packed.data(), static_cast<std::streamsize>(row_bytes));
    }
    if (!out) throw Error("write failed: " + path);
}

KeyMask load_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::uint32_t rows = 0, cols = 0;
    if (!in.read(reinterpret_cast<char*>(&rows), 4) ||
        !in.read(reinterpret_cast<char*>(&cols), 4))
        throw FormatError("truncated payload reading mask header", 0);
    KeyMask mask(rows, cols, false);
    const std::size_t row_bytes = (mask.cols + 7) / 8;
    std::vector<char> packed(row_bytes);
    for (std::size_t r = 0; r < mask.rows; ++r) {
        if (!in.read(packed.data(), static_cast<std::streamsize>(row_bytes)))
            throw FormatError("truncated payload reading mask row", 8 + r * row_bytes);
        for (std::size_t c = 0; c < mask.cols; ++c)
            mask.set(r, c, (packed[c / 8] >> (c % 8)) & 1);
    }
    if (in.peek() != std::char_traits<char>::eof())
        throw FormatError("trailing bytes after the mask rows",
                          8 + static_cast<std::size_t>(rows) * row_bytes);
    return mask;
}

}  // namespace ham
