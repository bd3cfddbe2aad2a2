#include "ham/language.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ham/common.hpp"

namespace ham {

namespace {

const char* kBuiltinWords[] = {
    "<pad>", "<unk>",
    // articles, prepositions, verbs
    "the", "a", "an", "in", "on", "at", "of", "to", "by", "with", "and", "or",
    "is", "that", "this", "it", "find", "near", "next", "between", "under",
    "above", "behind", "front", "left", "right", "closest", "farthest",
    // scene nouns
    "room", "wall", "floor", "corner", "center", "window", "door",
    // adjectives
    "small", "large", "big", "tall", "short", "round", "square",
    // colors
    "red", "green", "blue", "yellow", "brown", "white", "black", "orange",
    "gray",
    // object classes
    "chair", "table", "sofa", "bed", "desk", "cabinet", "lamp", "shelf",
};

}  // namespace

Vocabulary::Vocabulary() = default;

void Vocabulary::add(const std::string& word) {
    if (index_.count(word)) throw ValueError("duplicate vocabulary word: " + word);
    index_.emplace(word, static_cast<std::uint32_t>(words_.size()));
    words_.push_back(word);
}

Vocabulary Vocabulary::builtin() {
    Vocabulary v;
    for (const char* w : kBuiltinWords) v.add(w);
    return v;
}

Vocabulary Vocabulary::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path);
    Vocabulary v;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
            line.pop_back();
        v.add(line);
    }
    if (v.size() < 2) throw FormatError("vocabulary needs at least PAD and UNK rows", 0);
    return v;
}

std::uint32_t Vocabulary::id_of(const std::string& word) const {
    const auto it = index_.find(word);
    return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::word_of(std::uint32_t id) const {
    if (id >= words_.size()) throw ValueError("vocabulary id out of range");
    return words_[id];
}

std::vector<std::uint32_t> tokenize(const std::string& text, const Vocabulary& vocab,
                                    std::size_t t_max) {
    std::vector<std::uint32_t> ids;
    std::string word;
    auto flush = [&] {
        if (!word.empty() && ids.size() < t_max) ids.push_back(vocab.id_of(word));
        word.clear();
    };
    for (unsigned char ch : text) {
        if (std::isalnum(ch))
            word.push_back(static_cast<char>(std::tolower(ch)));
        else
            flush();
    }
    flush();
    if (ids.empty()) throw ValueError("text has no tokens");
    return ids;
}

Mat embed(const std::vector<std::uint32_t>& tokens, const Mat& table) {
    Mat out(tokens.size(), table.cols());
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const std::uint32_t id = tokens[t];
        if (id >= table.rows())
            throw ValueError("token id " + std::to_string(id) +
                             " outside vocabulary of " + std::to_string(table.rows()));
        if (id == kUnkId) continue;  // zero row
        for (std::size_t c = 0; c < table.cols(); ++c) out.at(t, c) = table.at(id, c);
    }
    return out;
}

Mat make_embedding_table(std::size_t vocab_size, std::size_t c, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "language.embedding"));
    Mat table = Mat::random_normal(vocab_size, c, rng,
                                   1.0 / std::sqrt(static_cast<double>(c)));
    for (std::size_t k = 0; k < c; ++k) table.at(kPadId, k) = 0.0;
    return table;
}

GruWeights GruWeights::random(std::size_t c_in, std::size_t c, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(c));
    GruWeights w;
    w.wz = Mat::random_normal(c_in, c, rng, s);
    w.wr = Mat::random_normal(c_in, c, rng, s);
    w.wn = Mat::random_normal(c_in, c, rng, s);
    w.uz = Mat::random_normal(c, c, rng, s);
    w.ur = Mat::random_normal(c, c, rng, s);
    w.un = Mat::random_normal(c, c, rng, s);
    auto bias = [&rng, c, s] {
        std::vector<double> b(c);
        for (auto& v : b) v = rng.next_normal() * s;
        return b;
    };
    w.biz = bias();
    w.bir = bias();
    w.bin_ = bias();
    w.bhz = bias();
    w.bhr = bias();
    w.bhn = bias();
    return w;
}

void GruWeights::put(TensorFile& file, const std::string& prefix) const {
    file.put(prefix + ".wz", NamedTensor::from_mat(wz));
    file.put(prefix + ".wr", NamedTensor::from_mat(wr));
    file.put(prefix + ".wn", NamedTensor::from_mat(wn));
    file.put(prefix + ".uz", NamedTensor::from_mat(uz));
    file.put(prefix + ".ur", NamedTensor::from_mat(ur));
    file.put(prefix + ".un", NamedTensor::from_mat(un));
    file.put(prefix + ".biz", NamedTensor::from_vector(biz));
    file.put(prefix + ".bir", NamedTensor::from_vector(bir));
    file.put(prefix + ".bin", NamedTensor::from_vector(bin_));
    file.put(prefix + ".bhz", NamedTensor::from_vector(bhz));
    file.put(prefix + ".bhr", NamedTensor::from_vector(bhr));
    file.put(prefix + ".bhn", NamedTensor::from_vector(bhn));
}

GruWeights GruWeights::from_file(const TensorFile& file, const std::string& prefix) {
    GruWeights w;
    w.wz = file.get(prefix + ".wz").to_mat();
    w.wr = file.get(prefix + ".wr").to_mat();
    w.wn = file.get(prefix + ".wn").to_mat();
    w.uz = file.get(prefix + ".uz").to_mat();
    w.ur = file.get(prefix + ".ur").to_mat();
    w.un = file.get(prefix + ".un").to_mat();
    w.biz = file.get(prefix + ".biz").to_vector();
    w.bir = file.get(prefix + ".bir").to_vector();
    w.bin_ = file.get(prefix + ".bin").to_vector();
    w.bhz = file.get(prefix + ".bhz").to_vector();
    w.bhr = file.get(prefix + ".bhr").to_vector();
    w.bhn = file.get(prefix + ".bhn").to_vector();
    return w;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LanguageEmbedding gru_encode(const Mat& vectors, const GruWeights& w,
                             std::size_t t_max) {
    const std::size_t len = vectors.rows();
    const std::size_t c = w.hidden_dim();
    if (len == 0) throw SizeError("need at least one step");
    if (len > t_max) throw SizeError("sequence longer than the sentence limit");
    if (vectors.cols() != w.input_dim())
        throw ShapeError("input width does not match the GRU input dim");
    if (w.biz.size() != c || w.bhz.size() != c || w.uz.rows() != c)
        throw ShapeError("inconsistent GRU weight shapes");

    LanguageEmbedding out;
    out.word = Mat(t_max, c);
    out.valid_len = len;

    std::vector<double> h(c, 0.0);
    std::vector<double> xz(c), xr(c), xn(c), hz(c), hr(c), hn(c);
    auto affine = [c](std::span<const double> v, const Mat& m,
                      std::span<const double> b, std::vector<double>& dst) {
        for (std::size_t j = 0; j < c; ++j) dst[j] = b[j];
        for (std::size_t k = 0; k < m.rows(); ++k) {
            const double vk = v[k];
            const auto row = m.row(k);
            for (std::size_t j = 0; j < c; ++j) dst[j] += vk * row[j];
        }
    };
    for (std::size_t t = 0; t < len; ++t) {
        const auto x = vectors.row(t);
        affine(x, w.wz, w.biz, xz);
        affine(x, w.wr, w.bir, xr);
        affine(x, w.wn, w.bin_, xn);
        affine(h, w.uz, w.bhz, hz);
        affine(h, w.ur, w.bhr, hr);
        affine(h, w.un, w.bhn, hn);
        for (std::size_t j = 0; j < c; ++j) {
            const double z = sigmoid(xz[j] + hz[j]);
            const double r = sigmoid(xr[j] + hr[j]);
            const double n = std::tanh(xn[j] + r * hn[j]);
            h[j] = (1.0 - z) * n + z * h[j];
        }
        for (std::size_t j = 0; j < c; ++j) out.word.at(t, j) = h[j];
    }
    out.sentence = Mat(1, c);
    for (std::size_t j = 0; j < c; ++j) out.sentence.at(0, j) = h[j];
    return out;
}

std::vector<std::uint32_t> mask_words(const std::vector<std::uint32_t>& tokens,
                                      double ratio_max, Rng& rng) {
    if (ratio_max < 0.0 || ratio_max > 1.0)
        throw ValueError("mask ratio must lie in [0, 1]");
    std::vector<std::uint32_t> out = tokens;
    const auto k_max = static_cast<std::size_t>(
        std::floor(ratio_max * static_cast<double>(tokens.size())));
    const std::size_t k = rng.next_below(k_max + 1);
    std::vector<std::size_t> pos(tokens.size());
    std::iota(pos.begin(), pos.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.next_below(pos.size() - i);
        std::swap(pos[i], pos[j]);
        out[pos[i]] = kUnkId;
    }
    return out;
}

QueryRecord intra_sentence_ensemble(const std::vector<QueryRecord>& records,
                                    std::size_t lo, std::size_t hi, Rng& rng) {
    if (records.empty()) throw ValueError("no records to ensemble");
    if (lo < 1 || lo > hi) throw ValueError("need 1 <= lo <= hi");
    for (const auto& r : records)
        if (r.scene_id != records[0].scene_id)
            throw ValueError("records must share one scene");

    std::size_t k = lo + rng.next_below(hi - lo + 1);
    k = std::min(k, records.size());
    std::vector<std::size_t> pick(records.size());
    std::iota(pick.begin(), pick.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.next_below(pick.size() - i);
        std::swap(pick[i], pick[j]);
    }
    pick.resize(k);
    // Fuse in pool order so target order does not depend on draw order.
    std::sort(pick.begin(), pick.end());

    QueryRecord out;
    out.scene_id = records[0].scene_id;
    for (std::size_t i = 0; i < k; ++i) {
        const auto& r = records[pick[i]];
        if (i) out.text += ". ";
        out.text += r.text;
        for (std::uint32_t t : r.target_instance_ids)
            if (std::find(out.target_instance_ids.begin(), out.target_instance_ids.end(),
                          t) == out.target_instance_ids.end())
                out.target_instance_ids.push_back(t);
    }
    return out;
}

std::vector<std::vector<QueryRecord>> inter_sentence_ensemble(
    const std::vector<QueryRecord>& records, std::size_t group_size, Rng& rng) {
    if (group_size < 1) throw ValueError("group_size must be at least 1");

    std::vector<std::string> scene_order;
    std::unordered_map<std::string, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < records.size(); ++i) {
        auto& pool = pools[records[i].scene_id];
        if (pool.empty()) scene_order.push_back(records[i].scene_id);
        pool.push_back(i);
    }

    std::vector<std::vector<QueryRecord>> groups;
    std::uint32_t group_id = 0;
    for (const auto& scene : scene_order) {
        const auto& pool = pools[scene];
        for (std::size_t base = 0; base < pool.size(); base += group_size) {
            std::vector<QueryRecord> group;
            group.reserve(group_size);
            for (std::size_t j = 0; j < group_size; ++j) {
                const std::size_t idx = base + j < pool.size()
                                            ? pool[base + j]
                                            : pool[rng.next_below(pool.size())];
                QueryRecord rec = records[idx];
                rec.group = group_id;
                group.push_back(std::move(rec));
            }
            groups.push_back(std::move(group));
            ++group_id;
        }
    }
    return groups;
}

}  // namespace ham
