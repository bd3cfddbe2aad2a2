#include "ham/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ham/common.hpp"
#include "ham/grounding.hpp"

namespace ham::oracle {

std::vector<std::size_t> fps_brute_force(std::span<const double> feat, std::size_t l,
                                         std::size_t dim, std::size_t n,
                                         std::size_t start_id) {
    std::vector<std::size_t> order;
    if (n == 0) return order;
    std::vector<char> selected(l, 0);
    order.push_back(start_id);
    selected[start_id] = 1;
    while (order.size() < n) {
        std::size_t best = l;
        double best_min = -1.0;
        for (std::size_t i = 0; i < l; ++i) {
            if (selected[i]) continue;
            double mn = std::numeric_limits<double>::infinity();
            for (std::size_t s : order) {
                double d2 = 0.0;
                for (std::size_t k = 0; k < dim; ++k) {
                    const double d = feat[i * dim + k] - feat[s * dim + k];
                    d2 += d * d;
                }
                mn = std::min(mn, d2);
            }
            if (mn > best_min) {
                best_min = mn;
                best = i;
            }
        }
        selected[best] = 1;
        order.push_back(best);
    }
    return order;
}

std::vector<std::size_t> dfps_brute_force(const PointCloud& cloud, std::size_t n,
                                          std::size_t start_id) {
    return fps_brute_force(cloud.positions, cloud.count, 3, n, start_id);
}

std::vector<std::size_t> ffps_brute_force(const PointCloud& cloud, std::size_t n,
                                          std::size_t start_id,
                                          const std::vector<double>& channel_weights) {
    const std::size_t dim = 3 + cloud.attr_dim;
    std::vector<double> w = channel_weights;
    if (w.empty()) w.assign(dim, 1.0);
    std::vector<double> feat(cloud.count * dim);
    for (std::size_t i = 0; i < cloud.count; ++i) {
        const Vec3 p = cloud.position(i);
        feat[i * dim + 0] = w[0] * p.x;
        feat[i * dim + 1] = w[1] * p.y;
        feat[i * dim + 2] = w[2] * p.z;
        const auto attrs = cloud.attr_row(i);
        for (std::size_t k = 0; k < cloud.attr_dim; ++k)
            feat[i * dim + 3 + k] = w[3 + k] * attrs[k];
    }
    return fps_brute_force(feat, cloud.count, dim, n, start_id);
}

std::vector<std::vector<double>> gru_scalar(const std::vector<std::vector<double>>& x,
                                            const GruWeights& w) {
    const std::size_t c = w.hidden_dim();
    const std::size_t c_in = w.input_dim();
    std::vector<std::vector<double>> states;
    std::vector<double> h(c, 0.0);
    for (const auto& xt : x) {
        std::vector<double> hn(c);
        for (std::size_t j = 0; j < c; ++j) {
            double az = w.biz[j] + w.bhz[j];
            double ar = w.bir[j] + w.bhr[j];
            double an_in = w.bin_[j];
            double an_h = w.bhn[j];
            for (std::size_t k = 0; k < c_in; ++k) {
                az += xt[k] * w.wz.at(k, j);
                ar += xt[k] * w.wr.at(k, j);
                an_in += xt[k] * w.wn.at(k, j);
            }
            for (std::size_t k = 0; k < c; ++k) {
                az += h[k] * w.uz.at(k, j);
                ar += h[k] * w.ur.at(k, j);
                an_h += h[k] * w.un.at(k, j);
            }
            const double z = 1.0 / (1.0 + std::exp(-az));
            const double r = 1.0 / (1.0 + std::exp(-ar));
            const double nj = std::tanh(an_in + r * an_h);
            hn[j] = (1.0 - z) * nj + z * h[j];
        }
        h = hn;
        states.push_back(h);
    }
    return states;
}

std::vector<double> softmax_reference(std::span<const double> row) {
    long double sum = 0.0L;
    std::vector<long double> e(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
        e[i] = std::isinf(row[i]) && row[i] < 0
                   ? 0.0L
                   : std::exp(static_cast<long double>(row[i]));
        sum += e[i];
    }
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i)
        out[i] = static_cast<double>(e[i] / sum);
    return out;
}

namespace {

std::vector<double> layer_norm_row(const std::vector<double>& v,
                                   std::span<const double> g,
                                   std::span<const double> b) {
    const std::size_t c = v.size();
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(c);
    std::vector<double> out(c);
    for (std::size_t j = 0; j < c; ++j)
        out[j] = (v[j] - mean) / std::sqrt(var + 1e-5) * g[j] + b[j];
    return out;
}

}  // namespace

Mat single_head_block(const Mat& x, const Mat& y, const MhaWeights& w) {
    if (w.heads != 1) throw ValueError("reference block is single-head only");
    const std::size_t c = w.width();
    const std::size_t m = x.rows();
    const std::size_t n = y.rows();
    auto project = [c](const Mat& in, const Mat& p, std::span<const double> b) {
        std::vector<std::vector<double>> out(in.rows(), std::vector<double>(c));
        for (std::size_t i = 0; i < in.rows(); ++i)
            for (std::size_t j = 0; j < c; ++j) {
                double s = b[j];
                for (std::size_t k = 0; k < c; ++k) s += in.at(i, k) * p.at(k, j);
                out[i][j] = s;
            }
        return out;
    };
    const auto q = project(x, w.wq, w.bq);
    const auto k = project(y, w.wk, w.bk);
    const auto v = project(y, w.wv, w.bv);
    const double scale = 1.0 / std::sqrt(static_cast<double>(c));

    Mat out(m, c);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> scores(n);
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t d = 0; d < c; ++d) s += q[i][d] * k[j][d];
            scores[j] = s * scale;
        }
        const auto weights = softmax_reference(scores);
        std::vector<double> attended(c, 0.0);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t d = 0; d < c; ++d) attended[d] += weights[j] * v[j][d];
        // output projection, residual, norm, FFN, residual, norm
        std::vector<double> o(c);
        for (std::size_t j = 0; j < c; ++j) {
            double s = w.bo[j];
            for (std::size_t d = 0; d < c; ++d) s += attended[d] * w.wo.at(d, j);
            o[j] = s + x.at(i, j);
        }
        const auto h1 = layer_norm_row(o, w.ln1_gain, w.ln1_bias);
        std::vector<double> hidden(w.ffn_w1.cols());
        for (std::size_t j = 0; j < hidden.size(); ++j) {
            double s = w.ffn_b1[j];
            for (std::size_t d = 0; d < c; ++d) s += h1[d] * w.ffn_w1.at(d, j);
            hidden[j] = std::max(0.0, s);
        }
        std::vector<double> f(c);
        for (std::size_t j = 0; j < c; ++j) {
            double s = w.ffn_b2[j];
            for (std::size_t d = 0; d < hidden.size(); ++d)
                s += hidden[d] * w.ffn_w2.at(d, j);
            f[j] = s + h1[j];
        }
        const auto h2 = layer_norm_row(f, w.ln2_gain, w.ln2_bias);
        for (std::size_t j = 0; j < c; ++j) out.at(i, j) = h2[j];
    }
    return out;
}

Mat smgm_split_reference(const Mat& proposals, const Mat& keys,
                         const LanguageEmbedding& lang, const PlacmWeights& local,
                         const SpacePartition& partition) {
    const std::size_t m = proposals.rows();
    const std::size_t n = keys.rows();
    if (partition.proposal_region.size() != m || partition.key_region.size() != n)
        throw ShapeError("partition does not cover the given points");
    const Mat words = slice_rows(lang.word, 0, lang.valid_len);

    Mat out(m, proposals.cols());
    for (std::size_t region = 0; region < partition.region_count(); ++region) {
        std::vector<std::size_t> prop_ids, key_ids;
        for (std::size_t i = 0; i < m; ++i)
            if (partition.proposal_region[i] == region) prop_ids.push_back(i);
        if (prop_ids.empty()) continue;
        for (std::size_t i = 0; i < n; ++i)
            if (partition.key_region[i] == region) key_ids.push_back(i);

        const Mat q_sub = gather_rows(proposals, prop_ids);
        const Mat k_sub = key_ids.empty() ? Mat(0, keys.cols())
                                          : gather_rows(keys, key_ids);
        const Mat aligned = placm_block(q_sub, k_sub, words, lang.sentence, local);
        for (std::size_t i = 0; i < prop_ids.size(); ++i)
            for (std::size_t j = 0; j < aligned.cols(); ++j)
                out.at(prop_ids[i], j) = aligned.at(i, j);
    }
    return out;
}

std::vector<double> finite_diff_matching_grad(std::span<const double> logits,
                                              std::span<const double> labels,
                                              double h) {
    std::vector<double> grad(logits.size());
    std::vector<double> probe(logits.begin(), logits.end());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probe[i] = logits[i] + h;
        const double up = matching_loss(probe, labels);
        probe[i] = logits[i] - h;
        const double down = matching_loss(probe, labels);
        probe[i] = logits[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

double iou_reference(const Box3& a, const Box3& b) {
    const Vec3 alo = a.min_corner(), ahi = a.max_corner();
    const Vec3 blo = b.min_corner(), bhi = b.max_corner();
    const double ox = std::max(0.0, std::min(ahi.x, bhi.x) - std::max(alo.x, blo.x));
    const double oy = std::max(0.0, std::min(ahi.y, bhi.y) - std::max(alo.y, blo.y));
    const double oz = std::max(0.0, std::min(ahi.z, bhi.z) - std::max(alo.z, blo.z));
    const double inter = ox * oy * oz;
    if (inter <= 0.0) return 0.0;
    const double va = (ahi.x - alo.x) * (ahi.y - alo.y) * (ahi.z - alo.z);
    const double vb = (bhi.x - blo.x) * (bhi.y - blo.y) * (bhi.z - blo.z);
    return inter / (va + vb - inter);
}

double acc_reference(const std::vector<Box3>& pred, const std::vector<Box3>& gt,
                     double threshold) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (iou_reference(pred[i], gt[i]) > threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double det_loss_reference(const ProposalSet& proposals, const Scene& scene,
                          std::span<const double> objectness) {
    const std::size_t m = proposals.count();
    auto huber = [](double d) {
        const double a = std::fabs(d);
        return a < 1.0 ? 0.5 * d * d : a - 0.5;
    };
    double bce = 0.0, center = 0.0, sizes = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const Vec3 p{proposals.points.at(i, 0), proposals.points.at(i, 1),
                     proposals.points.at(i, 2)};
        bool inside = false;
        for (const auto& o : scene.objects) inside = inside || o.box.contains(p);
        const double q = std::clamp(objectness[i], 0.0, 1.0);
        bce += inside ? -std::log(std::max(q, 1e-12))
                      : -std::log(std::max(1.0 - q, 1e-12));
        if (!inside) continue;
        std::size_t nearest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
            const Vec3 c = scene.objects[o].box.center;
            const double d2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y) +
                              (p.z - c.z) * (p.z - c.z);
            if (d2 < best) {
                best = d2;
                nearest = o;
            }
        }
        const Box3& g = scene.objects[nearest].box;
        const Box3& pb = proposals.boxes[i];
        center += huber(pb.center.x - g.center.x) + huber(pb.center.y - g.center.y) +
                  huber(pb.center.z - g.center.z);
        sizes += std::fabs(std::log(pb.size.x / g.size.x)) +
                 std::fabs(std::log(pb.size.y / g.size.y)) +
                 std::fabs(std::log(pb.size.z / g.size.z));
    }
    return (bce + center + sizes) / static_cast<double>(m);
}

}  // namespace ham::oracle
