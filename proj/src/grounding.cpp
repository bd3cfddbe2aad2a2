#include "ham/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ham/common.hpp"

namespace ham {

namespace {

// Softmax of a plain vector with the usual max shift.
std::vector<double> softmax_vec(std::span<const double> logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

double log_sum_exp(std::span<const double> logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    return mx + std::log(sum);
}

std::size_t check_one_hot(std::span<const double> labels) {
    std::size_t hot = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0.0) continue;
        if (labels[i] != 1.0 || hot != labels.size())
            throw ValueError("labels must be one-hot");
        hot = i;
    }
    if (hot == labels.size()) throw ValueError("labels must contain exactly one 1");
    return hot;
}

double smooth_l1(double d) {
    const double a = std::fabs(d);
    return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

}  // namespace

MatchMlpWeights MatchMlpWeights::random(std::size_t c, Rng& rng) {
    const double s = 1.0 / std::sqrt(static_cast<double>(c));
    MatchMlpWeights w;
    w.w1 = Mat::random_normal(c, c, rng, s);
    w.b1.resize(c);
    for (auto& v : w.b1) v = rng.next_normal() * s;
    w.w2 = Mat::random_normal(c, 1, rng, s);
    w.b2 = rng.next_normal() * s;
    return w;
}

void MatchMlpWeights::put(TensorFile& file, const std::string& prefix) const {
    file.put(prefix + ".w1", NamedTensor::from_mat(w1));
    file.put(prefix + ".b1", NamedTensor::from_vector(b1));
    file.put(prefix + ".w2", NamedTensor::from_mat(w2));
    const std::vector<double> b2v{b2};
    file.put(prefix + ".b2", NamedTensor::from_vector(b2v));
}

MatchMlpWeights MatchMlpWeights::from_file(const TensorFile& file,
                                           const std::string& prefix) {
    MatchMlpWeights w;
    w.w1 = file.get(prefix + ".w1").to_mat();
    w.b1 = file.get(prefix + ".b1").to_vector();
    w.w2 = file.get(prefix + ".w2").to_mat();
    w.b2 = file.get(prefix + ".b2").to_vector().at(0);
    return w;
}

MatchResult match_scores(const Mat& fused, const MatchMlpWeights& w,
                         const std::vector<Box3>& boxes) {
    if (fused.cols() != w.w1.rows() || w.w1.cols() != w.w2.rows() || w.w2.cols() != 1)
        throw ShapeError("matching MLP shapes do not chain from the feature width");
    if (boxes.size() != fused.rows())
        throw ShapeError("need one box per scored row");
    if (fused.rows() == 0) throw SizeError("nothing to score");

    const Mat hidden = relu(add_row_bias(matmul(fused, w.w1), w.b1));
    MatchResult res;
    res.logits.resize(fused.rows());
    for (std::size_t i = 0; i < fused.rows(); ++i) {
        double s = w.b2;
        for (std::size_t k = 0; k < hidden.cols(); ++k)
            s += hidden.at(i, k) * w.w2.at(k, 0);
        res.logits[i] = s;
    }
    res.probs = softmax_vec(res.logits);
    res.best_index = 0;
    for (std::size_t i = 1; i < res.probs.size(); ++i)
        if (res.probs[i] > res.probs[res.best_index]) res.best_index = i;
    res.best_box = boxes[res.best_index];
    return res;
}

std::vector<double> assign_labels(const std::vector<Box3>& boxes, const Box3& gt) {
    if (boxes.empty()) throw SizeError("need at least one box");
    std::size_t best = 0;
    double best_iou = -1.0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const double v = iou3d(boxes[i], gt);
        if (v > best_iou) {
            best_iou = v;
            best = i;
        }
    }
    std::vector<double> labels(boxes.size(), 0.0);
    labels[best] = 1.0;
    return labels;
}

double matching_loss(std::span<const double> logits, std::span<const double> labels) {
    if (logits.size() != labels.size()) throw ShapeError("logits/labels length mismatch");
    const std::size_t hot = check_one_hot(labels);
    return log_sum_exp(logits) - logits[hot];
}

std::vector<double> matching_loss_grad(std::span<const double> logits,
                                       std::span<const double> labels) {
    if (logits.size() != labels.size()) throw ShapeError("logits/labels length mismatch");
    check_one_hot(labels);
    std::vector<double> grad = softmax_vec(logits);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] -= labels[i];
    return grad;
}

double cls_loss(const Mat& sentence, const Mat& class_w,
                std::span<const double> class_b, std::size_t target_class) {
    if (sentence.rows() != 1) throw ShapeError("sentence embedding must be one row");
    if (class_w.rows() != sentence.cols() || class_b.size() != class_w.cols())
        throw ShapeError("classifier shapes do not match the sentence width");
    if (target_class >= class_w.cols()) throw ValueError("target class out of range");
    const Mat logits_m = add_row_bias(matmul(sentence, class_w), class_b);
    const auto logits = logits_m.row(0);
    return log_sum_exp(logits) - logits[target_class];
}

double det_loss_simplified(const ProposalSet& proposals, const Scene& scene,
                           std::span<const double> objectness) {
    if (scene.objects.empty()) throw ValueError("scene has no objects");
    const std::size_t m = proposals.count();
    if (objectness.size() != m)
        throw ShapeError("need one objectness prediction per proposal");
    if (m == 0) throw SizeError("no proposals");

    constexpr double tiny = 1e-12;
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const Vec3 p{proposals.points.at(i, 0), proposals.points.at(i, 1),
                     proposals.points.at(i, 2)};
        bool inside = false;
        std::size_t nearest = 0;
        double nearest_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < scene.objects.size(); ++o) {
            const auto& box = scene.objects[o].box;
            if (box.contains(p)) inside = true;
            const double dx = p.x - box.center.x;
            const double dy = p.y - box.center.y;
            const double dz = p.z - box.center.z;
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < nearest_d2) {
                nearest_d2 = d2;
                nearest = o;
            }
        }
        const double q = std::clamp(objectness[i], 0.0, 1.0);
        double term = inside ? -std::log(std::max(q, tiny))
                             : -std::log(std::max(1.0 - q, tiny));
        if (inside) {
            const auto& box = scene.objects[nearest].box;
            const auto& pbox = proposals.boxes[i];
            term += smooth_l1(pbox.center.x - box.center.x) +
                    smooth_l1(pbox.center.y - box.center.y) +
                    smooth_l1(pbox.center.z - box.center.z);
            term += std::fabs(std::log(pbox.size.x) - std::log(box.size.x)) +
                    std::fabs(std::log(pbox.size.y) - std::log(box.size.y)) +
                    std::fabs(std::log(pbox.size.z) - std::log(box.size.z));
        }
        total += term;
    }
    return total / static_cast<double>(m);
}

LossReport total_loss(double l_det, double l_match, double l_cls, double w_det,
                      double w_match, double w_cls) {
    LossReport r;
    r.l_det = l_det;
    r.l_match = l_match;
    r.l_cls = l_cls;
    r.w_det = w_det;
    r.w_match = w_match;
    r.w_cls = w_cls;
    r.l_total = w_det * l_det + w_match * l_match + w_cls * l_cls;
    return r;
}

double acc_at_iou(const std::vector<Box3>& pred, const std::vector<Box3>& gt,
                  double threshold) {
    if (pred.size() != gt.size()) throw ShapeError("prediction/gt length mismatch");
    if (pred.empty()) throw SizeError("nothing to evaluate");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ValueError("threshold must lie in (0, 1)");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (iou3d(pred[i], gt[i]) > threshold) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

InstanceGroups group_by_instance(const ProposalSet& proposals,
                                 const std::vector<SceneObject>& objects,
                                 const Mat& features, bool max_pool) {
    if (objects.empty()) throw ValueError("no gt objects");
    const std::size_t m = proposals.count();
    if (features.rows() != m) throw ShapeError("need one feature row per proposal");

    InstanceGroups groups;
    groups.proposal_instance.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Vec3 p{proposals.points.at(i, 0), proposals.points.at(i, 1),
                     proposals.points.at(i, 2)};
        std::optional<std::size_t> owner;
        double owner_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t o = 0; o < objects.size(); ++o) {
            if (!objects[o].box.contains(p)) continue;
            const double dx = p.x - objects[o].box.center.x;
            const double dy = p.y - objects[o].box.center.y;
            const double dz = p.z - objects[o].box.center.z;
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < owner_d2) {
                owner_d2 = d2;
                owner = o;
            }
        }
        if (owner) groups.proposal_instance[i] = objects[*owner].instance_id;
    }

    // Instances keep scene object order; only those with members appear.
    std::vector<std::vector<std::size_t>> members;
    for (const auto& obj : objects) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < m; ++i)
            if (groups.proposal_instance[i] &&
                *groups.proposal_instance[i] == obj.instance_id)
                rows.push_back(i);
        if (!rows.empty()) {
            groups.instance_ids.push_back(obj.instance_id);
            members.push_back(std::move(rows));
        }
    }
    if (groups.instance_ids.empty())
        throw ValueError("aggregation failed: no proposal lies inside any instance box");

    groups.aggregated = Mat(groups.instance_ids.size(), features.cols());
    for (std::size_t g = 0; g < members.size(); ++g)
        for (std::size_t c = 0; c < features.cols(); ++c) {
            if (max_pool) {
                double v = features.at(members[g][0], c);
                for (std::size_t r : members[g]) v = std::max(v, features.at(r, c));
                groups.aggregated.at(g, c) = v;
            } else {
                double v = 0.0;
                for (std::size_t r : members[g]) v += features.at(r, c);
                groups.aggregated.at(g, c) = v / static_cast<double>(members[g].size());
            }
        }
    return groups;
}

std::uint32_t adapt_identification(const Box3& predicted_box,
                                   const ProposalSet& proposals,
                                   const std::vector<SceneObject>& objects,
                                   AdaptStrategy strategy, const Mat* features,
                                   const MatchMlpWeights* mlp) {
    if (objects.empty()) throw ValueError("no gt objects");

    switch (strategy) {
        case AdaptStrategy::CenterDistance: {
            std::size_t best = 0;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (std::size_t o = 0; o < objects.size(); ++o) {
                const double dx = predicted_box.center.x - objects[o].box.center.x;
                const double dy = predicted_box.center.y - objects[o].box.center.y;
                const double dz = predicted_box.center.z - objects[o].box.center.z;
                const double d2 = dx * dx + dy * dy + dz * dz;
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = o;
                }
            }
            return objects[best].instance_id;
        }
        case AdaptStrategy::IoU: {
            std::size_t best = 0;
            double best_iou = -1.0;
            for (std::size_t o = 0; o < objects.size(); ++o) {
                const double v = iou3d(predicted_box, objects[o].box);
                if (v > best_iou) {
                    best_iou = v;
                    best = o;
                }
            }
            return objects[best].instance_id;
        }
        case AdaptStrategy::MeanPool:
        case AdaptStrategy::MaxPool: {
            if (!features || !mlp)
                throw ValueError("pooling strategies need features and MLP weights");
            const InstanceGroups groups = group_by_instance(
                proposals, objects, *features, strategy == AdaptStrategy::MaxPool);
            std::vector<Box3> dummy(groups.instance_ids.size());
            const MatchResult res = match_scores(groups.aggregated, *mlp, dummy);
            return groups.instance_ids[res.best_index];
        }
    }
    throw ValueError("unknown strategy");
}

}  // namespace ham
