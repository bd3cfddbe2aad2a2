#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ham/mat.hpp"
#include "ham/rng.hpp"
#include "ham/sampling.hpp"
#include "ham/scene.hpp"
#include "ham/tensor_io.hpp"

namespace ham {

// Two-layer matching MLP (C -> C -> 1, rectified linear hidden).
struct MatchMlpWeights {
    Mat w1;  // C x C
    std::vector<double> b1;
    Mat w2;  // C x 1
    double b2 = 0.0;

    static MatchMlpWeights random(std::size_t c, Rng& rng);
    void put(TensorFile& file, const std::string& prefix) const;
    static MatchMlpWeights from_file(const TensorFile& file, const std::string& prefix);
};

struct MatchResult {
    std::vector<double> logits;
    std::vector<double> probs;  // softmax of logits
    std::size_t best_index = 0;
    Box3 best_box;
};

// Per-proposal logit, softmax, and argmax with lowest-index tie-break.
// `boxes` supplies best_box; pass the proposal boxes.
MatchResult match_scores(const Mat& fused, const MatchMlpWeights& w,
                         const std::vector<Box3>& boxes);

// One-hot vector marking the proposal box with the highest IoU against gt;
// ties (including the all-zero-IoU case) resolve to the lowest index.
std::vector<double> assign_labels(const std::vector<Box3>& boxes, const Box3& gt);

// Softmax cross-entropy of one-hot labels against logits, via log-sum-exp.
double matching_loss(std::span<const double> logits, std::span<const double> labels);

// Analytic gradient: softmax(logits) - labels.
std::vector<double> matching_loss_grad(std::span<const double> logits,
                                       std::span<const double> labels);

// Linear classifier on the sentence embedding. class_w is C x K, class_b
// length K.
double cls_loss(const Mat& sentence, const Mat& class_w,
                std::span<const double> class_b, std::size_t target_class);

// Mean over proposals of objectness BCE (positive iff the proposal point is
// inside any gt box), plus, for positives, smooth-L1 on the center offset to
// the nearest gt center and L1 on the per-axis log-size residual against
// that object.
double det_loss_simplified(const ProposalSet& proposals, const Scene& scene,
                           std::span<const double> objectness);

struct LossReport {
    double l_match = 0.0;
    double l_det = 0.0;
    double l_cls = 0.0;
    double l_total = 0.0;
    double w_det = 10.0;
    double w_match = 0.1;
    double w_cls = 0.1;
};

LossReport total_loss(double l_det, double l_match, double l_cls, double w_det = 10.0,
                      double w_match = 0.1, double w_cls = 0.1);

// Fraction of pairs with IoU strictly above the threshold.
double acc_at_iou(const std::vector<Box3>& pred, const std::vector<Box3>& gt,
                  double threshold);

enum class AdaptStrategy { CenterDistance, IoU, MeanPool, MaxPool };

struct InstanceGroups {
    // Per proposal: the instance whose box contains its point, if any.
    std::vector<std::optional<std::uint32_t>> proposal_instance;
    std::vector<std::uint32_t> instance_ids;  // G entries
    Mat aggregated;                           // G x C
};

// Containment-based grouping; a proposal inside several boxes goes to the
// one with the nearest center (lowest object index on ties). Proposals
// inside no box are dropped. `features` aggregates via elementwise mean or
// max over member rows.
InstanceGroups group_by_instance(const ProposalSet& proposals,
                                 const std::vector<SceneObject>& objects,
                                 const Mat& features, bool max_pool);

// Identification-paradigm adaptation: resolves a prediction to a gt instance
// id. CenterDistance/IoU compare predicted_box against the gt boxes;
// Mean/MaxPool aggregate proposal features per instance and rerun the
// matching MLP over the G instances.
std::uint32_t adapt_identification(const Box3& predicted_box,
                                   const ProposalSet& proposals,
                                   const std::vector<SceneObject>& objects,
                                   AdaptStrategy strategy,
                                   const Mat* features = nullptr,
                                   const MatchMlpWeights* mlp = nullptr);

}  // namespace ham
