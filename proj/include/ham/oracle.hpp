#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ham/attention.hpp"
#include "ham/language.hpp"
#include "ham/mat.hpp"
#include "ham/sampling.hpp"
#include "ham/scene.hpp"
#include "ham/smgm.hpp"

// Slow, independently coded references used by the test suites and the
// oracle CLI command. Each recomputes its result from first principles
// rather than calling the production kernels.
namespace ham::oracle {

// O(n^2 L) greedy farthest-point order: at every step the minimum distance
// to the selected set is recomputed from scratch for every candidate.
std::vector<std::size_t> fps_brute_force(std::span<const double> feat, std::size_t l,
                                         std::size_t dim, std::size_t n,
                                         std::size_t start_id);

std::vector<std::size_t> dfps_brute_force(const PointCloud& cloud, std::size_t n,
                                          std::size_t start_id);
std::vector<std::size_t> ffps_brute_force(const PointCloud& cloud, std::size_t n,
                                          std::size_t start_id,
                                          const std::vector<double>& channel_weights);

// Scalar-loop GRU over raw arrays; shares nothing with gru_encode.
std::vector<std::vector<double>> gru_scalar(const std::vector<std::vector<double>>& x,
                                            const GruWeights& w);

// Naive single-head attention block (H must be 1 in `w`): direct loops and a
// long-double softmax.
Mat single_head_block(const Mat& x, const Mat& y, const MhaWeights& w);

// Long-double softmax of one row without the max shift trick.
std::vector<double> softmax_reference(std::span<const double> row);

// The local branch computed by physically splitting proposals and keys per
// region and running each region through an unmasked placm_block (language
// rows shared), then scattering rows back.
Mat smgm_split_reference(const Mat& proposals, const Mat& keys,
                         const LanguageEmbedding& lang, const PlacmWeights& local,
                         const SpacePartition& partition);

// Central finite differences of the matching loss at step h.
std::vector<double> finite_diff_matching_grad(std::span<const double> logits,
                                              std::span<const double> labels,
                                              double h);

// IoU via explicit corner arithmetic.
double iou_reference(const Box3& a, const Box3& b);

// Fraction of pairs above threshold, counted pair by pair.
double acc_reference(const std::vector<Box3>& pred, const std::vector<Box3>& gt,
                     double threshold);

// Per-proposal detection loss recomputed with separate passes per term.
double det_loss_reference(const ProposalSet& proposals, const Scene& scene,
                          std::span<const double> objectness);

}  // namespace ham::oracle
