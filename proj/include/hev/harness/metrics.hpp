#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hev/kalman.hpp"
#include "hev/model.hpp"

namespace hev::harness {

double accuracy(std::span<const int> pred, std::span<const int> truth);

/// Unweighted mean of one-vs-rest F1 over `classes` classes (inferred from the
/// labels when 0). A class with no true and no predicted members scores 0.
double macro_f1(std::span<const int> pred, std::span<const int> truth, std::size_t classes = 0);

/// Contingency counts: table[p][t] = #{i : pred_i = p, truth_i = t}.
std::vector<std::vector<long>> contingency(std::span<const int> pred, std::span<const int> truth, std::size_t k);

/// Maximum-weight perfect matching on a square matrix (Hungarian algorithm).
/// Returns assignment[row] = column.
std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<long>>& weights);

/// Fraction of samples matched under the best one-to-one mapping of predicted
/// ids onto true labels. Ids must lie in [0, k); k <= 20.
double clustering_accuracy(std::span<const int> pred_clusters, std::span<const int> truth, std::size_t k);

/// Lloyd iterations with k-means++ seeding on the rows of `points`.
std::vector<int> kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, int max_iter = 100);

/// Clusters samples by their fused projected probabilities alpha / S.
std::vector<int> cluster_assignments(const MultiViewModel& model, const MultiViewBatch& batch, std::size_t k,
                                     std::uint64_t seed);

struct MetricsReport {
    double accuracy = 0.0;  // fused
    double macro_f1 = 0.0;  // fused
    std::optional<double> clustering_accuracy;
    std::vector<double> view_accuracy;  // over samples where the view is present
    std::vector<double> view_mean_uncertainty;
    double fused_mean_uncertainty = 0.0;
    double mean_off_label_evidence = 0.0;  // fused, evidence on classes other than the label
    std::vector<FilterPoint> smoothed_confidence;
    std::size_t clamped_readouts = 0;  // smoothed values outside [0, 1] that were clamped
};

struct EvaluateOptions {
    bool clustering = true;
    std::uint64_t cluster_seed = 0;
    bool use_kalman = false;
    KalmanConfig kalman;
};

MetricsReport evaluate(const MultiViewModel& model, const MultiViewBatch& batch, const EvaluateOptions& opts = {});

}  // namespace hev::harness
