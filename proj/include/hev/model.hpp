#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hev/dirichlet.hpp"
#include "hev/divergence.hpp"
#include "hev/evidence.hpp"
#include "hev/kalman.hpp"

namespace hev {

enum class RegularizerKind { PHD, KL };

// LabelMasked regularizes Dir(alpha~) with alpha~ = y + (1 - y) * alpha, so only
// off-label evidence is penalized. Raw regularizes Dir(alpha) itself.
enum class RegularizerTarget { LabelMasked, Raw };

std::string to_string(RegularizerKind kind);
std::string to_string(RegularizerTarget target);

struct TrainConfig {
    HolderConfig holder{2.0, 1.0};
    double lambda_max = 1.0;
    int anneal_epochs = 10;
    double learning_rate = 1e-2;
    int epochs = 30;
    std::size_t batch_size = 64;
    RegularizerKind regularizer = RegularizerKind::PHD;
    RegularizerTarget target = RegularizerTarget::LabelMasked;
    std::uint64_t seed = 0;

    void validate() const;

    /// lambda_max * min(1, epoch / anneal_epochs).
    double lambda_at(int epoch) const;
};

/// Samples with M views. `present(i, m)` is false when view m of sample i is missing;
/// feature rows of missing views are ignored.
struct MultiViewBatch {
    std::vector<Eigen::MatrixXd> views;  // each n x d_m
    std::vector<int> labels;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> present;  // n x M

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t view_count() const noexcept { return views.size(); }

    /// Throws ShapeError on inconsistent shapes, out-of-range labels, or a
    /// sample with every view missing.
    void validate(std::size_t num_classes) const;

    MultiViewBatch subset(std::span<const std::size_t> rows) const;

    static MultiViewBatch all_present(std::vector<Eigen::MatrixXd> views, std::vector<int> labels);
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // in x out
    Eigen::VectorXd bias;    // out
};

/// Evidential head: affine map (optionally through one tanh hidden layer)
/// followed by softplus, so evidence is non-negative for every input.
class EvidenceNetwork {
public:
    EvidenceNetwork(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes);

    /// Glorot-uniform weights, zero biases.
    void initialize(std::mt19937_64& rng);

    std::size_t input_dim() const noexcept { return layers_.front().weight.rows(); }
    std::size_t hidden_dim() const noexcept { return layers_.size() == 2 ? layers_.front().weight.cols() : 0; }
    std::size_t output_dim() const noexcept { return layers_.back().weight.cols(); }
    std::size_t parameter_count() const noexcept;

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }

    struct Trace {
        Eigen::MatrixXd input;
        Eigen::MatrixXd hidden;  // tanh activations (empty for affine heads)
        Eigen::MatrixXd logits;
    };

    Eigen::MatrixXd logits(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd evidence(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd evidence(const Eigen::MatrixXd& x, Trace& trace) const;

    /// Adds d(loss)/d(parameters) to `grad` (flat layout, size parameter_count()).
    void backward(const Trace& trace, const Eigen::MatrixXd& d_evidence, std::span<double> grad) const;

    /// Flat layout: per layer, weight in row-major order followed by bias.
    void write_parameters(std::span<double> out) const;
    void read_parameters(std::span<const double> in);

private:
    std::vector<DenseLayer> layers_;
};

/// Per-view evidential heads plus an optional pseudo-view head fed by the
/// concatenation of every view's features.
class MultiViewModel {
public:
    MultiViewModel(std::vector<std::size_t> view_dims, std::size_t classes, std::size_t hidden_dim, bool pseudo_view);

    void initialize(std::uint64_t seed);

    std::size_t classes() const noexcept { return classes_; }
    std::size_t view_count() const noexcept { return views_.size(); }
    const std::vector<EvidenceNetwork>& views() const noexcept { return views_; }
    std::vector<EvidenceNetwork>& views() noexcept { return views_; }
    const std::optional<EvidenceNetwork>& pseudo() const noexcept { return pseudo_; }
    std::optional<EvidenceNetwork>& pseudo() noexcept { return pseudo_; }

    std::size_t parameter_count() const noexcept;
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> params);

    /// Offset of each network's block in the flat parameter vector (views, then pseudo).
    std::vector<std::size_t> parameter_offsets() const;

    friend bool operator==(const MultiViewModel& a, const MultiViewModel& b);

private:
    std::size_t classes_;
    std::vector<EvidenceNetwork> views_;
    std::optional<EvidenceNetwork> pseudo_;
};

/// Concatenated features for the pseudo-view; missing views contribute zeros.
Eigen::MatrixXd pseudo_view_input(const MultiViewBatch& batch);

struct ForwardResult {
    std::vector<Eigen::MatrixXd> view_alpha;  // per view, n x K (rows of missing views are not meaningful)
    Eigen::MatrixXd fused_alpha;              // n x K
    std::vector<Opinion> fused;               // fused opinion per sample
    std::optional<Eigen::MatrixXd> pseudo_alpha;

    static DirichletParams row(const Eigen::MatrixXd& alpha, std::size_t i);
};

/// Per-view Dirichlets (alpha = softplus evidence + 1), their reduced-Dempster
/// fusion over present views mapped back to a Dirichlet, and the pseudo-view.
ForwardResult forward(const MultiViewModel& model, const MultiViewBatch& batch);

/// Fused evidence of two heads in evidence space, e1 + e2 + e1*e2/K. Equal to the
/// opinion-space reduced rule followed by opinion_to_dirichlet.
std::vector<double> fuse_evidence(std::span<const double> e1, std::span<const double> e2);

/// E_{mu ~ Dir(alpha)}[-log mu_y] = psi(S) - psi(alpha_y).
double expected_cross_entropy(const DirichletParams& d, int label);
std::vector<double> expected_cross_entropy_grad(const DirichletParams& d, int label);

/// Divergence of Dir(alpha~) (or Dir(alpha) for Raw target) from the uniform Dirichlet.
double regularizer(const DirichletParams& d, int label, RegularizerKind kind, const HolderConfig& cfg,
                   RegularizerTarget target = RegularizerTarget::LabelMasked);
std::vector<double> regularizer_grad(const DirichletParams& d, int label, RegularizerKind kind,
                                     const HolderConfig& cfg,
                                     RegularizerTarget target = RegularizerTarget::LabelMasked);

struct LossTerms {
    bool fused = true;
    bool views = true;
    bool pseudo = true;
};

/// Sample means of each piece; regularizer values are unweighted.
struct LossBreakdown {
    double fused_ce = 0.0;
    double fused_reg = 0.0;
    double view_ce = 0.0;
    double view_reg = 0.0;
    double pseudo_ce = 0.0;
    double pseudo_reg = 0.0;
    double lambda = 0.0;
};

struct LossResult {
    double loss = 0.0;
    LossBreakdown terms;
    std::vector<double> gradient;  // empty unless requested
};

/// Mean over samples of [fused + sum over present views + pseudo] terms, each
/// expected cross-entropy + lambda_t * regularizer.
LossResult total_loss(const MultiViewModel& model, const MultiViewBatch& batch, const TrainConfig& cfg, int epoch,
                      LossTerms terms = {}, bool with_gradient = true);

struct EpochMetrics {
    int epoch = 0;
    double loss = 0.0;
    double train_accuracy = 0.0;
    double lambda = 0.0;
};

struct TrainResult {
    MultiViewModel model;
    std::vector<EpochMetrics> trace;
};

/// Mini-batch Adam (beta 0.9/0.999, eps 1e-8) on total_loss. Deterministic for a
/// fixed cfg.seed. Throws NumericError on a non-finite loss or gradient.
TrainResult train(MultiViewModel model, const MultiViewBatch& data, const TrainConfig& cfg);

/// Index of the largest value, lowest index on ties.
std::size_t argmax(std::span<const double> values);

struct Prediction {
    std::vector<int> labels;
    std::vector<Opinion> fused;
    std::vector<bool> low_confidence;  // fused belief carries no evidence
    std::vector<double> true_mass;     // ds_bpa(1 - u, max projected probability).m_true per sample
    std::vector<FilterPoint> smoothed; // Kalman-filtered true_mass, empty when disabled
};

Prediction predict(const MultiViewModel& model, const MultiViewBatch& batch, bool use_kalman = false,
                   const KalmanConfig& kalman = {});

/// Per-view argmax labels (lowest index on ties).
std::vector<int> predict_view(const MultiViewModel& model, const MultiViewBatch& batch, std::size_t view);

void save_model(const MultiViewModel& model, std::ostream& out);
MultiViewModel load_model(std::istream& in);
void save_model(const MultiViewModel& model, const std::string& path);
MultiViewModel load_model(const std::string& path);

}  // namespace hev
