#include "hev/model.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hev/errors.hpp"
#include "hev/special.hpp"

namespace hev {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> row_vector(const Eigen::MatrixXd& m, std::size_t i) {
    std::vector<double> out(m.cols());
    for (Eigen::Index k = 0; k < m.cols(); ++k) out[k] = m(static_cast<Eigen::Index>(i), k);
    return out;
}

std::vector<double> masked_alpha(const DirichletParams& d, int label, RegularizerTarget target) {
    std::vector<double> a(d.alpha().begin(), d.alpha().end());
    if (target == RegularizerTarget::LabelMasked) a[static_cast<std::size_t>(label)] = 1.0;
    return a;
}

void require_label(const DirichletParams& d, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= d.size()) throw ShapeError("label out of range");
}

}  // namespace

std::string to_string(RegularizerKind kind) { return kind == RegularizerKind::PHD ? "phd" : "kl"; }

std::string to_string(RegularizerTarget target) { return target == RegularizerTarget::LabelMasked ? "masked" : "raw"; }

// ---------------------------------------------------------------------------
// Config and batch

void TrainConfig::validate() const {
    if (!(lambda_max >= 0.0 && lambda_max <= 1.0)) throw ConfigError("train.lambda_max", "must lie in [0, 1]");
    if (anneal_epochs < 1) throw ConfigError("train.anneal_epochs", "must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
    if (epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
}

double TrainConfig::lambda_at(int epoch) const {
    const double ramp = std::min(1.0, static_cast<double>(std::max(epoch, 0)) / static_cast<double>(anneal_epochs));
    return lambda_max * ramp;
}

void MultiViewBatch::validate(std::size_t num_classes) const {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (views.empty()) throw ShapeError("batch has no views");
    for (std::size_t m = 0; m < views.size(); ++m) {
        if (views[m].rows() != n) throw ShapeError("view " + std::to_string(m) + " row count differs from label count");
    }
    if (present.rows() != n || present.cols() != static_cast<Eigen::Index>(views.size())) {
        throw ShapeError("presence mask shape does not match batch");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
            throw ShapeError("label of sample " + std::to_string(i) + " out of range");
        }
        if (!present.row(i).any()) throw ShapeError("sample " + std::to_string(i) + " has every view missing");
    }
}

MultiViewBatch MultiViewBatch::subset(std::span<const std::size_t> rows) const {
    MultiViewBatch out;
    const auto r = static_cast<Eigen::Index>(rows.size());
    out.views.reserve(views.size());
    for (const auto& v : views) {
        Eigen::MatrixXd sub(r, v.cols());
        for (Eigen::Index i = 0; i < r; ++i) sub.row(i) = v.row(static_cast<Eigen::Index>(rows[i]));
        out.views.push_back(std::move(sub));
    }
    out.labels.resize(rows.size());
    out.present.resize(r, present.cols());
    for (Eigen::Index i = 0; i < r; ++i) {
        out.labels[i] = labels[rows[i]];
        out.present.row(i) = present.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

MultiViewBatch MultiViewBatch::all_present(std::vector<Eigen::MatrixXd> views, std::vector<int> labels) {
    MultiViewBatch b;
    b.present.setConstant(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(views.size()), true);
    b.views = std::move(views);
    b.labels = std::move(labels);
    return b;
}

// ---------------------------------------------------------------------------
// Evidence network

EvidenceNetwork::EvidenceNetwork(std::size_t input_dim, std::size_t hidden_dim, std::size_t classes) {
    if (input_dim == 0 || classes == 0) throw ShapeError("evidence network needs non-zero input and output sizes");
    const auto in = static_cast<Eigen::Index>(input_dim);
    const auto out = static_cast<Eigen::Index>(classes);
    if (hidden_dim == 0) {
        layers_.push_back({Eigen::MatrixXd::Zero(in, out), Eigen::VectorXd::Zero(out)});
    } else {
        const auto h = static_cast<Eigen::Index>(hidden_dim);
        layers_.push_back({Eigen::MatrixXd::Zero(in, h), Eigen::VectorXd::Zero(h)});
        layers_.push_back({Eigen::MatrixXd::Zero(h, out), Eigen::VectorXd::Zero(out)});
    }
}

void EvidenceNetwork::initialize(std::mt19937_64& rng) {
    for (auto& layer : layers_) {
        const double s = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
        std::uniform_real_distribution<double> u(-s, s);
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = u(rng);
        }
        layer.bias.setZero();
    }
}

std::size_t EvidenceNetwork::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

Eigen::MatrixXd EvidenceNetwork::logits(const Eigen::MatrixXd& x) const {
    Trace t;
    evidence(x, t);
    return t.logits;
}

Eigen::MatrixXd EvidenceNetwork::evidence(const Eigen::MatrixXd& x) const {
    Trace t;
    return evidence(x, t);
}

Eigen::MatrixXd EvidenceNetwork::evidence(const Eigen::MatrixXd& x, Trace& trace) const {
    if (static_cast<std::size_t>(x.cols()) != input_dim()) throw ShapeError("evidence network input width mismatch");
    trace.input = x;
    if (layers_.size() == 2) {
        trace.hidden = ((x * layers_[0].weight).rowwise() + layers_[0].bias.transpose()).array().tanh().matrix();
        trace.logits = (trace.hidden * layers_[1].weight).rowwise() + layers_[1].bias.transpose();
    } else {
        trace.hidden.resize(0, 0);
        trace.logits = (x * layers_[0].weight).rowwise() + layers_[0].bias.transpose();
    }
    return trace.logits.unaryExpr([](double z) { return softplus(z); });
}

void EvidenceNetwork::backward(const Trace& trace, const Eigen::MatrixXd& d_evidence, std::span<double> grad) const {
    if (grad.size() != parameter_count()) throw ShapeError("gradient buffer has wrong size");
    const Eigen::MatrixXd d_logits = d_evidence.cwiseProduct(trace.logits.unaryExpr([](double z) { return sigmoid(z); }));

    auto accumulate = [](const Eigen::MatrixXd& input, const Eigen::MatrixXd& d_out, double* dst) {
        const Eigen::MatrixXd dw = input.transpose() * d_out;
        for (Eigen::Index r = 0; r < dw.rows(); ++r) {
            for (Eigen::Index c = 0; c < dw.cols(); ++c) *dst++ += dw(r, c);
        }
        const Eigen::VectorXd db = d_out.colwise().sum().transpose();
        for (Eigen::Index c = 0; c < db.size(); ++c) *dst++ += db(c);
        return dst;
    };

    double* dst = grad.data();
    if (layers_.size() == 2) {
        const Eigen::MatrixXd d_hidden = (d_logits * layers_[1].weight.transpose())
                                             .cwiseProduct((1.0 - trace.hidden.array().square()).matrix());
        dst = accumulate(trace.input, d_hidden, dst);
        accumulate(trace.hidden, d_logits, dst);
    } else {
        accumulate(trace.input, d_logits, dst);
    }
}

void EvidenceNetwork::write_parameters(std::span<double> out) const {
    if (out.size() != parameter_count()) throw ShapeError("parameter buffer has wrong size");
    double* dst = out.data();
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) *dst++ = l.weight(r, c);
        }
        for (Eigen::Index c = 0; c < l.bias.size(); ++c) *dst++ = l.bias(c);
    }
}

void EvidenceNetwork::read_parameters(std::span<const double> in) {
    if (in.size() != parameter_count()) throw ShapeError("parameter buffer has wrong size");
    const double* src = in.data();
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = *src++;
        }
        for (Eigen::Index c = 0; c < l.bias.size(); ++c) l.bias(c) = *src++;
    }
}

// ---------------------------------------------------------------------------
// Multi-view model

MultiViewModel::MultiViewModel(std::vector<std::size_t> view_dims, std::size_t classes, std::size_t hidden_dim,
                               bool pseudo_view)
    : classes_(classes) {
    if (view_dims.empty()) throw ShapeError("model needs at least one view");
    if (classes < 2) throw ShapeError("model needs at least two classes");
    std::size_t total = 0;
    for (std::size_t d : view_dims) {
        views_.emplace_back(d, hidden_dim, classes);
        total += d;
    }
    if (pseudo_view) pseudo_.emplace(total, hidden_dim, classes);
}

void MultiViewModel::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& v : views_) v.initialize(rng);
    if (pseudo_) pseudo_->initialize(rng);
}

std::size_t MultiViewModel::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& v : views_) n += v.parameter_count();
    if (pseudo_) n += pseudo_->parameter_count();
    return n;
}

std::vector<std::size_t> MultiViewModel::parameter_offsets() const {
    std::vector<std::size_t> offsets;
    std::size_t at = 0;
    for (const auto& v : views_) {
        offsets.push_back(at);
        at += v.parameter_count();
    }
    if (pseudo_) offsets.push_back(at);
    return offsets;
}

std::vector<double> MultiViewModel::parameters() const {
    std::vector<double> out(parameter_count());
    const auto offsets = parameter_offsets();
    for (std::size_t m = 0; m < views_.size(); ++m) {
        views_[m].write_parameters({out.data() + offsets[m], views_[m].parameter_count()});
    }
    if (pseudo_) pseudo_->write_parameters({out.data() + offsets.back(), pseudo_->parameter_count()});
    return out;
}

void MultiViewModel::set_parameters(std::span<const double> params) {
    if (params.size() != parameter_count()) throw ShapeError("parameter vector has wrong size");
    const auto offsets = parameter_offsets();
    for (std::size_t m = 0; m < views_.size(); ++m) {
        views_[m].read_parameters(params.subspan(offsets[m], views_[m].parameter_count()));
    }
    if (pseudo_) pseudo_->read_parameters(params.subspan(offsets.back(), pseudo_->parameter_count()));
}

bool operator==(const MultiViewModel& a, const MultiViewModel& b) {
    if (a.classes_ != b.classes_ || a.views_.size() != b.views_.size() || a.pseudo_.has_value() != b.pseudo_.has_value()) {
        return false;
    }
    auto same_shape = [](const EvidenceNetwork& x, const EvidenceNetwork& y) {
        return x.input_dim() == y.input_dim() && x.hidden_dim() == y.hidden_dim() && x.output_dim() == y.output_dim();
    };
    for (std::size_t m = 0; m < a.views_.size(); ++m) {
        if (!same_shape(a.views_[m], b.views_[m])) return false;
    }
    if (a.pseudo_ && !same_shape(*a.pseudo_, *b.pseudo_)) return false;
    return a.parameters() == b.parameters();
}

Eigen::MatrixXd pseudo_view_input(const MultiViewBatch& batch) {
    Eigen::Index total = 0;
    for (const auto& v : batch.views) total += v.cols();
    const auto n = static_cast<Eigen::Index>(batch.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, total);
    Eigen::Index col = 0;
    for (std::size_t m = 0; m < batch.views.size(); ++m) {
        const auto& v = batch.views[m];
        for (Eigen::Index i = 0; i < n; ++i) {
            if (batch.present(i, static_cast<Eigen::Index>(m))) out.block(i, col, 1, v.cols()) = v.row(i);
        }
        col += v.cols();
    }
    return out;
}

DirichletParams ForwardResult::row(const Eigen::MatrixXd& alpha, std::size_t i) {
    return DirichletParams(row_vector(alpha, i));
}

namespace {

void check_model_batch(const MultiViewModel& model, const MultiViewBatch& batch) {
    if (batch.view_count() != model.view_count()) throw ShapeError("batch view count differs from model");
    for (std::size_t m = 0; m < model.view_count(); ++m) {
        if (static_cast<std::size_t>(batch.views[m].cols()) != model.views()[m].input_dim()) {
            throw ShapeError("view " + std::to_string(m) + " feature width differs from model");
        }
    }
    batch.validate(model.classes());
}

Opinion fused_opinion(const std::vector<Eigen::MatrixXd>& view_alpha, const MultiViewBatch& batch, std::size_t i) {
    std::vector<Opinion> ops;
    for (std::size_t m = 0; m < view_alpha.size(); ++m) {
        if (batch.present(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m))) {
            ops.push_back(dirichlet_to_opinion(ForwardResult::row(view_alpha[m], i)));
        }
    }
    return ds_combine_multi(ops);
}

}  // namespace

ForwardResult forward(const MultiViewModel& model, const MultiViewBatch& batch) {
    check_model_batch(model, batch);
    const std::size_t n = batch.size();
    const auto K = static_cast<Eigen::Index>(model.classes());
    ForwardResult out;
    for (std::size_t m = 0; m < model.view_count(); ++m) {
        out.view_alpha.push_back(model.views()[m].evidence(batch.views[m]).array() + 1.0);
    }
    out.fused_alpha.resize(static_cast<Eigen::Index>(n), K);
    out.fused.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.fused.push_back(fused_opinion(out.view_alpha, batch, i));
        const auto d = opinion_to_dirichlet(out.fused.back());
        for (Eigen::Index k = 0; k < K; ++k) out.fused_alpha(static_cast<Eigen::Index>(i), k) = d[k];
    }
    if (model.pseudo()) out.pseudo_alpha = model.pseudo()->evidence(pseudo_view_input(batch)).array() + 1.0;
    return out;
}

std::vector<double> fuse_evidence(std::span<const double> e1, std::span<const double> e2) {
    if (e1.size() != e2.size()) throw ShapeError("fuse_evidence: size mismatch");
    const auto K = static_cast<double>(e1.size());
    std::vector<double> out(e1.size());
    for (std::size_t k = 0; k < e1.size(); ++k) out[k] = e1[k] + e2[k] + e1[k] * e2[k] / K;
    return out;
}

// ---------------------------------------------------------------------------
// Loss pieces

double expected_cross_entropy(const DirichletParams& d, int label) {
    require_label(d, label);
    return digamma(d.strength()) - digamma(d[static_cast<std::size_t>(label)]);
}

std::vector<double> expected_cross_entropy_grad(const DirichletParams& d, int label) {
    require_label(d, label);
    const double t = trigamma(d.strength());
    std::vector<double> g(d.size(), t);
    g[static_cast<std::size_t>(label)] -= trigamma(d[static_cast<std::size_t>(label)]);
    return g;
}

double regularizer(const DirichletParams& d, int label, RegularizerKind kind, const HolderConfig& cfg,
                   RegularizerTarget target) {
    require_label(d, label);
    const DirichletParams tilde(masked_alpha(d, label, target));
    const auto prior = DirichletParams::uniform(d.size());
    return kind == RegularizerKind::PHD ? phd_closed(cfg, tilde, prior) : kl_dirichlet(tilde, prior);
}

std::vector<double> regularizer_grad(const DirichletParams& d, int label, RegularizerKind kind,
                                     const HolderConfig& cfg, RegularizerTarget target) {
    require_label(d, label);
    const DirichletParams tilde(masked_alpha(d, label, target));
    const auto prior = DirichletParams::uniform(d.size());
    auto g = kind == RegularizerKind::PHD ? phd_closed_grad_p(cfg, tilde, prior) : kl_dirichlet_grad_p(tilde, prior);
    if (target == RegularizerTarget::LabelMasked) g[static_cast<std::size_t>(label)] = 0.0;
    return g;
}

LossResult total_loss(const MultiViewModel& model, const MultiViewBatch& batch, const TrainConfig& cfg, int epoch,
                      LossTerms terms, bool with_gradient) {
    check_model_batch(model, batch);
    const std::size_t n = batch.size();
    const std::size_t M = model.view_count();
    const std::size_t K = model.classes();
    const double lambda = cfg.lambda_at(epoch);

    std::vector<EvidenceNetwork::Trace> traces(M);
    std::vector<Eigen::MatrixXd> evidence(M);
    std::vector<Eigen::MatrixXd> d_evidence(M);
    for (std::size_t m = 0; m < M; ++m) {
        evidence[m] = model.views()[m].evidence(batch.views[m], traces[m]);
        d_evidence[m] = Eigen::MatrixXd::Zero(evidence[m].rows(), evidence[m].cols());
    }
    const bool use_pseudo = terms.pseudo && model.pseudo().has_value();
    EvidenceNetwork::Trace pseudo_trace;
    Eigen::MatrixXd pseudo_evidence;
    Eigen::MatrixXd d_pseudo;
    if (use_pseudo) {
        pseudo_evidence = model.pseudo()->evidence(pseudo_view_input(batch), pseudo_trace);
        d_pseudo = Eigen::MatrixXd::Zero(pseudo_evidence.rows(), pseudo_evidence.cols());
    }

    LossResult result;
    LossBreakdown& br = result.terms;
    br.lambda = lambda;
    const double inv_n = 1.0 / static_cast<double>(n);

    // Adds one head's expected cross-entropy + lambda * regularizer and, when
    // requested, writes d(term)/d(alpha) into d_alpha.
    auto head = [&](const DirichletParams& d, int y, std::size_t sample, double& ce_acc, double& reg_acc,
                    std::vector<double>* d_alpha) {
        ce_acc += expected_cross_entropy(d, y);
        double reg = 0.0;
        try {
            reg = regularizer(d, y, cfg.regularizer, cfg.holder, cfg.target);
        } catch (const DomainError& e) {
            throw DomainError(std::string(e.what()) + " (sample " + std::to_string(sample) + ", epoch " +
                              std::to_string(epoch) + ")");
        }
        reg_acc += reg;
        if (d_alpha != nullptr) {
            *d_alpha = expected_cross_entropy_grad(d, y);
            if (lambda != 0.0) {
                const auto gr = regularizer_grad(d, y, cfg.regularizer, cfg.holder, cfg.target);
                for (std::size_t k = 0; k < K; ++k) (*d_alpha)[k] += lambda * gr[k];
            }
        }
    };

    std::vector<double> d_alpha;
    std::vector<double>* d_alpha_ptr = with_gradient ? &d_alpha : nullptr;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = batch.labels[i];
        const auto row = static_cast<Eigen::Index>(i);
        std::vector<std::size_t> present;
        for (std::size_t m = 0; m < M; ++m) {
            if (batch.present(row, static_cast<Eigen::Index>(m))) present.push_back(m);
        }

        if (terms.views) {
            for (std::size_t m : present) {
                std::vector<double> alpha = row_vector(evidence[m], i);
                for (double& a : alpha) a += 1.0;
                head(DirichletParams(std::move(alpha)), y, i, br.view_ce, br.view_reg, d_alpha_ptr);
                if (with_gradient) {
                    for (std::size_t k = 0; k < K; ++k) d_evidence[m](row, static_cast<Eigen::Index>(k)) += d_alpha[k];
                }
            }
        }

        if (terms.fused) {
            std::vector<Opinion> ops;
            for (std::size_t m : present) {
                std::vector<double> alpha = row_vector(evidence[m], i);
                for (double& a : alpha) a += 1.0;
                ops.push_back(dirichlet_to_opinion(DirichletParams(std::move(alpha))));
            }
            const auto fused = opinion_to_dirichlet(ds_combine_multi(ops));
            head(fused, y, i, br.fused_ce, br.fused_reg, d_alpha_ptr);
            if (with_gradient) {
                // Back through the evidence-space fold acc_j = acc_{j-1} + e + acc_{j-1} * e / K.
                std::vector<std::vector<double>> acc{row_vector(evidence[present[0]], i)};
                for (std::size_t j = 1; j < present.size(); ++j) {
                    acc.push_back(fuse_evidence(acc.back(), row_vector(evidence[present[j]], i)));
                }
                std::vector<double> g = d_alpha;
                const auto kd = static_cast<double>(K);
                for (std::size_t j = present.size() - 1; j >= 1; --j) {
                    const auto e = row_vector(evidence[present[j]], i);
                    const auto& prev = acc[j - 1];
                    for (std::size_t k = 0; k < K; ++k) {
                        d_evidence[present[j]](row, static_cast<Eigen::Index>(k)) += g[k] * (1.0 + prev[k] / kd);
                        g[k] *= 1.0 + e[k] / kd;
                    }
                }
                for (std::size_t k = 0; k < K; ++k) d_evidence[present[0]](row, static_cast<Eigen::Index>(k)) += g[k];
            }
        }

        if (use_pseudo) {
            std::vector<double> alpha = row_vector(pseudo_evidence, i);
            for (double& a : alpha) a += 1.0;
            head(DirichletParams(std::move(alpha)), y, i, br.pseudo_ce, br.pseudo_reg, d_alpha_ptr);
            if (with_gradient) {
                for (std::size_t k = 0; k < K; ++k) d_pseudo(row, static_cast<Eigen::Index>(k)) += d_alpha[k];
            }
        }
    }

    br.fused_ce *= inv_n;
    br.fused_reg *= inv_n;
    br.view_ce *= inv_n;
    br.view_reg *= inv_n;
    br.pseudo_ce *= inv_n;
    br.pseudo_reg *= inv_n;
    result.loss = (br.fused_ce + lambda * br.fused_reg) + (br.view_ce + lambda * br.view_reg) +
                  (br.pseudo_ce + lambda * br.pseudo_reg);

    if (with_gradient) {
        result.gradient.assign(model.parameter_count(), 0.0);
        const auto offsets = model.parameter_offsets();
        for (std::size_t m = 0; m < M; ++m) {
            d_evidence[m] *= inv_n;
            model.views()[m].backward(traces[m], d_evidence[m],
                                      {result.gradient.data() + offsets[m], model.views()[m].parameter_count()});
        }
        if (use_pseudo) {
            d_pseudo *= inv_n;
            model.pseudo()->backward(pseudo_trace, d_pseudo,
                                     {result.gradient.data() + offsets.back(), model.pseudo()->parameter_count()});
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(MultiViewModel model, const MultiViewBatch& data, const TrainConfig& cfg) {
    cfg.validate();
    check_model_batch(model, data);
    TrainResult result{std::move(model), {}};
    if (cfg.epochs == 0) return result;

    constexpr double kBeta1 = 0.9;
    constexpr double kBeta2 = 0.999;
    constexpr double kEps = 1e-8;

    std::vector<double> params = result.model.parameters();
    std::vector<double> m1(params.size(), 0.0);
    std::vector<double> m2(params.size(), 0.0);
    long step = 0;

    std::mt19937_64 rng(cfg.seed ^ 0x5eedf00dULL);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            const auto rows = std::span<const std::size_t>(order).subspan(start, stop - start);
            const auto batch = data.subset(rows);
            const auto res = total_loss(result.model, batch, cfg, epoch);
            if (!std::isfinite(res.loss)) {
                const auto& t = res.terms;
                const char* term = !std::isfinite(t.fused_ce + t.fused_reg)   ? "fused"
                                   : !std::isfinite(t.view_ce + t.view_reg)   ? "view"
                                                                              : "pseudo";
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ", term " + term);
            }
            for (double g : res.gradient) {
                if (!std::isfinite(g)) {
                    throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                                       std::to_string(batch_index));
                }
            }
            loss_sum += res.loss * static_cast<double>(rows.size());

            ++step;
            const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            for (std::size_t j = 0; j < params.size(); ++j) {
                const double g = res.gradient[j];
                m1[j] = kBeta1 * m1[j] + (1.0 - kBeta1) * g;
                m2[j] = kBeta2 * m2[j] + (1.0 - kBeta2) * g * g;
                params[j] -= cfg.learning_rate * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + kEps);
            }
            result.model.set_parameters(params);
        }

        const auto pred = predict(result.model, data);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < data.size(); ++i) correct += pred.labels[i] == data.labels[i] ? 1 : 0;
        result.trace.push_back({epoch, loss_sum / static_cast<double>(data.size()),
                                static_cast<double>(correct) / static_cast<double>(data.size()), cfg.lambda_at(epoch)});
    }
    return result;
}

// ---------------------------------------------------------------------------
// Prediction

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[best]) best = k;
    }
    return best;
}

Prediction predict(const MultiViewModel& model, const MultiViewBatch& batch, bool use_kalman,
                   const KalmanConfig& kalman) {
    auto fw = forward(model, batch);
    Prediction out;
    const std::size_t n = batch.size();
    const auto K = static_cast<double>(model.classes());
    out.labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Opinion& op = fw.fused[i];
        const auto b = op.beliefs();
        const bool degenerate = *std::max_element(b.begin(), b.end()) <= 0.0;
        std::size_t label = argmax(b);
        if (degenerate) label = argmax(row_vector(fw.fused_alpha, i));
        out.labels.push_back(static_cast<int>(label));
        out.low_confidence.push_back(degenerate);

        double max_prob = 0.0;
        for (double bk : b) max_prob = std::max(max_prob, bk + op.uncertainty() / K);
        max_prob = std::clamp(max_prob, 0.0, 1.0);
        const double belief = std::clamp(1.0 - op.uncertainty(), 0.0, 1.0);
        out.true_mass.push_back(ds_bpa(belief, max_prob).m_true);
    }
    out.fused = std::move(fw.fused);
    if (use_kalman && !out.true_mass.empty()) {
        out.smoothed = filter_sequence(initial_state(kalman, out.true_mass.front()), out.true_mass);
    }
    return out;
}

std::vector<int> predict_view(const MultiViewModel& model, const MultiViewBatch& batch, std::size_t view) {
    if (view >= model.view_count()) throw ShapeError("view index out of range");
    const auto ev = model.views()[view].evidence(batch.views[view]);
    std::vector<int> out(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) out[i] = static_cast<int>(argmax(row_vector(ev, i)));
    return out;
}

// ---------------------------------------------------------------------------
// Serialization: "KPHD", u32 version, u32 K, u32 M, u32 network count, per
// network u32 layer count and (u32 in, u32 out) per layer, then every
// parameter as a little-endian float64 in the flat (row-major) layout.

namespace {

constexpr char kMagic[4] = {'K', 'P', 'H', 'D'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char buf[4];
    for (int b = 0; b < 4; ++b) buf[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
    out.write(buf, 4);
}

void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xffu);
    out.write(buf, 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) throw ShapeError("model file truncated");
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(buf[b]) << (8 * b);
    return v;
}

double get_f64(std::istream& in) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) throw ShapeError("model file truncated");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace

void save_model(const MultiViewModel& model, std::ostream& out) {
    out.write(kMagic, 4);
    put_u32(out, kFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(model.classes()));
    put_u32(out, static_cast<std::uint32_t>(model.view_count()));
    std::vector<const EvidenceNetwork*> nets;
    for (const auto& v : model.views()) nets.push_back(&v);
    if (model.pseudo()) nets.push_back(&*model.pseudo());
    put_u32(out, static_cast<std::uint32_t>(nets.size()));
    for (const auto* net : nets) {
        put_u32(out, static_cast<std::uint32_t>(net->layers().size()));
        for (const auto& l : net->layers()) {
            put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
            put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
        }
    }
    for (double v : model.parameters()) put_f64(out, v);
    if (!out) throw std::runtime_error("failed to write model");
}

MultiViewModel load_model(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw ShapeError("not a model file (bad magic)");
    const auto version = get_u32(in);
    if (version != kFormatVersion) throw ShapeError("unsupported model format version " + std::to_string(version));
    const auto K = get_u32(in);
    const auto M = get_u32(in);
    const auto net_count = get_u32(in);
    if (net_count != M && net_count != M + 1) throw ShapeError("model file network count inconsistent with views");

    std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> shapes(net_count);
    for (auto& s : shapes) {
        const auto layers = get_u32(in);
        if (layers != 1 && layers != 2) throw ShapeError("model file layer count must be 1 or 2");
        for (std::uint32_t l = 0; l < layers; ++l) {
            const auto rows = get_u32(in);
            const auto cols = get_u32(in);
            s.emplace_back(rows, cols);
        }
    }
    const std::size_t hidden = shapes.front().size() == 2 ? shapes.front().front().second : 0;
    std::vector<std::size_t> dims;
    for (std::uint32_t m = 0; m < M; ++m) dims.push_back(shapes[m].front().first);
    MultiViewModel model(dims, K, hidden, net_count == M + 1);

    auto matches = [](const EvidenceNetwork& net, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& s) {
        if (net.layers().size() != s.size()) return false;
        for (std::size_t l = 0; l < s.size(); ++l) {
            if (net.layers()[l].weight.rows() != s[l].first || net.layers()[l].weight.cols() != s[l].second) return false;
        }
        return true;
    };
    for (std::uint32_t m = 0; m < M; ++m) {
        if (!matches(model.views()[m], shapes[m])) throw ShapeError("model file layer dims inconsistent");
    }
    if (model.pseudo() && !matches(*model.pseudo(), shapes.back())) throw ShapeError("model file layer dims inconsistent");

    std::vector<double> params(model.parameter_count());
    for (double& v : params) v = get_f64(in);
    model.set_parameters(params);
    return model;
}

void save_model(const MultiViewModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_model(model, out);
}

MultiViewModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_model(in);
}

}  // namespace hev
