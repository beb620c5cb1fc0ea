#include "hev/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "hev/errors.hpp"

namespace hev::harness {

namespace {

void require_same_length(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw ShapeError("prediction and truth lengths differ");
}

std::size_t label_count(std::span<const int> a, std::span<const int> b) {
    int top = -1;
    for (int v : a) top = std::max(top, v);
    for (int v : b) top = std::max(top, v);
    return static_cast<std::size_t>(top + 1);
}

}  // namespace

double accuracy(std::span<const int> pred, std::span<const int> truth) {
    require_same_length(pred, truth);
    if (pred.empty()) return 0.0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double macro_f1(std::span<const int> pred, std::span<const int> truth, std::size_t classes) {
    require_same_length(pred, truth);
    if (classes == 0) classes = label_count(pred, truth);
    if (classes == 0) return 0.0;
    std::vector<long> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(pred[i]) >= classes ||
            static_cast<std::size_t>(truth[i]) >= classes) {
            throw ShapeError("macro_f1: label out of range");
        }
        if (pred[i] == truth[i]) {
            ++tp[pred[i]];
        } else {
            ++fp[pred[i]];
            ++fn[truth[i]];
        }
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double denom = 2.0 * tp[c] + fp[c] + fn[c];
        if (denom > 0.0) sum += 2.0 * tp[c] / denom;
    }
    return sum / static_cast<double>(classes);
}

std::vector<std::vector<long>> contingency(std::span<const int> pred, std::span<const int> truth, std::size_t k) {
    require_same_length(pred, truth);
    std::vector<std::vector<long>> table(k, std::vector<long>(k, 0));
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || truth[i] < 0 || static_cast<std::size_t>(pred[i]) >= k ||
            static_cast<std::size_t>(truth[i]) >= k) {
            throw ShapeError("contingency: id out of range");
        }
        ++table[pred[i]][truth[i]];
    }
    return table;
}

std::vector<std::size_t> max_weight_assignment(const std::vector<std::vector<long>>& weights) {
    const std::size_t n = weights.size();
    for (const auto& row : weights) {
        if (row.size() != n) throw ShapeError("assignment matrix must be square");
    }
    if (n == 0) return {};
    // Shortest augmenting path with potentials on cost = -weight (1-based).
    constexpr long kInf = std::numeric_limits<long>::max() / 4;
    std::vector<long> u(n + 1, 0), v(n + 1, 0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<long> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            long delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const long cur = -weights[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[match[j] - 1] = j - 1;
    return assignment;
}

double clustering_accuracy(std::span<const int> pred_clusters, std::span<const int> truth, std::size_t k) {
    if (k > 20) throw DomainError("clustering_accuracy: K > 20 is out of scope");
    require_same_length(pred_clusters, truth);
    if (pred_clusters.empty()) return 0.0;
    const auto table = contingency(pred_clusters, truth, k);
    const auto assign = max_weight_assignment(table);
    long matched = 0;
    for (std::size_t p = 0; p < k; ++p) matched += table[p][assign[p]];
    return static_cast<double>(matched) / static_cast<double>(pred_clusters.size());
}

std::vector<int> kmeans(const Eigen::MatrixXd& points, std::size_t k, std::uint64_t seed, int max_iter) {
    const auto n = static_cast<std::size_t>(points.rows());
    std::vector<int> ids(n, 0);
    if (k <= 1 || n == 0) return ids;
    k = std::min(k, n);

    std::mt19937_64 rng(seed);
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centers.row(0) = points.row(static_cast<Eigen::Index>(first(rng)));
    std::vector<double> d2(n);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (std::size_t j = 0; j < c; ++j) {
                best = std::min(best, (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(j))).squaredNorm());
            }
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (pick = 0; pick + 1 < n; ++pick) {
                target -= d2[pick];
                if (target <= 0.0) break;
            }
        } else {
            pick = first(rng);
        }
        centers.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(pick));
    }

    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::max();
            for (std::size_t j = 0; j < k; ++j) {
                const double d = (points.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(j))).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(j);
                }
            }
            changed = changed || ids[i] != best;
            ids[i] = best;
        }
        if (iter > 0 && !changed) break;
        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers.rows(), centers.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(ids[i]) += points.row(static_cast<Eigen::Index>(i));
            ++counts[ids[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) centers.row(static_cast<Eigen::Index>(j)) = sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(counts[j]);
        }
    }
    return ids;
}

std::vector<int> cluster_assignments(const MultiViewModel& model, const MultiViewBatch& batch, std::size_t k,
                                     std::uint64_t seed) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    if (k <= 1) return std::vector<int>(batch.size(), 0);
    const auto fw = forward(model, batch);
    Eigen::MatrixXd probs = fw.fused_alpha;
    for (Eigen::Index i = 0; i < n; ++i) probs.row(i) /= probs.row(i).sum();
    return kmeans(probs, k, seed);
}

MetricsReport evaluate(const MultiViewModel& model, const MultiViewBatch& batch, const EvaluateOptions& opts) {
    const auto pred = predict(model, batch, opts.use_kalman, opts.kalman);
    const auto fw = forward(model, batch);
    const std::size_t K = model.classes();
    MetricsReport r;
    r.accuracy = accuracy(pred.labels, batch.labels);
    r.macro_f1 = macro_f1(pred.labels, batch.labels, K);
    if (opts.clustering) {
        const auto ids = cluster_assignments(model, batch, K, opts.cluster_seed);
        r.clustering_accuracy = clustering_accuracy(ids, batch.labels, K);
    }

    const auto n = static_cast<Eigen::Index>(batch.size());
    for (std::size_t m = 0; m < model.view_count(); ++m) {
        const auto col = static_cast<Eigen::Index>(m);
        const auto labels = predict_view(model, batch, m);
        std::size_t present = 0;
        std::size_t hit = 0;
        double u_sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!batch.present(i, col)) continue;
            ++present;
            hit += labels[i] == batch.labels[i] ? 1 : 0;
            u_sum += static_cast<double>(K) / fw.view_alpha[m].row(i).sum();
        }
        r.view_accuracy.push_back(present ? static_cast<double>(hit) / static_cast<double>(present) : 0.0);
        r.view_mean_uncertainty.push_back(present ? u_sum / static_cast<double>(present) : 1.0);
    }

    double u_sum = 0.0;
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        u_sum += pred.fused[i].uncertainty();
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(K); ++k) {
            if (k != batch.labels[i]) off += fw.fused_alpha(i, k) - 1.0;
        }
    }
    r.fused_mean_uncertainty = n ? u_sum / static_cast<double>(n) : 0.0;
    r.mean_off_label_evidence = n ? off / static_cast<double>(n) : 0.0;

    r.smoothed_confidence = pred.smoothed;
    for (auto& p : r.smoothed_confidence) {
        if (p.x_hat < 0.0 || p.x_hat > 1.0) {
            p.x_hat = std::clamp(p.x_hat, 0.0, 1.0);
            ++r.clamped_readouts;
        }
    }
    return r;
}

}  // namespace hev::harness
