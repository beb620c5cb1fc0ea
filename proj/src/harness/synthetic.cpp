#include "hev/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hev/errors.hpp"

namespace hev::harness {

void SyntheticConfig::validate() const {
    if (classes < 1) throw ConfigError("data.classes", "must be >= 1");
    if (dims.empty()) throw ConfigError("data.dims", "need at least one view");
    for (std::size_t d : dims) {
        if (d < 1) throw ConfigError("data.dims", "every dimension must be >= 1");
    }
    if (informativeness.size() != dims.size()) throw ConfigError("data.informativeness", "needs one weight per view");
    for (double w : informativeness) {
        if (!(w >= 0.0)) throw ConfigError("data.informativeness", "weights must be >= 0");
    }
    if (!(separation >= 0.0)) throw ConfigError("data.separation", "must be >= 0");
    if (!(noise_std >= 0.0)) throw ConfigError("data.noise_std", "must be >= 0");
    if (n_train < 1) throw ConfigError("data.n_train", "must be >= 1");
    if (n_test < 1) throw ConfigError("data.n_test", "must be >= 1");
}

namespace {

MultiViewBatch draw(const std::vector<Eigen::MatrixXd>& centers, std::size_t classes, std::size_t n, double noise_std,
                    std::mt19937_64& rng) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % classes);
    std::shuffle(labels.begin(), labels.end(), rng);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Eigen::MatrixXd> views;
    for (const auto& c : centers) {
        Eigen::MatrixXd x(static_cast<Eigen::Index>(n), c.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = static_cast<Eigen::Index>(i);
            for (Eigen::Index j = 0; j < c.cols(); ++j) x(row, j) = c(labels[i], j) + noise_std * gauss(rng);
        }
        views.push_back(std::move(x));
    }
    return MultiViewBatch::all_present(std::move(views), std::move(labels));
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Eigen::MatrixXd> centers;
    for (std::size_t m = 0; m < cfg.views(); ++m) {
        const auto d = static_cast<Eigen::Index>(cfg.dims[m]);
        Eigen::MatrixXd c(static_cast<Eigen::Index>(cfg.classes), d);
        for (Eigen::Index k = 0; k < c.rows(); ++k) {
            for (Eigen::Index j = 0; j < d; ++j) c(k, j) = gauss(rng);
            const double norm = c.row(k).norm();
            if (norm > 0.0) c.row(k) *= cfg.separation * cfg.informativeness[m] / norm;
        }
        centers.push_back(std::move(c));
    }
    SyntheticData out;
    out.train = draw(centers, cfg.classes, cfg.n_train, cfg.noise_std, rng);
    out.test = draw(centers, cfg.classes, cfg.n_test, cfg.noise_std, rng);
    return out;
}

void CorruptionSpec::validate(std::size_t view_count) const {
    if (!(noise_sigma2 >= 0.0)) throw ConfigError("corrupt.sigma2", "must be >= 0");
    if (!(missing_rate >= 0.0 && missing_rate <= 1.0)) throw ConfigError("corrupt.eta", "must lie in [0, 1]");
    for (std::size_t v : target_views) {
        if (v >= view_count) throw ConfigError("corrupt.views", "view index " + std::to_string(v) + " out of range");
    }
}

MultiViewBatch corrupt(const MultiViewBatch& batch, const CorruptionSpec& spec, std::uint64_t seed) {
    spec.validate(batch.view_count());
    MultiViewBatch out = batch;
    if (spec.noise_sigma2 == 0.0 && spec.missing_rate == 0.0) return out;

    std::mt19937_64 rng(seed);
    const double sigma = std::sqrt(spec.noise_sigma2);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution drop(spec.missing_rate);
    const auto n = static_cast<Eigen::Index>(batch.size());

    if (spec.noise_sigma2 > 0.0) {
        for (std::size_t v : spec.target_views) {
            auto& x = out.views[v];
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) += sigma * gauss(rng);
            }
        }
    }
    if (spec.missing_rate > 0.0) {
        for (Eigen::Index i = 0; i < n; ++i) {
            std::vector<std::size_t> dropped;
            for (std::size_t v : spec.target_views) {
                const auto col = static_cast<Eigen::Index>(v);
                if (out.present(i, col) && drop(rng)) {
                    out.present(i, col) = false;
                    dropped.push_back(v);
                }
            }
            if (spec.keep_one_view && !dropped.empty() && !out.present.row(i).any()) {
                std::uniform_int_distribution<std::size_t> pick(0, dropped.size() - 1);
                out.present(i, static_cast<Eigen::Index>(dropped[pick(rng)])) = true;
            }
        }
    }
    return out;
}

}  // namespace hev::harness
