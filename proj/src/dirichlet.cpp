#include "hev/dirichlet.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "hev/errors.hpp"
#include "hev/special.hpp"

namespace hev {

namespace {

constexpr double kSimplexSumTol = 1e-12;

}  // namespace

DirichletParams::DirichletParams(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.size() < 2) throw DomainError("Dirichlet order must be >= 2");
    for (std::size_t k = 0; k < alpha_.size(); ++k) {
        if (!(alpha_[k] > 0.0) || !std::isfinite(alpha_[k])) {
            throw DomainError("Dirichlet concentration alpha[" + std::to_string(k) +
                              "] must be finite and > 0, got " + std::to_string(alpha_[k]));
        }
    }
}

DirichletParams DirichletParams::uniform(std::size_t k) { return DirichletParams(std::vector<double>(k, 1.0)); }

DirichletParams DirichletParams::from_natural(const NaturalParams& theta) {
    std::vector<double> alpha(theta.theta().begin(), theta.theta().end());
    for (double& a : alpha) a += 1.0;
    return DirichletParams(std::move(alpha));
}

double DirichletParams::strength() const noexcept { return std::accumulate(alpha_.begin(), alpha_.end(), 0.0); }

NaturalParams DirichletParams::to_natural() const {
    std::vector<double> theta(alpha_);
    for (double& t : theta) t -= 1.0;
    return NaturalParams(std::move(theta));
}

NaturalParams::NaturalParams(std::vector<double> theta) : theta_(std::move(theta)) {
    if (theta_.size() < 2) throw DomainError("natural parameter must have >= 2 components");
    for (std::size_t k = 0; k < theta_.size(); ++k) {
        if (!(theta_[k] > -1.0) || !std::isfinite(theta_[k])) {
            throw DomainError("natural parameter theta[" + std::to_string(k) + "] must be > -1, got " +
                              std::to_string(theta_[k]));
        }
    }
}

double log_normalizer(std::span<const double> theta) {
    double sum_lg = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        const double a = theta[k] + 1.0;
        if (!(a > 0.0)) {
            throw DomainError("log_normalizer: theta[" + std::to_string(k) + "] = " + std::to_string(theta[k]) +
                              " is <= -1");
        }
        sum_lg += log_gamma(a);
        total += a;
    }
    return sum_lg - log_gamma(total);
}

double log_normalizer(const NaturalParams& theta) { return log_normalizer(theta.theta()); }

std::vector<double> log_normalizer_grad(std::span<const double> theta) {
    double total = 0.0;
    for (double t : theta) total += t + 1.0;
    const double psi_total = digamma(total);
    std::vector<double> g(theta.size());
    for (std::size_t k = 0; k < theta.size(); ++k) g[k] = digamma(theta[k] + 1.0) - psi_total;
    return g;
}

double log_pdf(const DirichletParams& d, std::span<const double> mu) {
    if (mu.size() != d.size()) throw DomainError("log_pdf: simplex point has wrong dimension");
    double sum = 0.0;
    for (double m : mu) {
        if (!(m > 0.0 && m < 1.0)) throw DomainError("log_pdf: point is not strictly interior to the simplex");
        sum += m;
    }
    if (std::abs(sum - 1.0) > kSimplexSumTol) throw DomainError("log_pdf: point does not sum to 1");
    const auto alpha = d.alpha();
    double acc = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) acc += (alpha[k] - 1.0) * std::log(mu[k]);
    return acc - log_normalizer(d.to_natural());
}

std::vector<double> expected_log_mu(const DirichletParams& d) {
    const double psi_s = digamma(d.strength());
    std::vector<double> out(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) out[k] = digamma(d[k]) - psi_s;
    return out;
}

std::vector<double> mean(const DirichletParams& d) {
    const double s = d.strength();
    std::vector<double> out(d.alpha().begin(), d.alpha().end());
    for (double& v : out) v /= s;
    return out;
}

void sample_into(const DirichletParams& d, std::mt19937_64& rng, std::span<double> out) {
    double total = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        std::gamma_distribution<double> g(d[k], 1.0);
        out[k] = g(rng);
        total += out[k];
    }
    for (double& v : out) v /= total;
}

void sample_uniform_simplex(std::mt19937_64& rng, std::span<double> out) {
    std::exponential_distribution<double> e(1.0);
    double total = 0.0;
    for (double& v : out) {
        v = e(rng);
        total += v;
    }
    for (double& v : out) v /= total;
}

SimplexSamples sample(const DirichletParams& d, std::mt19937_64& rng, std::size_t n) {
    SimplexSamples s{d.size(), std::vector<double>(n * d.size())};
    for (std::size_t i = 0; i < n; ++i) sample_into(d, rng, {s.values.data() + i * d.size(), d.size()});
    return s;
}

SimplexSamples sample(const DirichletParams& d, std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    return sample(d, rng, n);
}

}  // namespace hev
