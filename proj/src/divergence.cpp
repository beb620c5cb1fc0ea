#include "hev/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hev/errors.hpp"
#include "hev/special.hpp"

namespace hev {

namespace {

constexpr std::size_t kMinOracleSamples = 10'000;

void require_same_order(const DirichletParams& p, const DirichletParams& q, const char* op) {
    if (p.size() != q.size()) throw DomainError(std::string(op) + ": distributions have different orders");
}

std::vector<double> scaled_natural(const DirichletParams& d, double scale) {
    std::vector<double> theta(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) theta[k] = scale * (d[k] - 1.0);
    return theta;
}

std::vector<double> mixed_natural(const DirichletParams& p, double wp, const DirichletParams& q, double wq) {
    std::vector<double> theta(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) theta[k] = wp * (p[k] - 1.0) + wq * (q[k] - 1.0);
    return theta;
}

double checked_F(const std::vector<double>& theta, const char* which) {
    for (double t : theta) {
        if (!(t > -1.0)) throw DomainError(std::string("phd: natural parameter argument ") + which + " leaves theta > -1");
    }
    return log_normalizer(theta);
}

}  // namespace

HolderConfig::HolderConfig(double alpha_h, double gamma) : alpha_h_(alpha_h), gamma_(gamma) {
    if (!(alpha_h > 1.0) || !std::isfinite(alpha_h)) {
        throw DomainError("Hölder exponent must be finite and > 1, got " + std::to_string(alpha_h));
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw DomainError("Hölder power gamma must be finite and > 0, got " + std::to_string(gamma));
    }
    beta_h_ = alpha_h / (alpha_h - 1.0);
}

double phd_closed(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q) {
    require_same_order(p, q, "phd_closed");
    const double a = cfg.alpha_h();
    const double b = cfg.beta_h();
    const double g = cfg.gamma();
    const double fp = checked_F(scaled_natural(p, g), "gamma*theta_p");
    const double fq = checked_F(scaled_natural(q, g), "gamma*theta_q");
    const double fm = checked_F(mixed_natural(p, g / a, q, g / b), "(gamma/alpha)*theta_p + (gamma/beta)*theta_q");
    return fp / a + fq / b - fm;
}

std::vector<double> phd_closed_grad_p(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q) {
    require_same_order(p, q, "phd_closed_grad_p");
    const double a = cfg.alpha_h();
    const double b = cfg.beta_h();
    const double g = cfg.gamma();
    const auto scaled = scaled_natural(p, g);
    const auto mixed = mixed_natural(p, g / a, q, g / b);
    checked_F(scaled, "gamma*theta_p");
    checked_F(mixed, "(gamma/alpha)*theta_p + (gamma/beta)*theta_q");
    const auto g_scaled = log_normalizer_grad(scaled);
    const auto g_mixed = log_normalizer_grad(mixed);
    std::vector<double> out(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) out[k] = (g / a) * (g_scaled[k] - g_mixed[k]);
    return out;
}

double phd_symmetric(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q) {
    require_same_order(p, q, "phd_symmetric");
    const bool swap = std::lexicographical_compare(q.alpha().begin(), q.alpha().end(), p.alpha().begin(), p.alpha().end());
    const DirichletParams& x = swap ? q : p;
    const DirichletParams& y = swap ? p : q;
    const double a = cfg.alpha_h();
    const double b = cfg.beta_h();
    const double g = cfg.gamma();
    const double fx = checked_F(scaled_natural(x, g), "gamma*theta_p");
    const double fy = checked_F(scaled_natural(y, g), "gamma*theta_q");
    const double m1 = checked_F(mixed_natural(x, g / a, y, g / b), "(gamma/alpha)*theta_p + (gamma/beta)*theta_q");
    const double m2 = checked_F(mixed_natural(x, g / b, y, g / a), "(gamma/beta)*theta_p + (gamma/alpha)*theta_q");
    return 0.5 * ((fx + fy) - (m1 + m2));
}

double kl_dirichlet(const DirichletParams& p, const DirichletParams& q) {
    require_same_order(p, q, "kl_dirichlet");
    const double sp = p.strength();
    const double sq = q.strength();
    const double psi_sp = digamma(sp);
    double acc = log_gamma(sp) - log_gamma(sq);
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += log_gamma(q[k]) - log_gamma(p[k]);
        acc += (p[k] - q[k]) * (digamma(p[k]) - psi_sp);
    }
    return acc;
}

std::vector<double> kl_dirichlet_grad_p(const DirichletParams& p, const DirichletParams& q) {
    require_same_order(p, q, "kl_dirichlet_grad_p");
    const double sp = p.strength();
    const double sq = q.strength();
    const double tri_sp = trigamma(sp);
    std::vector<double> out(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        out[k] = (p[k] - q[k]) * trigamma(p[k]) - (sp - sq) * tri_sp;
    }
    return out;
}

McEstimate phd_mc_oracle(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q,
                         std::size_t n_samples, std::uint64_t seed) {
    require_same_order(p, q, "phd_mc_oracle");
    if (n_samples < kMinOracleSamples) throw DomainError("phd_mc_oracle: need at least 10^4 samples");
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (p[k] < 1.0 || q[k] < 1.0) throw DomainError("phd_mc_oracle: requires every alpha_k >= 1");
    }
    const std::size_t K = p.size();
    const double a = cfg.alpha_h();
    const double b = cfg.beta_h();
    const double g = cfg.gamma();

    // Unnormalized log densities suffice: normalizing constants and the simplex
    // volume cancel between numerator and denominator.
    std::vector<double> log_num(n_samples), log_pp(n_samples), log_qq(n_samples);
    std::mt19937_64 rng(seed);
    std::vector<double> mu(K);
    for (std::size_t i = 0; i < n_samples; ++i) {
        sample_uniform_simplex(rng, mu);
        double lp = 0.0;
        double lq = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double lm = std::log(mu[k]);
            lp += (p[k] - 1.0) * lm;
            lq += (q[k] - 1.0) * lm;
        }
        log_num[i] = (g / a) * lp + (g / b) * lq;
        log_pp[i] = g * lp;
        log_qq[i] = g * lq;
    }

    // Work with each integrand scaled by its own maximum.
    auto rescale = [](std::vector<double>& v) {
        const double m = *std::max_element(v.begin(), v.end());
        double sum = 0.0;
        for (double& x : v) {
            x = std::exp(x - m);
            sum += x;
        }
        return std::pair{m, sum / static_cast<double>(v.size())};
    };
    const auto [m_num, mean_num] = rescale(log_num);
    const auto [m_pp, mean_pp] = rescale(log_pp);
    const auto [m_qq, mean_qq] = rescale(log_qq);

    const double estimate = -(m_num + std::log(mean_num)) + (m_pp + std::log(mean_pp)) / a + (m_qq + std::log(mean_qq)) / b;

    // Linearization: estimate ~ -A/mean_A + (B/mean_B)/a + (C/mean_C)/b.
    const double n = static_cast<double>(n_samples);
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double z = -log_num[i] / mean_num + (log_pp[i] / mean_pp) / a + (log_qq[i] / mean_qq) / b;
        s1 += z;
        s2 += z * z;
    }
    const double var = (s2 - s1 * s1 / n) / (n - 1.0);
    return {estimate, std::sqrt(std::max(var, 0.0) / n)};
}

McEstimate kl_mc_oracle(const DirichletParams& p, const DirichletParams& q, std::size_t n_samples,
                        std::uint64_t seed) {
    require_same_order(p, q, "kl_mc_oracle");
    if (n_samples < 2) throw DomainError("kl_mc_oracle: need at least 2 samples");
    const std::size_t K = p.size();
    auto log_norm = [](const DirichletParams& d) {
        double acc = -std::lgamma(d.strength());
        for (double a : d.alpha()) acc += std::lgamma(a);
        return acc;
    };
    const double cp = log_norm(p);
    const double cq = log_norm(q);
    std::mt19937_64 rng(seed);
    std::vector<double> mu(K);
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        sample_into(p, rng, mu);
        double z = cq - cp;
        for (std::size_t k = 0; k < K; ++k) z += (p[k] - q[k]) * std::log(mu[k]);
        s1 += z;
        s2 += z * z;
    }
    const double n = static_cast<double>(n_samples);
    const double var = (s2 - s1 * s1 / n) / (n - 1.0);
    return {s1 / n, std::sqrt(std::max(var, 0.0) / n)};
}

}  // namespace hev
