#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace hev {

class NaturalParams;

/// Dirichlet distribution over the (K-1)-simplex, parameterized by its
/// concentration vector. Construction validates K >= 2 and alpha_k > 0.
class DirichletParams {
public:
    explicit DirichletParams(std::vector<double> alpha);

    /// All-ones concentration of order k (the uniform distribution).
    static DirichletParams uniform(std::size_t k);
    static DirichletParams from_natural(const NaturalParams& theta);

    std::span<const double> alpha() const noexcept { return alpha_; }
    double operator[](std::size_t k) const { return alpha_[k]; }
    std::size_t size() const noexcept { return alpha_.size(); }
    double strength() const noexcept;

    NaturalParams to_natural() const;

    friend bool operator==(const DirichletParams&, const DirichletParams&) = default;

private:
    std::vector<double> alpha_;
};

/// Exponential-family natural parameter theta = alpha - 1 (each theta_k > -1).
class NaturalParams {
public:
    explicit NaturalParams(std::vector<double> theta);

    std::span<const double> theta() const noexcept { return theta_; }
    std::size_t size() const noexcept { return theta_.size(); }

    friend bool operator==(const NaturalParams&, const NaturalParams&) = default;

private:
    std::vector<double> theta_;
};

/// n draws stored row-major (n x K).
struct SimplexSamples {
    std::size_t k = 0;
    std::vector<double> values;

    std::size_t count() const noexcept { return k == 0 ? 0 : values.size() / k; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * k, k}; }
};

/// F(theta) = sum_k log Gamma(theta_k + 1) - log Gamma(sum_k (theta_k + 1)).
/// Accepts any real vector with every theta_k > -1; throws DomainError otherwise.
double log_normalizer(std::span<const double> theta);
double log_normalizer(const NaturalParams& theta);

/// Gradient of F: psi(theta_k + 1) - psi(sum_j (theta_j + 1)).
std::vector<double> log_normalizer_grad(std::span<const double> theta);

/// Log density w.r.t. Lebesgue measure on the first K-1 coordinates. mu must be
/// strictly interior and sum to 1 within 1e-12.
double log_pdf(const DirichletParams& d, std::span<const double> mu);

/// E[log mu_k] = psi(alpha_k) - psi(S).
std::vector<double> expected_log_mu(const DirichletParams& d);

/// Mean alpha / S.
std::vector<double> mean(const DirichletParams& d);

/// Draws via normalized Gamma(alpha_k, 1) variates.
SimplexSamples sample(const DirichletParams& d, std::mt19937_64& rng, std::size_t n);
SimplexSamples sample(const DirichletParams& d, std::uint64_t seed, std::size_t n);

/// Single draw written into out (size K).
void sample_into(const DirichletParams& d, std::mt19937_64& rng, std::span<double> out);

/// Uniform draw on the simplex (normalized unit exponentials).
void sample_uniform_simplex(std::mt19937_64& rng, std::span<double> out);

}  // namespace hev
