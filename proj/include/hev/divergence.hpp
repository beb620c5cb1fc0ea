#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hev/dirichlet.hpp"

namespace hev {

/// Hölder exponent alpha_h > 1 and power gamma > 0. The conjugate exponent
/// beta_h = alpha_h / (alpha_h - 1) is always derived, never supplied.
class HolderConfig {
public:
    HolderConfig(double alpha_h, double gamma);

    double alpha_h() const noexcept { return alpha_h_; }
    double beta_h() const noexcept { return beta_h_; }
    double gamma() const noexcept { return gamma_; }

    /// Same gamma, exponent swapped for its conjugate.
    HolderConfig conjugate() const { return HolderConfig(beta_h_, gamma_); }

private:
    double alpha_h_;
    double beta_h_;
    double gamma_;
};

/// Closed-form proper Hölder divergence between two Dirichlets:
///   (1/a) F(g th_p) + (1/b) F(g th_q) - F((g/a) th_p + (g/b) th_q).
/// Throws DomainError naming the offending F argument if it leaves theta > -1.
double phd_closed(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q);

/// d phd_closed / d alpha_p.
std::vector<double> phd_closed_grad_p(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q);

/// Symmetrized PHD, the mean of the two directed divergences
///   (1/2)[F(g th_p) + F(g th_q) - F((g/a) th_p + (g/b) th_q) - F((g/b) th_p + (g/a) th_q)].
/// Exactly symmetric in (p, q): arguments are put in canonical order first.
double phd_symmetric(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q);

/// KL(p || q) between Dirichlets, closed form.
double kl_dirichlet(const DirichletParams& p, const DirichletParams& q);

/// d KL(p || q) / d alpha_p.
std::vector<double> kl_dirichlet_grad_p(const DirichletParams& p, const DirichletParams& q);

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Integral-definition PHD by uniform-simplex Monte Carlo:
///   -log[ int p^{g/a} q^{g/b} / ((int p^g)^{1/a} (int q^g)^{1/b}) ].
/// Requires every alpha_k >= 1 for both arguments and n_samples >= 10^4.
/// Standard error by the delta method on the three correlated sample means.
McEstimate phd_mc_oracle(const HolderConfig& cfg, const DirichletParams& p, const DirichletParams& q,
                         std::size_t n_samples, std::uint64_t seed);

/// E_p[log p - log q] by sampling from p. Normalizers come from std::lgamma so
/// the estimate shares no code path with kl_dirichlet.
McEstimate kl_mc_oracle(const DirichletParams& p, const DirichletParams& q, std::size_t n_samples,
                        std::uint64_t seed);

}  // namespace hev
