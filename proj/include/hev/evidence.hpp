#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "hev/dirichlet.hpp"

namespace hev {

/// Subjective-logic opinion over K singletons: beliefs b_k plus uncertainty u,
/// all non-negative and summing to 1 (within 1e-12).
class Opinion {
public:
    Opinion(std::vector<double> beliefs, double uncertainty);

    /// u = 1, all beliefs zero: the neutral element of combination.
    static Opinion vacuous(std::size_t k);

    std::span<const double> beliefs() const noexcept { return beliefs_; }
    double belief(std::size_t k) const { return beliefs_[k]; }
    double uncertainty() const noexcept { return uncertainty_; }
    std::size_t size() const noexcept { return beliefs_.size(); }

    friend bool operator==(const Opinion&, const Opinion&) = default;

private:
    std::vector<double> beliefs_;
    double uncertainty_;
};

/// Non-negative per-class evidence emitted by an evidential head.
class EvidenceVector {
public:
    explicit EvidenceVector(std::vector<double> e);
    std::span<const double> values() const noexcept { return e_; }
    std::size_t size() const noexcept { return e_.size(); }

private:
    std::vector<double> e_;
};

/// Masses on {true}, {false} and the whole binary frame ("uncertain").
struct BPA {
    double m_true = 0.0;
    double m_false = 0.0;
    double m_uncertain = 1.0;

    /// Throws DomainError if any mass is negative or the total differs from 1 by more than 1e-12.
    void validate() const;
    friend bool operator==(const BPA&, const BPA&) = default;
};

/// alpha_k = e_k + 1.
DirichletParams evidence_to_dirichlet(const EvidenceVector& e);

/// b_k = (alpha_k - 1)/S, u = K/S. Requires alpha_k >= 1.
Opinion dirichlet_to_opinion(const DirichletParams& d);

/// Inverse mapping: S = K/u, alpha_k = b_k S + 1. Requires u > 0.
DirichletParams opinion_to_dirichlet(const Opinion& op);

struct Combination {
    Opinion opinion;
    double conflict = 0.0;
};

/// Reduced Dempster rule on singletons plus the frame:
///   C = sum_{i != j} b1_i b2_j,
///   b_k = (b1_k b2_k + b1_k u2 + b2_k u1) / (1 - C),  u = u1 u2 / (1 - C).
/// Bitwise symmetric in its arguments. Throws TotalConflict when C >= 1 - 1e-12.
Combination ds_combine_reduced_traced(const Opinion& m1, const Opinion& m2);
Opinion ds_combine_reduced(const Opinion& m1, const Opinion& m2);

struct MultiCombination {
    Opinion opinion;
    std::vector<double> conflicts;  // one per pairwise step
};

/// Left fold of ds_combine_reduced over one or more opinions.
MultiCombination ds_combine_multi_traced(std::span<const Opinion> opinions);
Opinion ds_combine_multi(std::span<const Opinion> opinions);

/// m_true = belief * sensor, m_false = belief * (1 - sensor), m_uncertain = 1 - belief.
BPA ds_bpa(double belief, double sensor_value);

/// Dempster's rule on the binary frame with the uncertain mass as frame mass.
BPA ds_combine_bpa(const BPA& b1, const BPA& b2);

/// Mass function over subsets of a frame of at most 10 hypotheses, keyed by
/// bitmask (bit k set = hypothesis k in the focal element).
struct MassFunction {
    std::size_t frame_size = 0;
    std::map<std::uint32_t, double> masses;

    std::uint32_t frame_mask() const { return (std::uint32_t{1} << frame_size) - 1; }
    double mass(std::uint32_t focal) const;

    static MassFunction from_opinion(const Opinion& op);
    static MassFunction from_bpa(const BPA& bpa);
};

/// Classical Dempster combination by enumerating all focal-element intersections.
MassFunction ds_full_dempster_oracle(std::span<const MassFunction> sources);

}  // namespace hev
