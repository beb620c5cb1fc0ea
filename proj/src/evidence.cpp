#include "hev/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "hev/errors.hpp"

namespace hev {

namespace {

constexpr double kMassSumTol = 1e-12;
constexpr double kConflictLimit = 1.0 - 1e-12;

void check_mass(double m, const char* what) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw DomainError(std::string(what) + " must be finite and >= 0");
}

bool opinion_less(const Opinion& a, const Opinion& b) {
    const auto ba = a.beliefs();
    const auto bb = b.beliefs();
    if (std::lexicographical_compare(ba.begin(), ba.end(), bb.begin(), bb.end())) return true;
    if (std::lexicographical_compare(bb.begin(), bb.end(), ba.begin(), ba.end())) return false;
    return a.uncertainty() < b.uncertainty();
}

}  // namespace

Opinion::Opinion(std::vector<double> beliefs, double uncertainty)
    : beliefs_(std::move(beliefs)), uncertainty_(uncertainty) {
    if (beliefs_.empty()) throw DomainError("opinion needs at least one class");
    for (double b : beliefs_) check_mass(b, "opinion belief");
    check_mass(uncertainty_, "opinion uncertainty");
    const double total = std::accumulate(beliefs_.begin(), beliefs_.end(), uncertainty_);
    if (std::abs(total - 1.0) > kMassSumTol) {
        throw DomainError("opinion masses sum to " + std::to_string(total) + ", expected 1");
    }
}

Opinion Opinion::vacuous(std::size_t k) { return Opinion(std::vector<double>(k, 0.0), 1.0); }

EvidenceVector::EvidenceVector(std::vector<double> e) : e_(std::move(e)) {
    for (double v : e_) check_mass(v, "evidence");
}

void BPA::validate() const {
    check_mass(m_true, "bpa(true)");
    check_mass(m_false, "bpa(false)");
    check_mass(m_uncertain, "bpa(uncertain)");
    if (std::abs(m_true + m_false + m_uncertain - 1.0) > kMassSumTol) throw DomainError("bpa masses do not sum to 1");
}

DirichletParams evidence_to_dirichlet(const EvidenceVector& e) {
    std::vector<double> alpha(e.values().begin(), e.values().end());
    for (double& a : alpha) a += 1.0;
    return DirichletParams(std::move(alpha));
}

Opinion dirichlet_to_opinion(const DirichletParams& d) {
    const double s = d.strength();
    const auto k = static_cast<double>(d.size());
    std::vector<double> b(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] < 1.0) throw DomainError("dirichlet_to_opinion: alpha_k < 1 implies negative evidence");
        b[i] = (d[i] - 1.0) / s;
    }
    // u = K/S equals 1 - sum(b) up to rounding; taking the complement keeps the
    // total at exactly 1.
    double u = k / s;
    const double bsum = std::accumulate(b.begin(), b.end(), 0.0);
    if (std::abs(bsum + u - 1.0) <= kMassSumTol) u = std::max(0.0, 1.0 - bsum);
    return Opinion(std::move(b), u);
}

DirichletParams opinion_to_dirichlet(const Opinion& op) {
    if (!(op.uncertainty() > 0.0)) throw DomainError("opinion_to_dirichlet: uncertainty must be > 0");
    const double s = static_cast<double>(op.size()) / op.uncertainty();
    std::vector<double> alpha(op.size());
    for (std::size_t k = 0; k < op.size(); ++k) alpha[k] = op.belief(k) * s + 1.0;
    return DirichletParams(std::move(alpha));
}

Combination ds_combine_reduced_traced(const Opinion& m1, const Opinion& m2) {
    if (m1.size() != m2.size()) throw ShapeError("ds_combine_reduced: opinions have different class counts");
    const Opinion& x = opinion_less(m2, m1) ? m2 : m1;
    const Opinion& y = opinion_less(m2, m1) ? m1 : m2;
    const std::size_t K = x.size();

    double conflict = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
        for (std::size_t j = 0; j < K; ++j) {
            if (i != j) conflict += x.belief(i) * y.belief(j);
        }
    }
    if (conflict >= kConflictLimit) throw TotalConflict(conflict);

    const double scale = 1.0 / (1.0 - conflict);
    const double ux = x.uncertainty();
    const double uy = y.uncertainty();
    std::vector<double> b(K);
    for (std::size_t k = 0; k < K; ++k) {
        b[k] = scale * (x.belief(k) * y.belief(k) + x.belief(k) * uy + y.belief(k) * ux);
    }
    return {Opinion(std::move(b), scale * ux * uy), conflict};
}

Opinion ds_combine_reduced(const Opinion& m1, const Opinion& m2) { return ds_combine_reduced_traced(m1, m2).opinion; }

MultiCombination ds_combine_multi_traced(std::span<const Opinion> opinions) {
    if (opinions.empty()) throw ShapeError("ds_combine_multi: need at least one opinion");
    MultiCombination out{opinions.front(), {}};
    for (std::size_t i = 1; i < opinions.size(); ++i) {
        auto step = ds_combine_reduced_traced(out.opinion, opinions[i]);
        out.opinion = std::move(step.opinion);
        out.conflicts.push_back(step.conflict);
    }
    return out;
}

Opinion ds_combine_multi(std::span<const Opinion> opinions) { return ds_combine_multi_traced(opinions).opinion; }

BPA ds_bpa(double belief, double sensor_value) {
    if (!(belief >= 0.0 && belief <= 1.0)) throw DomainError("ds_bpa: belief must lie in [0, 1]");
    if (!(sensor_value >= 0.0 && sensor_value <= 1.0)) throw DomainError("ds_bpa: sensor value must lie in [0, 1]");
    const double t = belief * sensor_value;
    // m_false as the remainder of belief keeps the total exactly 1.
    return {t, belief - t, 1.0 - belief};
}

BPA ds_combine_bpa(const BPA& b1, const BPA& b2) {
    b1.validate();
    b2.validate();
    const double conflict = b1.m_true * b2.m_false + b1.m_false * b2.m_true;
    if (conflict >= kConflictLimit) throw TotalConflict(conflict);
    const double scale = 1.0 / (1.0 - conflict);
    const double t = b1.m_true * b2.m_true + b1.m_true * b2.m_uncertain + b1.m_uncertain * b2.m_true;
    const double f = b1.m_false * b2.m_false + b1.m_false * b2.m_uncertain + b1.m_uncertain * b2.m_false;
    const double u = b1.m_uncertain * b2.m_uncertain;
    return {scale * t, scale * f, scale * u};
}

double MassFunction::mass(std::uint32_t focal) const {
    const auto it = masses.find(focal);
    return it == masses.end() ? 0.0 : it->second;
}

MassFunction MassFunction::from_opinion(const Opinion& op) {
    if (op.size() > 10) throw DomainError("mass function frame limited to 10 hypotheses");
    MassFunction m{op.size(), {}};
    for (std::size_t k = 0; k < op.size(); ++k) {
        if (op.belief(k) > 0.0) m.masses[std::uint32_t{1} << k] = op.belief(k);
    }
    if (op.uncertainty() > 0.0) m.masses[m.frame_mask()] = op.uncertainty();
    return m;
}

MassFunction MassFunction::from_bpa(const BPA& bpa) {
    MassFunction m{2, {}};
    if (bpa.m_true > 0.0) m.masses[0b01] = bpa.m_true;
    if (bpa.m_false > 0.0) m.masses[0b10] = bpa.m_false;
    if (bpa.m_uncertain > 0.0) m.masses[0b11] = bpa.m_uncertain;
    return m;
}

MassFunction ds_full_dempster_oracle(std::span<const MassFunction> sources) {
    if (sources.empty()) throw ShapeError("ds_full_dempster_oracle: need at least one source");
    const std::size_t frame = sources.front().frame_size;
    if (frame == 0 || frame > 10) throw DomainError("ds_full_dempster_oracle: frame size must be in [1, 10]");
    for (const auto& s : sources) {
        if (s.frame_size != frame) throw ShapeError("ds_full_dempster_oracle: sources disagree on frame size");
    }

    MassFunction acc = sources.front();
    for (std::size_t i = 1; i < sources.size(); ++i) {
        std::map<std::uint32_t, double> joint;
        double conflict = 0.0;
        for (const auto& [fa, ma] : acc.masses) {
            for (const auto& [fb, mb] : sources[i].masses) {
                const std::uint32_t inter = fa & fb;
                if (inter == 0) {
                    conflict += ma * mb;
                } else {
                    joint[inter] += ma * mb;
                }
            }
        }
        if (conflict >= kConflictLimit) throw TotalConflict(conflict);
        for (auto& [focal, m] : joint) m /= (1.0 - conflict);
        acc.masses = std::move(joint);
    }
    return acc;
}

}  // namespace hev
