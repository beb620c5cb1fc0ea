#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "hev/model.hpp"

namespace hev::harness {

/// Gaussian-blob multi-view classification data. Each view places one center
/// per class at distance `separation * informativeness[m]` from the origin;
/// samples add isotropic noise with standard deviation `noise_std`.
struct SyntheticConfig {
    std::size_t classes = 3;
    std::vector<std::size_t> dims{8, 8};
    double separation = 2.0;
    std::vector<double> informativeness{1.0, 1.0};
    double noise_std = 1.0;
    std::size_t n_train = 600;
    std::size_t n_test = 200;
    std::uint64_t seed = 0;

    std::size_t views() const noexcept { return dims.size(); }
    /// Throws ConfigError with the offending key path.
    void validate() const;
};

struct SyntheticData {
    MultiViewBatch train;
    MultiViewBatch test;
};

/// Balanced classes, deterministic per seed.
SyntheticData generate_synthetic(const SyntheticConfig& cfg);

/// Additive N(0, sigma2) noise on target views and per-(sample, target view)
/// dropout with probability eta. Views not listed in target_views are left alone,
/// so an empty list is a no-op.
struct CorruptionSpec {
    double noise_sigma2 = 0.0;
    double missing_rate = 0.0;
    std::vector<std::size_t> target_views;
    /// When every view of a sample ends up missing, restore one dropped target
    /// view (chosen uniformly) so the sample stays classifiable.
    bool keep_one_view = true;

    void validate(std::size_t view_count) const;
};

MultiViewBatch corrupt(const MultiViewBatch& batch, const CorruptionSpec& spec, std::uint64_t seed);

}  // namespace hev::harness
