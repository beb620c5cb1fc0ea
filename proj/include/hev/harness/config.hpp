#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hev/harness/synthetic.hpp"
#include "hev/kalman.hpp"
#include "hev/model.hpp"

namespace hev::harness {

/// Flat `dotted.key = value` text. '#' starts a comment; lists are comma
/// separated. Lookups record which keys were consumed so stray keys can be
/// reported.
class KeyValueConfig {
public:
    static KeyValueConfig parse(const std::string& text);
    static KeyValueConfig load(const std::string& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long get_int(const std::string& key, long fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<long> get_ints(const std::string& key, const std::vector<long>& fallback) const;

    /// Throws ConfigError naming the first key never looked up.
    void reject_unknown() const;

private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

struct ExperimentConfig {
    std::string name = "experiment";
    SyntheticConfig data;
    TrainConfig train;
    std::size_t hidden = 16;
    bool pseudo_view = true;
    bool use_kalman = true;
    KalmanConfig kalman;
    std::vector<double> sigma2_levels{0.0};
    std::vector<double> eta_levels{0.0};
    std::vector<std::size_t> corrupt_views;  // empty = every view
    std::vector<std::uint64_t> seeds{0};
    std::vector<double> grid_alpha_h{1.1, 1.3, 1.5, 1.7, 2.0, 2.5};
    std::vector<double> grid_gamma{0.5, 0.8, 1.0, 1.3, 1.5, 2.0};
    std::size_t jobs = 1;
};

ExperimentConfig experiment_from(const KeyValueConfig& kv);
ExperimentConfig load_experiment_config(const std::string& path);

/// Text of the bundled quickstart configuration.
const std::string& quickstart_config_text();

}  // namespace hev::harness
