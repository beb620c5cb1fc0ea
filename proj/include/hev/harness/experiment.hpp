#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hev/harness/config.hpp"
#include "hev/harness/metrics.hpp"

namespace hev::harness {

/// One metrics CSV row. Columns, in order:
///   run_id, alpha_h, gamma, regularizer, sigma2, eta, acc_view_0..M-1,
///   acc_fused, f1_fused, ca, mean_u_view_0..M-1, seed
struct MetricsRow {
    std::string run_id;
    double alpha_h = 0.0;
    double gamma = 0.0;
    std::string regularizer;
    double sigma2 = 0.0;
    double eta = 0.0;
    std::vector<double> acc_view;
    double acc_fused = 0.0;
    double f1_fused = 0.0;
    double ca = 0.0;
    std::vector<double> mean_u_view;
    std::uint64_t seed = 0;
};

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
void write_summary_json(const std::string& path, const std::string& name, const std::vector<MetricsRow>& rows);

/// Trains one model on clean synthetic data for `seed`.
struct TrainedRun {
    SyntheticData data;
    TrainResult trained;
};
TrainedRun train_run(const ExperimentConfig& cfg, std::uint64_t seed);

/// Per seed: train on clean data, evaluate the clean test split and every
/// (sigma2, eta) corruption level.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg);

/// KL / Hölder (raw alpha) / Hölder (label-masked alpha) per seed.
std::vector<MetricsRow> run_ablation(const ExperimentConfig& cfg);

/// One clean run per (alpha_h, gamma) cell; cells may run on cfg.jobs threads,
/// results ordered by cell index.
std::vector<MetricsRow> run_grid(const ExperimentConfig& cfg, std::uint64_t seed);

/// seed, acc_kl, acc_holder, acc_holder_dir
void write_ablation_table(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace hev::harness
