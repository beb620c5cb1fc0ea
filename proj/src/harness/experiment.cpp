#include "hev/harness/experiment.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "hev/errors.hpp"

namespace hev::harness {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// splitmix64 finalizer; derives independent stream seeds from one run seed.
std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<std::size_t> corrupt_targets(const ExperimentConfig& cfg) {
    if (!cfg.corrupt_views.empty()) return cfg.corrupt_views;
    std::vector<std::size_t> all(cfg.data.dims.size());
    for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
    return all;
}

MetricsRow make_row(std::string run_id, const ExperimentConfig& cfg, std::string regularizer, double sigma2, double eta,
                    const MetricsReport& r, std::uint64_t seed) {
    MetricsRow row;
    row.run_id = std::move(run_id);
    row.alpha_h = cfg.train.holder.alpha_h();
    row.gamma = cfg.train.holder.gamma();
    row.regularizer = std::move(regularizer);
    row.sigma2 = sigma2;
    row.eta = eta;
    row.acc_view = r.view_accuracy;
    row.acc_fused = r.accuracy;
    row.f1_fused = r.macro_f1;
    row.ca = r.clustering_accuracy.value_or(0.0);
    row.mean_u_view = r.view_mean_uncertainty;
    row.seed = seed;
    return row;
}

EvaluateOptions eval_options(const ExperimentConfig& cfg, std::uint64_t seed) {
    EvaluateOptions opts;
    opts.cluster_seed = mix(seed, 3);
    opts.use_kalman = cfg.use_kalman;
    opts.kalman = cfg.kalman;
    return opts;
}

}  // namespace

TrainedRun train_run(const ExperimentConfig& cfg, std::uint64_t seed) {
    SyntheticConfig dcfg = cfg.data;
    dcfg.seed = seed;
    TrainedRun run{generate_synthetic(dcfg), TrainResult{MultiViewModel(cfg.data.dims, cfg.data.classes, cfg.hidden, cfg.pseudo_view), {}}};
    MultiViewModel model(cfg.data.dims, cfg.data.classes, cfg.hidden, cfg.pseudo_view);
    model.initialize(mix(seed, 1));
    TrainConfig tcfg = cfg.train;
    tcfg.seed = mix(seed, 4);
    run.trained = train(std::move(model), run.data.train, tcfg);
    return run;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg) {
    std::vector<MetricsRow> rows;
    const auto targets = corrupt_targets(cfg);
    const std::string reg = to_string(cfg.train.regularizer);
    for (std::uint64_t seed : cfg.seeds) {
        const auto run = train_run(cfg, seed);
        std::size_t variant = 0;
        for (double sigma2 : cfg.sigma2_levels) {
            for (double eta : cfg.eta_levels) {
                CorruptionSpec spec{sigma2, eta, targets, true};
                const auto test = corrupt(run.data.test, spec, mix(seed, 2));
                const auto report = evaluate(run.trained.model, test, eval_options(cfg, seed));
                rows.push_back(make_row(cfg.name + "-s" + std::to_string(seed) + "-v" + std::to_string(variant++), cfg,
                                        reg, sigma2, eta, report, seed));
            }
        }
    }
    return rows;
}

std::vector<MetricsRow> run_ablation(const ExperimentConfig& cfg) {
    struct Variant {
        const char* label;
        RegularizerKind kind;
        RegularizerTarget target;
    };
    const Variant variants[] = {{"kl", RegularizerKind::KL, RegularizerTarget::LabelMasked},
                                {"holder", RegularizerKind::PHD, RegularizerTarget::Raw},
                                {"holder_dir", RegularizerKind::PHD, RegularizerTarget::LabelMasked}};
    std::vector<MetricsRow> rows;
    for (std::uint64_t seed : cfg.seeds) {
        for (const auto& v : variants) {
            ExperimentConfig c = cfg;
            c.train.regularizer = v.kind;
            c.train.target = v.target;
            const auto run = train_run(c, seed);
            const auto report = evaluate(run.trained.model, run.data.test, eval_options(c, seed));
            rows.push_back(make_row(cfg.name + "-ablate-" + v.label + "-s" + std::to_string(seed), c, v.label, 0.0, 0.0,
                                    report, seed));
        }
    }
    return rows;
}

std::vector<MetricsRow> run_grid(const ExperimentConfig& cfg, std::uint64_t seed) {
    struct Cell {
        double alpha_h;
        double gamma;
    };
    std::vector<Cell> cells;
    for (double a : cfg.grid_alpha_h) {
        for (double g : cfg.grid_gamma) cells.push_back({a, g});
    }
    std::vector<MetricsRow> rows(cells.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (std::size_t idx = next++; idx < cells.size(); idx = next++) {
            try {
                ExperimentConfig c = cfg;
                c.train.holder = HolderConfig(cells[idx].alpha_h, cells[idx].gamma);
                const auto run = train_run(c, seed);
                const auto report = evaluate(run.trained.model, run.data.test, eval_options(c, seed));
                rows[idx] = make_row(cfg.name + "-grid-" + std::to_string(idx), c, to_string(c.train.regularizer), 0.0,
                                     0.0, report, seed);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t jobs = std::min(std::max<std::size_t>(cfg.jobs, 1), std::max<std::size_t>(cells.size(), 1));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
    const std::size_t views = rows.empty() ? 0 : rows.front().acc_view.size();
    out << "run_id,alpha_h,gamma,regularizer,sigma2,eta";
    for (std::size_t m = 0; m < views; ++m) out << ",acc_view_" << m;
    out << ",acc_fused,f1_fused,ca";
    for (std::size_t m = 0; m < views; ++m) out << ",mean_u_view_" << m;
    out << ",seed\n";
    for (const auto& r : rows) {
        out << r.run_id << ',' << num(r.alpha_h) << ',' << num(r.gamma) << ',' << r.regularizer << ',' << num(r.sigma2)
            << ',' << num(r.eta);
        for (double a : r.acc_view) out << ',' << num(a);
        out << ',' << num(r.acc_fused) << ',' << num(r.f1_fused) << ',' << num(r.ca);
        for (double u : r.mean_u_view) out << ',' << num(u);
        out << ',' << r.seed << '\n';
    }
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_metrics_csv(out, rows);
}

void write_summary_json(const std::string& path, const std::string& name, const std::vector<MetricsRow>& rows) {
    nlohmann::ordered_json j;
    j["name"] = name;
    j["rows"] = rows.size();
    double acc = 0.0;
    double f1 = 0.0;
    double ca = 0.0;
    auto runs = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        acc += r.acc_fused;
        f1 += r.f1_fused;
        ca += r.ca;
        runs.push_back({{"run_id", r.run_id},
                        {"alpha_h", r.alpha_h},
                        {"gamma", r.gamma},
                        {"regularizer", r.regularizer},
                        {"sigma2", r.sigma2},
                        {"eta", r.eta},
                        {"acc_view", r.acc_view},
                        {"acc_fused", r.acc_fused},
                        {"f1_fused", r.f1_fused},
                        {"ca", r.ca},
                        {"mean_u_view", r.mean_u_view},
                        {"seed", r.seed}});
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    j["mean_acc_fused"] = acc / n;
    j["mean_f1_fused"] = f1 / n;
    j["mean_ca"] = ca / n;
    j["runs"] = std::move(runs);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
}

void write_ablation_table(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::map<std::uint64_t, std::map<std::string, double>> by_seed;
    for (const auto& r : rows) by_seed[r.seed][r.regularizer] = r.acc_fused;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "seed,acc_kl,acc_holder,acc_holder_dir\n";
    for (const auto& [seed, accs] : by_seed) {
        auto get = [&](const char* k) {
            const auto it = accs.find(k);
            return it == accs.end() ? std::string() : num(it->second);
        };
        out << seed << ',' << get("kl") << ',' << get("holder") << ',' << get("holder_dir") << '\n';
    }
}

}  // namespace hev::harness
