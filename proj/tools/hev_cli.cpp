// Command-line front end: divergence checks, opinion fusion, and experiment runs.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hev/divergence.hpp"
#include "hev/errors.hpp"
#include "hev/evidence.hpp"
#include "hev/harness/config.hpp"
#include "hev/harness/dataset_io.hpp"
#include "hev/harness/experiment.hpp"
#include "hev/harness/metrics.hpp"
#include "hev/model.hpp"

namespace fs = std::filesystem;
using namespace hev;
using namespace hev::harness;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "hev_out";
};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError(what, "not a number list: '" + text + "'");
        }
    }
    return out;
}

ExperimentConfig load_config(const Globals& g, bool quickstart_default) {
    ExperimentConfig cfg;
    if (!g.config.empty()) {
        cfg = load_experiment_config(g.config);
    } else if (quickstart_default) {
        cfg = experiment_from(KeyValueConfig::parse(quickstart_config_text()));
    }
    if (g.seed) cfg.seeds = {*g.seed};
    return cfg;
}

fs::path out_dir(const Globals& g) {
    fs::path dir(g.out);
    fs::create_directories(dir);
    return dir;
}

void print_rows(const std::vector<MetricsRow>& rows) {
    for (const auto& r : rows) {
        std::cout << r.run_id << "  acc=" << r.acc_fused << "  f1=" << r.f1_fused << "  ca=" << r.ca << '\n';
    }
}

int cmd_divergence(const Globals& g, const std::string& p_text, const std::string& q_text, double alpha_h,
                   double gamma, const std::string& kind, std::size_t samples) {
    const DirichletParams p(parse_list(p_text, "--p"));
    const DirichletParams q(parse_list(q_text, "--q"));
    const std::uint64_t seed = g.seed.value_or(0);
    double closed = 0.0;
    McEstimate mc{};
    if (kind == "kl") {
        closed = kl_dirichlet(p, q);
        mc = kl_mc_oracle(p, q, samples, seed);
    } else {
        const HolderConfig cfg(alpha_h, gamma);
        if (kind == "phd") {
            closed = phd_closed(cfg, p, q);
            mc = phd_mc_oracle(cfg, p, q, samples, seed);
        } else {
            closed = phd_symmetric(cfg, p, q);
            const auto a = phd_mc_oracle(cfg, p, q, samples, seed);
            const auto b = phd_mc_oracle(cfg, q, p, samples, seed + 1);
            mc = {0.5 * (a.estimate + b.estimate), 0.5 * std::hypot(a.std_error, b.std_error)};
        }
    }
    std::cout << "closed,oracle,se\n" << num(closed) << ',' << num(mc.estimate) << ',' << num(mc.std_error) << '\n';
    return 0;
}

// One opinion per line: b_0,...,b_{K-1},u. Blank lines and '#' comments are skipped.
std::vector<Opinion> read_opinions(std::istream& in) {
    std::vector<Opinion> ops;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto values = parse_list(line, "line " + std::to_string(line_no));
        if (values.size() < 3) throw ConfigError("line " + std::to_string(line_no), "an opinion needs at least two beliefs and u");
        ops.emplace_back(std::vector<double>(values.begin(), values.end() - 1), values.back());
    }
    if (ops.empty()) throw ConfigError("input", "no opinions given");
    return ops;
}

int cmd_fuse(const std::string& input) {
    std::vector<Opinion> ops;
    if (input == "-") {
        ops = read_opinions(std::cin);
    } else {
        std::ifstream f(input);
        if (!f) throw ConfigError("--input", "cannot open " + input);
        ops = read_opinions(f);
    }
    const auto res = ds_combine_multi_traced(ops);
    std::cout << "step,conflict\n";
    for (std::size_t i = 0; i < res.conflicts.size(); ++i) std::cout << i + 1 << ',' << num(res.conflicts[i]) << '\n';
    for (std::size_t k = 0; k < res.opinion.size(); ++k) std::cout << 'b' << k << ',';
    std::cout << "u\n";
    for (double b : res.opinion.beliefs()) std::cout << num(b) << ',';
    std::cout << num(res.opinion.uncertainty()) << '\n';
    return 0;
}

int cmd_train(const Globals& g) {
    const auto cfg = load_config(g, true);
    const auto dir = out_dir(g);
    for (auto seed : cfg.seeds) {
        const auto run = train_run(cfg, seed);
        const std::string tag = "seed" + std::to_string(seed);
        save_model(run.trained.model, (dir / ("model_" + tag + ".kphd")).string());
        write_dataset_csv((dir / ("train_" + tag + ".csv")).string(), run.data.train);
        write_dataset_csv((dir / ("test_" + tag + ".csv")).string(), run.data.test);
        std::ofstream trace(dir / ("trace_" + tag + ".csv"));
        trace << "epoch,loss,train_accuracy,lambda\n";
        for (const auto& e : run.trained.trace) {
            trace << e.epoch << ',' << num(e.loss) << ',' << num(e.train_accuracy) << ',' << num(e.lambda) << '\n';
        }
        const auto& last = run.trained.trace.empty() ? EpochMetrics{} : run.trained.trace.back();
        std::cout << tag << ": epochs=" << run.trained.trace.size() << " loss=" << last.loss
                  << " train_acc=" << last.train_accuracy << '\n';
    }
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}

int cmd_eval(const Globals& g, const std::string& model_path, const std::string& data_path) {
    const auto cfg = load_config(g, true);
    const auto model = load_model(model_path);
    const std::uint64_t seed = cfg.seeds.front();
    MultiViewBatch data;
    if (!data_path.empty()) {
        data = read_dataset_csv(data_path);
    } else {
        SyntheticConfig dcfg = cfg.data;
        dcfg.seed = seed;
        data = generate_synthetic(dcfg).test;
    }

    std::vector<std::size_t> targets = cfg.corrupt_views;
    if (targets.empty()) {
        for (std::size_t m = 0; m < data.view_count(); ++m) targets.push_back(m);
    }
    std::vector<MetricsRow> rows;
    for (double s2 : cfg.sigma2_levels) {
        for (double eta : cfg.eta_levels) {
            CorruptionSpec spec{s2, eta, targets, true};
            const auto batch = corrupt(data, spec, seed);
            EvaluateOptions opts;
            opts.cluster_seed = seed;
            opts.use_kalman = cfg.use_kalman;
            opts.kalman = cfg.kalman;
            const auto rep = evaluate(model, batch, opts);
            MetricsRow row;
            row.run_id = "eval_s" + num(s2) + "_e" + num(eta);
            row.alpha_h = cfg.train.holder.alpha_h();
            row.gamma = cfg.train.holder.gamma();
            row.regularizer = to_string(cfg.train.regularizer);
            row.sigma2 = s2;
            row.eta = eta;
            row.acc_view = rep.view_accuracy;
            row.acc_fused = rep.accuracy;
            row.f1_fused = rep.macro_f1;
            row.ca = rep.clustering_accuracy.value_or(0.0);
            row.mean_u_view = rep.view_mean_uncertainty;
            row.seed = seed;
            rows.push_back(row);
            if (rep.clamped_readouts > 0) {
                std::cerr << "warning: " << rep.clamped_readouts << " smoothed confidence values clamped to [0,1]\n";
            }
        }
    }
    const auto dir = out_dir(g);
    write_metrics_csv((dir / "eval.csv").string(), rows);
    print_rows(rows);
    return 0;
}

int cmd_experiment(const Globals& g, const std::string& which) {
    const auto cfg = load_config(g, which == "quickstart");
    const auto dir = out_dir(g);
    std::vector<MetricsRow> rows;
    if (which == "ablate") {
        rows = run_ablation(cfg);
        write_ablation_table((dir / "ablation.csv").string(), rows);
    } else if (which == "grid") {
        rows = run_grid(cfg, cfg.seeds.front());
    } else {
        rows = run_experiment(cfg);
    }
    write_metrics_csv((dir / "metrics.csv").string(), rows);
    write_summary_json((dir / "summary.json").string(), cfg.name, rows);
    print_rows(rows);
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evidential multi-view learning with Hölder divergence regularization"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config, "Experiment config file (dotted key = value)");
    auto* seed_opt = app.add_option("--seed", seed, "Override the configured seed list with one seed");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();

    auto* div = app.add_subcommand("divergence", "Closed-form divergence against its Monte Carlo oracle");
    std::string p_text, q_text, kind = "phd";
    double alpha_h = 2.0, gamma = 1.0;
    std::size_t samples = 1'000'000;
    div->add_option("--p", p_text, "Concentrations of p, comma separated")->required();
    div->add_option("--q", q_text, "Concentrations of q, comma separated")->required();
    div->add_option("--alpha-h", alpha_h, "Hölder exponent (> 1)")->capture_default_str();
    div->add_option("--gamma", gamma, "Hölder gamma (> 0)")->capture_default_str();
    div->add_option("--kind", kind, "phd, phd-sym or kl")
        ->check(CLI::IsMember({"phd", "phd-sym", "kl"}))
        ->capture_default_str();
    div->add_option("--samples", samples, "Monte Carlo draws")->capture_default_str();

    auto* fuse = app.add_subcommand("fuse", "Fuse opinions given as CSV rows b_0,...,b_{K-1},u");
    std::string input = "-";
    fuse->add_option("--input", input, "Opinion file, '-' for stdin")->capture_default_str();

    auto* train_cmd = app.add_subcommand("train", "Train one model per seed and save it with its data");
    auto* eval = app.add_subcommand("eval", "Evaluate a saved model at the configured corruption levels");
    std::string model_path, data_path;
    eval->add_option("--model", model_path, "Model file written by train")->required();
    eval->add_option("--data", data_path, "Dataset CSV (default: regenerate the test split)");
    auto* ablate = app.add_subcommand("ablate", "KL / Hölder / Hölder with label-masked Dirichlet, per seed");
    auto* grid = app.add_subcommand("grid", "Clean runs over the alpha_h x gamma grid");
    auto* quick = app.add_subcommand("quickstart", "Run the bundled quickstart experiment");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (*seed_opt) g.seed = seed;

    try {
        if (*div) return cmd_divergence(g, p_text, q_text, alpha_h, gamma, kind, samples);
        if (*fuse) return cmd_fuse(input);
        if (*train_cmd) return cmd_train(g);
        if (*eval) return cmd_eval(g, model_path, data_path);
        if (*ablate) return cmd_experiment(g, "ablate");
        if (*grid) return cmd_experiment(g, "grid");
        if (*quick) return cmd_experiment(g, "quickstart");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 3;
    } catch (const TotalConflict& e) {
        std::cerr << "total conflict: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
