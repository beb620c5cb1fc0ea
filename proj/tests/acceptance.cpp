// Acceptance checks. One PASS/FAIL line per criterion; exit status is the number of failures.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hev/divergence.hpp"
#include "hev/evidence.hpp"
#include "hev/harness/config.hpp"
#include "hev/harness/experiment.hpp"
#include "hev/harness/metrics.hpp"
#include "hev/harness/synthetic.hpp"
#include "hev/kalman.hpp"
#include "hev/model.hpp"

using namespace hev;
using namespace hev::harness;
using Clock = std::chrono::steady_clock;

namespace {

// Divergence suites.
constexpr int kDivergenceTuples = 50;
constexpr int kDivergenceRequired = 49;
constexpr std::size_t kMcSamples = 1'000'000;
constexpr double kSeMultiple = 3.0;
constexpr double kAbsFloor = 5e-3;
constexpr double kDivergenceSeconds = 180.0;

// Fusion rule.
constexpr int kDstPairs = 1000;
constexpr double kDstTol = 1e-12;

// Gradients.
constexpr int kGradConfigs = 20;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kGradFloor = 1e-5;

// Kalman.
constexpr double kRiccatiTol = 1e-8;

// Benchmark trends.
constexpr std::array<std::uint64_t, 5> kSeeds{1, 2, 3, 4, 5};
constexpr double kFusionSlack = 0.005;
constexpr double kFusionFloor = 0.95;
constexpr double kFusionSeconds = 300.0;
constexpr std::array<double, 3> kSigma2{0.0, 0.01, 0.03};
constexpr double kOtherViewRelChange = 0.20;
constexpr double kMissingGap = 0.03;
constexpr double kAblationMargin = -0.005;

// Clustering accuracy.
constexpr int kCaTables = 200;

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
    std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Tuple {
    HolderConfig cfg;
    DirichletParams p, q;
};

std::vector<Tuple> divergence_suite() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> ua(1.1, 2.5), ug(0.5, 2.0), uc(1.0, 10.0);
    const std::array<std::size_t, 3> ks{2, 3, 5};
    std::vector<Tuple> out;
    for (int i = 0; i < kDivergenceTuples; ++i) {
        const std::size_t k = ks[i % 3];
        const HolderConfig cfg(ua(rng), ug(rng));
        std::vector<double> p(k), q(k);
        for (auto& v : p) v = uc(rng);
        for (auto& v : q) v = uc(rng);
        out.push_back({cfg, DirichletParams(p), DirichletParams(q)});
    }
    return out;
}

template <class Closed, class Oracle>
void divergence_criterion(int id, const std::string& name, Closed closed, Oracle oracle) {
    const auto t0 = Clock::now();
    int ok = 0;
    double worst = 0.0;
    std::uint64_t seed = 1000;
    for (const auto& t : divergence_suite()) {
        const double c = closed(t);
        const McEstimate mc = oracle(t, seed++);
        const double tol = std::max(kSeMultiple * mc.std_error, kAbsFloor);
        const double ratio = std::abs(c - mc.estimate) / tol;
        worst = std::max(worst, ratio);
        ok += ratio <= 1.0;
    }
    const double secs = seconds_since(t0);
    report(id, name, ok >= kDivergenceRequired && secs < kDivergenceSeconds,
           fmt("%d/%d tuples within max(3 SE, 5e-3), worst |closed-MC|/tol = %.3f, %.1f s", ok, kDivergenceTuples,
               worst, secs));
}

Opinion random_opinion(std::mt19937_64& rng, std::size_t k) {
    std::exponential_distribution<double> ex(1.0);
    std::vector<double> w(k + 1);
    double total = 0.0;
    for (double& v : w) total += (v = ex(rng));
    std::vector<double> b(k);
    double sb = 0.0;
    for (std::size_t i = 0; i < k; ++i) sb += (b[i] = w[i] / total);
    return Opinion(b, 1.0 - sb);
}

void criterion_dst() {
    std::mt19937_64 rng(99);
    const std::array<std::size_t, 4> ks{2, 3, 5, 10};
    double worst = 0.0;
    bool neutral = true, commutative = true;
    for (int i = 0; i < kDstPairs; ++i) {
        const std::size_t k = ks[i % 4];
        const auto a = random_opinion(rng, k);
        const auto b = random_opinion(rng, k);
        const auto ab = ds_combine_reduced(a, b);
        const std::array src{MassFunction::from_opinion(a), MassFunction::from_opinion(b)};
        const auto oracle = ds_full_dempster_oracle(src);
        worst = std::max(worst, std::abs(ab.uncertainty() - oracle.mass(oracle.frame_mask())));
        for (std::size_t j = 0; j < k; ++j)
            worst = std::max(worst, std::abs(ab.belief(j) - oracle.mass(std::uint32_t{1} << j)));
        commutative = commutative && ab == ds_combine_reduced(b, a);
        neutral = neutral && ds_combine_reduced(a, Opinion::vacuous(k)) == a &&
                  ds_combine_reduced(Opinion::vacuous(k), a) == a;
    }
    report(3, "reduced Dempster rule vs full Dempster oracle", worst <= kDstTol && neutral && commutative,
           fmt("%d pairs, max component difference %.3g, vacuous neutrality %s, commutativity %s", kDstPairs, worst,
               neutral ? "exact" : "broken", commutative ? "exact" : "broken"));
}

MultiViewBatch random_batch(std::mt19937_64& rng, std::size_t n, const std::vector<std::size_t>& dims, std::size_t k) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Eigen::MatrixXd> views;
    for (auto d : dims) {
        Eigen::MatrixXd x(n, d);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
        views.push_back(x);
    }
    std::vector<int> labels(n);
    std::uniform_int_distribution<int> lab(0, int(k) - 1);
    for (auto& y : labels) y = lab(rng);
    return MultiViewBatch::all_present(std::move(views), std::move(labels));
}

void criterion_gradients() {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> ua(1.1, 2.5), ug(0.5, 2.0), ul(0.1, 1.0);
    double worst = 0.0;
    std::size_t checked = 0;
    for (int c = 0; c < kGradConfigs; ++c) {
        const bool pseudo = c % 2 == 0;
        const bool masked_views = c % 4 >= 2;
        MultiViewModel model({5, 5}, 3, c % 3 == 0 ? 0 : 4, pseudo);
        model.initialize(500 + c);
        auto params = model.parameters();
        for (auto& v : params) v *= 2.0;
        model.set_parameters(params);
        auto batch = random_batch(rng, 4, {5, 5}, 3);
        if (masked_views) {
            batch.present(1, 0) = false;
            batch.present(3, 1) = false;
        }
        TrainConfig cfg;
        cfg.holder = HolderConfig(ua(rng), ug(rng));
        cfg.regularizer = c < kGradConfigs / 2 ? RegularizerKind::PHD : RegularizerKind::KL;
        cfg.target = c % 5 == 4 ? RegularizerTarget::Raw : RegularizerTarget::LabelMasked;
        cfg.lambda_max = ul(rng);
        const int epoch = 1 + c % 12;

        const auto g = total_loss(model, batch, cfg, epoch).gradient;
        for (std::size_t j = 0; j < params.size(); ++j) {
            const double keep = params[j];
            params[j] = keep + kGradStep;
            model.set_parameters(params);
            const double up = total_loss(model, batch, cfg, epoch, {}, false).loss;
            params[j] = keep - kGradStep;
            model.set_parameters(params);
            const double down = total_loss(model, batch, cfg, epoch, {}, false).loss;
            params[j] = keep;
            model.set_parameters(params);
            const double fd = (up - down) / (2 * kGradStep);
            worst = std::max(worst, std::abs(g[j] - fd) / std::max({std::abs(g[j]), std::abs(fd), kGradFloor}));
            ++checked;
        }
    }
    report(4, "analytic gradients vs central differences", worst <= kGradRelTol,
           fmt("%d configs, %zu parameters, max relative error %.3g (step 1e-5)", kGradConfigs, checked, worst));
}

void criterion_kalman() {
    std::mt19937_64 rng(31337);
    std::normal_distribution<double> noise(0.7, 0.1);
    std::vector<double> z(1000);
    for (auto& v : z) v = noise(rng);
    const KalmanConfig cfg{1.0, 1e-4, 1e-2};
    const auto out = filter_sequence(initial_state(cfg, z.front()), z);

    double p = cfg.p0;
    for (int i = 0; i < 1'000'000; ++i) {
        const double next = ((p + cfg.q) * cfg.r) / ((p + cfg.q) + cfg.r);
        if (next == p) break;
        p = next;
    }
    const double diff = std::abs(out.back().p_var - p);
    report(5, "Kalman steady-state variance", diff <= kRiccatiTol,
           fmt("final p_var %.15g, fixed point %.15g, difference %.3g", out.back().p_var, p, diff));
}

// Shared synthetic benchmark for the trend criteria.
ExperimentConfig benchmark_config() {
    auto cfg = experiment_from(KeyValueConfig::parse(quickstart_config_text()));
    cfg.data.classes = 3;
    cfg.data.dims = {8, 8};
    cfg.data.separation = 1.5;
    cfg.data.noise_std = 0.4;
    cfg.data.informativeness = {1.0, 0.8};
    cfg.data.n_train = 1200;
    cfg.data.n_test = 300;
    cfg.seeds.assign(kSeeds.begin(), kSeeds.end());
    return cfg;
}

MetricsReport evaluate_at(const MultiViewModel& model, const MultiViewBatch& test, const CorruptionSpec& spec,
                          std::uint64_t seed) {
    EvaluateOptions opts;
    opts.clustering = false;
    return evaluate(model, corrupt(test, spec, seed), opts);
}

void trend_criteria() {
    const auto cfg = benchmark_config();
    auto kl_cfg = cfg;
    kl_cfg.train.regularizer = RegularizerKind::KL;

    std::vector<TrainedRun> runs;
    const auto t0 = Clock::now();
    for (auto seed : kSeeds) runs.push_back(train_run(cfg, seed));
    const double train_secs = seconds_since(t0);

    // 6: fusion benefit.
    double fused_sum = 0.0, best_sum = 0.0;
    std::string per_seed;
    for (std::size_t s = 0; s < runs.size(); ++s) {
        const auto rep = evaluate_at(runs[s].trained.model, runs[s].data.test, CorruptionSpec{}, kSeeds[s]);
        const double best = *std::max_element(rep.view_accuracy.begin(), rep.view_accuracy.end());
        fused_sum += rep.accuracy;
        best_sum += best;
        per_seed += fmt(" %.3f/%.3f", rep.accuracy, best);
    }
    const double n = double(runs.size());
    const double fused = fused_sum / n, best = best_sum / n;
    const double secs = seconds_since(t0);
    report(6, "fusion benefit on the 2-view benchmark",
           fused >= best - kFusionSlack && fused >= kFusionFloor && secs < kFusionSeconds,
           fmt("mean fused %.4f vs mean best single view %.4f (fused/best per seed:%s), %.1f s (training %.1f s)",
               fused, best, per_seed.c_str(), secs, train_secs));

    // 7: uncertainty rises with noise on view 1 only.
    int monotone = 0;
    double worst_other = 0.0;
    std::string trace;
    for (std::size_t s = 0; s < runs.size(); ++s) {
        std::vector<double> u0, u1;
        for (double s2 : kSigma2) {
            const auto rep = evaluate_at(runs[s].trained.model, runs[s].data.test, CorruptionSpec{s2, 0.0, {0}, true},
                                         kSeeds[s] + 100);
            u0.push_back(rep.view_mean_uncertainty[0]);
            u1.push_back(rep.view_mean_uncertainty[1]);
        }
        monotone += u0[0] < u0[1] && u0[1] < u0[2];
        for (double v : u1) worst_other = std::max(worst_other, std::abs(v - u1[0]) / u1[0]);
        trace += fmt(" [%.5f %.5f %.5f]", u0[0], u0[1], u0[2]);
    }
    report(7, "view-1 uncertainty increases with injected noise",
           monotone == int(runs.size()) && worst_other < kOtherViewRelChange,
           fmt("strictly increasing on %d/%zu seeds, u(view 1) per seed:%s; view 2 max relative change %.3g", monotone,
               runs.size(), trace.c_str(), worst_other));

    // 8: missing-rate robustness.
    double acc_low = 0.0, acc_high = 0.0;
    for (std::size_t s = 0; s < runs.size(); ++s) {
        const auto& r = runs[s];
        acc_low += evaluate_at(r.trained.model, r.data.test, CorruptionSpec{0.0, 0.1, {0, 1}, true}, kSeeds[s] + 200).accuracy;
        acc_high += evaluate_at(r.trained.model, r.data.test, CorruptionSpec{0.0, 0.5, {0, 1}, true}, kSeeds[s] + 200).accuracy;
    }
    acc_low /= n;
    acc_high /= n;
    report(8, "fused accuracy under missing views", std::abs(acc_high - acc_low) <= kMissingGap,
           fmt("mean fused accuracy eta=0.1: %.4f, eta=0.5: %.4f, gap %.4f", acc_low, acc_high, acc_low - acc_high));

    // 9: PHD vs KL regularizer.
    double phd_sum = 0.0, kl_sum = 0.0;
    std::printf("      seed  acc_phd  acc_kl\n");
    for (std::size_t s = 0; s < runs.size(); ++s) {
        const auto kl_run = train_run(kl_cfg, kSeeds[s]);
        const double a_phd = evaluate_at(runs[s].trained.model, runs[s].data.test, CorruptionSpec{}, kSeeds[s]).accuracy;
        const double a_kl = evaluate_at(kl_run.trained.model, kl_run.data.test, CorruptionSpec{}, kSeeds[s]).accuracy;
        std::printf("      %4llu  %.4f   %.4f\n", static_cast<unsigned long long>(kSeeds[s]), a_phd, a_kl);
        phd_sum += a_phd;
        kl_sum += a_kl;
    }
    const double diff = (phd_sum - kl_sum) / n;
    report(9, "PHD regularizer non-inferior to KL", diff >= kAblationMargin,
           fmt("mean fused accuracy PHD %.4f, KL %.4f, difference %+.4f", phd_sum / n, kl_sum / n, diff));
}

void criterion_clustering() {
    std::mt19937_64 rng(777);
    int exact = 0;
    bool permuted_ok = true;
    for (int t = 0; t < kCaTables; ++t) {
        const std::size_t k = 1 + t % 6;
        std::uniform_int_distribution<int> lab(0, int(k) - 1);
        std::vector<int> pred(80), truth(80);
        for (auto& v : pred) v = lab(rng);
        for (auto& v : truth) v = lab(rng);
        const auto table = contingency(pred, truth, k);
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        long best = 0;
        do {
            long s = 0;
            for (std::size_t p = 0; p < k; ++p) s += table[p][perm[p]];
            best = std::max(best, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        exact += clustering_accuracy(pred, truth, k) == double(best) / 80.0;

        std::vector<int> relabel(k);
        std::iota(relabel.begin(), relabel.end(), 0);
        std::shuffle(relabel.begin(), relabel.end(), rng);
        auto moved = truth;
        for (auto& v : moved) v = relabel[v];
        permuted_ok = permuted_ok && clustering_accuracy(moved, truth, k) == 1.0;
    }
    report(10, "clustering accuracy vs brute force", exact == kCaTables && permuted_ok,
           fmt("%d/%d tables exact, permuted labels give CA = 1: %s", exact, kCaTables, permuted_ok ? "yes" : "no"));
}

void criterion_determinism() {
    const auto cfg = experiment_from(KeyValueConfig::parse(quickstart_config_text()));
    std::ostringstream a, b;
    write_metrics_csv(a, run_experiment(cfg));
    write_metrics_csv(b, run_experiment(cfg));
    const bool same = a.str() == b.str();
    report(11, "quickstart determinism", same && !a.str().empty(),
           fmt("two runs with seed %llu, metrics CSV of %zu bytes, %s", static_cast<unsigned long long>(cfg.seeds.front()),
               a.str().size(), same ? "bitwise identical" : "different"));
}

}  // namespace

int main() {
    divergence_criterion(
        1, "closed-form PHD vs integral definition",
        [](const Tuple& t) { return phd_closed(t.cfg, t.p, t.q); },
        [](const Tuple& t, std::uint64_t seed) { return phd_mc_oracle(t.cfg, t.p, t.q, kMcSamples, seed); });
    divergence_criterion(
        2, "closed-form KL vs Monte Carlo",
        [](const Tuple& t) { return kl_dirichlet(t.p, t.q); },
        [](const Tuple& t, std::uint64_t seed) { return kl_mc_oracle(t.p, t.q, kMcSamples, seed); });
    criterion_dst();
    criterion_gradients();
    criterion_kalman();
    trend_criteria();
    criterion_clustering();
    criterion_determinism();
    std::printf("%d criteria failed\n", failures);
    return failures;
}
