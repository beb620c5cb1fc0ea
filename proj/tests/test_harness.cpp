#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "hev/errors.hpp"
#include "hev/harness/config.hpp"
#include "hev/harness/dataset_io.hpp"
#include "hev/harness/experiment.hpp"
#include "hev/harness/metrics.hpp"
#include "hev/harness/synthetic.hpp"

using namespace hev;
using namespace hev::harness;

namespace {

bool same_batch(const MultiViewBatch& a, const MultiViewBatch& b) {
    if (a.labels != b.labels || a.views.size() != b.views.size()) return false;
    if ((a.present != b.present).any()) return false;
    for (std::size_t m = 0; m < a.views.size(); ++m) {
        if (a.views[m].rows() != b.views[m].rows() || a.views[m].cols() != b.views[m].cols()) return false;
        if (std::memcmp(a.views[m].data(), b.views[m].data(), sizeof(double) * a.views[m].size()) != 0) return false;
    }
    return true;
}

// Best matching by trying every permutation of predicted ids.
double brute_force_ca(const std::vector<std::vector<long>>& table, std::size_t n) {
    const std::size_t k = table.size();
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    long best = 0;
    do {
        long s = 0;
        for (std::size_t p = 0; p < k; ++p) s += table[p][perm[p]];
        best = std::max(best, s);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return double(best) / double(n);
}

double fused_accuracy_after_training(const SyntheticConfig& sc, int epochs) {
    const auto data = generate_synthetic(sc);
    MultiViewModel init(sc.dims, sc.classes, 0, false);
    init.initialize(sc.seed);
    TrainConfig cfg;
    cfg.seed = sc.seed;
    cfg.epochs = epochs;
    cfg.lambda_max = 0.2;
    const auto run = train(init, data.train, cfg);
    const auto p = predict(run.model, data.test);
    return accuracy(p.labels, data.test.labels);
}

}  // namespace

TEST_CASE("synthetic data") {
    SyntheticConfig sc;
    sc.seed = 3;
    const auto a = generate_synthetic(sc);
    const auto b = generate_synthetic(sc);
    CHECK(same_batch(a.train, b.train));
    CHECK(same_batch(a.test, b.test));
    CHECK(a.train.size() == sc.n_train);
    CHECK(a.test.size() == sc.n_test);
    std::vector<int> counts(sc.classes, 0);
    for (int y : a.train.labels) ++counts[y];
    for (int c : counts) CHECK(c == int(sc.n_train / sc.classes));

    sc.seed = 4;
    CHECK_FALSE(same_batch(generate_synthetic(sc).train, a.train));

    sc.dims = {0, 8};
    CHECK_THROWS_AS(sc.validate(), ConfigError);
    sc.dims = {8, 8};
    sc.separation = -1.0;
    CHECK_THROWS_AS(sc.validate(), ConfigError);
}

TEST_CASE("separation controls learnability") {
    SyntheticConfig blind;
    blind.seed = 5;
    blind.separation = 0.0;
    blind.n_test = 900;
    const double chance = fused_accuracy_after_training(blind, 15);
    // 99.9% binomial interval around 1/3 for 900 samples, widened for the learned bias.
    CHECK(std::abs(chance - 1.0 / 3.0) <= 3.3 * std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / 900.0) + 0.02);

    SyntheticConfig far = blind;
    far.separation = 10.0;
    CHECK(fused_accuracy_after_training(far, 15) >= 0.99);
}

TEST_CASE("corruption") {
    SyntheticConfig sc;
    sc.seed = 8;
    const auto data = generate_synthetic(sc);

    CorruptionSpec none;
    CHECK(same_batch(corrupt(data.test, none, 1), data.test));

    CorruptionSpec drop;
    drop.missing_rate = 1.0;
    drop.target_views = {1};
    const auto dropped = corrupt(data.test, drop, 2);
    CHECK_FALSE(dropped.present.col(1).any());
    CHECK(dropped.present.col(0).all());

    MultiViewModel model(sc.dims, sc.classes, 0, false);
    model.initialize(1);
    CHECK(predict(model, dropped).labels == predict_view(model, data.test, 0));

    // Realized dropout fraction against the binomial law.
    SyntheticConfig big = sc;
    big.n_test = 10000;
    const auto many = generate_synthetic(big).test;
    CorruptionSpec rate;
    rate.missing_rate = 0.3;
    rate.target_views = {0};
    const auto r = corrupt(many, rate, 3);
    const double frac = 1.0 - double(r.present.col(0).count()) / 10000.0;
    CHECK(std::abs(frac - 0.3) <= 3.0 * std::sqrt(0.3 * 0.7 / 10000.0));

    CorruptionSpec both;
    both.missing_rate = 0.9;
    both.target_views = {0, 1};
    const auto kept = corrupt(many, both, 4);
    for (Eigen::Index i = 0; i < kept.present.rows(); ++i) CHECK(kept.present.row(i).any());
    // Both views drop with probability 0.81 and one comes back, so about 1.01 n views survive.
    CHECK(kept.present.count() < 1.05 * double(kept.present.rows()));

    CorruptionSpec untargeted;
    untargeted.missing_rate = 0.9;
    untargeted.noise_sigma2 = 1.0;
    CHECK(same_batch(corrupt(many, untargeted, 4), many));

    CorruptionSpec noisy;
    noisy.noise_sigma2 = 0.04;
    noisy.target_views = {0};
    const auto n = corrupt(many, noisy, 5);
    const Eigen::MatrixXd diff = n.views[0] - many.views[0];
    const double var = diff.array().square().mean();
    CHECK(var == doctest::Approx(0.04).epsilon(0.02));
    CHECK(n.views[1] == many.views[1]);

    CorruptionSpec bad;
    bad.missing_rate = 1.5;
    CHECK_THROWS_AS(corrupt(many, bad, 0), ConfigError);
}

TEST_CASE("accuracy and macro-F1") {
    const std::vector<int> t{0, 1, 2, 1, 0, 2};
    CHECK(accuracy(t, t) == 1.0);
    CHECK(macro_f1(t, t) == 1.0);

    const std::vector<int> truth{0, 1, 0, 1}, all0{0, 0, 0, 0};
    CHECK(accuracy(all0, truth) == 0.5);
    CHECK(macro_f1(all0, truth, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    const std::vector<int> wrong{1, 0, 1, 0};
    CHECK(accuracy(wrong, truth) == 0.0);
    CHECK_THROWS(accuracy(std::vector<int>{0}, truth));
}

TEST_CASE("clustering accuracy") {
    const std::vector<int> t{0, 0, 1, 1, 2, 2, 2};
    CHECK(clustering_accuracy(t, t, 3) == 1.0);
    std::vector<int> p = t;
    for (auto& v : p) v = (v + 1) % 3;
    CHECK(clustering_accuracy(p, t, 3) == 1.0);

    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + trial % 6;
        std::uniform_int_distribution<int> lab(0, int(k) - 1);
        std::vector<int> pred(60), truth(60);
        for (auto& v : pred) v = lab(rng);
        for (auto& v : truth) v = lab(rng);
        const double ca = clustering_accuracy(pred, truth, k);
        CHECK(ca == brute_force_ca(contingency(pred, truth, k), 60));

        std::vector<int> relabel(k);
        std::iota(relabel.begin(), relabel.end(), 0);
        std::shuffle(relabel.begin(), relabel.end(), rng);
        auto moved = pred;
        for (auto& v : moved) v = relabel[v];
        CHECK(clustering_accuracy(moved, truth, k) == ca);
    }
    CHECK_THROWS_AS(clustering_accuracy(t, t, 21), DomainError);
}

TEST_CASE("k-means") {
    Eigen::MatrixXd pts(6, 2);
    pts << 0, 0, 0.1, 0, 0, 0.1, 5, 5, 5.1, 5, 5, 5.1;
    const auto ids = kmeans(pts, 2, 1);
    CHECK(ids[0] == ids[1]);
    CHECK(ids[1] == ids[2]);
    CHECK(ids[3] == ids[4]);
    CHECK(ids[0] != ids[3]);
    CHECK(kmeans(pts, 2, 1) == ids);
    const auto one = kmeans(pts, 1, 1);
    CHECK(std::all_of(one.begin(), one.end(), [](int v) { return v == 0; }));

    SyntheticConfig sc;
    sc.seed = 12;
    sc.separation = 10.0;
    const auto data = generate_synthetic(sc);
    MultiViewModel init(sc.dims, sc.classes, 0, false);
    init.initialize(12);
    TrainConfig cfg;
    cfg.seed = 12;
    cfg.epochs = 15;
    const auto model = train(init, data.train, cfg).model;
    const auto c = cluster_assignments(model, data.test, sc.classes, 3);
    CHECK(c == cluster_assignments(model, data.test, sc.classes, 3));
    CHECK(clustering_accuracy(c, data.test.labels, sc.classes) == 1.0);

    const auto rep = evaluate(model, data.test, EvaluateOptions{true, 3, true, {}});
    CHECK(rep.accuracy >= 0.99);
    REQUIRE(rep.clustering_accuracy.has_value());
    CHECK(*rep.clustering_accuracy == 1.0);
    for (double u : rep.view_mean_uncertainty) CHECK((u >= 0.0 && u <= 1.0));
    CHECK(rep.smoothed_confidence.size() == data.test.size());
    for (const auto& s : rep.smoothed_confidence) CHECK((s.x_hat >= 0.0 && s.x_hat <= 1.0));
}

TEST_CASE("key-value config") {
    const auto kv = KeyValueConfig::parse("# comment\nexperiment.name = demo\ntrain.epochs=5 # trailing\n"
                                          "corrupt.sigma2 = 0, 0.01,0.03\nkalman.enabled = false\n");
    auto cfg = experiment_from(kv);
    CHECK(cfg.name == "demo");
    CHECK(cfg.train.epochs == 5);
    CHECK(cfg.sigma2_levels == std::vector<double>{0.0, 0.01, 0.03});
    CHECK_FALSE(cfg.use_kalman);

    CHECK_THROWS_AS(KeyValueConfig::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("just words\n"), ConfigError);
    try {
        experiment_from(KeyValueConfig::parse("train.epochs = many\n"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "train.epochs");
    }
    try {
        experiment_from(KeyValueConfig::parse("train.epoch = 3\n"));
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "train.epoch");
    }
    CHECK_THROWS_AS(experiment_from(KeyValueConfig::parse("train.regularizer = l2\n")), ConfigError);
    CHECK_THROWS_AS(experiment_from(KeyValueConfig::parse("train.alpha_h = 1\n")), ConfigError);
    CHECK_THROWS_AS(experiment_from(KeyValueConfig::parse("corrupt.eta = 2\n")), ConfigError);

    const auto q = experiment_from(KeyValueConfig::parse(quickstart_config_text()));
    CHECK(q.seeds == std::vector<std::uint64_t>{7});
}

TEST_CASE("dataset CSV round trip") {
    SyntheticConfig sc;
    sc.seed = 14;
    sc.dims = {3, 5};
    sc.n_test = 40;
    const auto data = generate_synthetic(sc);
    CorruptionSpec spec;
    spec.missing_rate = 0.4;
    const auto batch = corrupt(data.test, spec, 9);

    std::stringstream buf;
    write_dataset_csv(buf, batch);
    std::string header;
    std::getline(std::stringstream(buf.str()), header);
    CHECK(header == "view,sample,label,f0,f1,f2,f3,f4");
    std::stringstream in(buf.str());
    const auto back = read_dataset_csv(in);
    CHECK(back.labels == batch.labels);
    CHECK((back.present == batch.present).all());
    for (std::size_t m = 0; m < 2; ++m)
        for (Eigen::Index i = 0; i < batch.present.rows(); ++i)
            if (batch.present(i, m)) CHECK(back.views[m].row(i) == batch.views[m].row(i));
}

TEST_CASE("metrics CSV layout") {
    MetricsRow row;
    row.run_id = "r0";
    row.alpha_h = 1.5;
    row.gamma = 1.0;
    row.regularizer = "phd";
    row.acc_view = {0.9, 0.8};
    row.mean_u_view = {0.1, 0.2};
    row.seed = 4;
    std::stringstream out;
    write_metrics_csv(out, {row});
    std::string header, line;
    std::getline(out, header);
    std::getline(out, line);
    CHECK(header == "run_id,alpha_h,gamma,regularizer,sigma2,eta,acc_view_0,acc_view_1,acc_fused,f1_fused,ca,"
                    "mean_u_view_0,mean_u_view_1,seed");
    CHECK(line == "r0,1.5,1,phd,0,0,0.9,0.8,0,0,0,0.1,0.2,4");
}

TEST_CASE("grid and ablation runs") {
    ExperimentConfig cfg;
    cfg.data.n_train = 60;
    cfg.data.n_test = 30;
    cfg.train.epochs = 2;
    cfg.hidden = 0;
    cfg.jobs = 4;
    cfg.seeds = {1, 2};
    const auto grid = run_grid(cfg, 1);
    REQUIRE(grid.size() == 36);
    CHECK(grid.front().alpha_h == 1.1);
    CHECK(grid.front().gamma == 0.5);
    CHECK(grid.back().alpha_h == 2.5);
    CHECK(grid.back().gamma == 2.0);
    cfg.jobs = 1;
    const auto serial = run_grid(cfg, 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(grid[i].acc_fused == serial[i].acc_fused);
        CHECK((grid[i].acc_fused >= 0.0 && grid[i].acc_fused <= 1.0));
        CHECK((grid[i].f1_fused >= 0.0 && grid[i].f1_fused <= 1.0));
        CHECK((grid[i].ca >= 0.0 && grid[i].ca <= 1.0));
    }

    const auto abl = run_ablation(cfg);
    REQUIRE(abl.size() == 6);
    CHECK(abl[0].regularizer == "kl");
    CHECK(abl[1].regularizer == "holder");
    CHECK(abl[2].regularizer == "holder_dir");

    cfg.sigma2_levels = {0.0, 0.01};
    cfg.eta_levels = {0.0, 0.5};
    const auto rows = run_experiment(cfg);
    CHECK(rows.size() == 2 * 4);
}

TEST_CASE("bundled quickstart file matches the embedded config") {
    std::ifstream f(std::string(HEV_SOURCE_DIR) + "/configs/quickstart.cfg");
    REQUIRE(f);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == quickstart_config_text());
}
