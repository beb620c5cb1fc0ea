#include <doctest.h>

#include <cmath>
#include <random>

#include "hev/errors.hpp"
#include "hev/kalman.hpp"

using namespace hev;

namespace {

// Iterates the variance recurrence alone until it stops moving.
double riccati_fixed_point(double p, double q, double r) {
    for (int i = 0; i < 1'000'000; ++i) {
        const double next = ((p + q) * r) / ((p + q) + r);
        if (next == p) break;
        p = next;
    }
    return p;
}

}  // namespace

TEST_CASE("predict") {
    KalmanState s{0.3, 1.0, 0.0, 1e-2};
    const auto same = predict(s);
    CHECK(same.x_hat == s.x_hat);
    CHECK(same.p_var == s.p_var);

    s.q_var = 0.5;
    CHECK(predict(s).p_var == 1.5);
    auto t = s;
    for (int i = 0; i < 10; ++i) t = predict(t);
    CHECK(t.p_var == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(t.x_hat == 0.3);
}

TEST_CASE("update") {
    const auto a = update(KalmanState{0.0, 1.0, 0.0, 1.0}, 1.0);
    CHECK(a.x_hat == 0.5);
    CHECK(a.p_var == 0.5);

    const auto b = update(KalmanState{0.2, 1.0, 0.0, 1e12}, 0.9);
    CHECK(b.x_hat == doctest::Approx(0.2).epsilon(1e-11));

    const auto c = update(KalmanState{0.2, 1e12, 0.0, 0.5}, 0.9);
    CHECK(c.x_hat == doctest::Approx(0.9).epsilon(1e-11));

    CHECK_THROWS_AS(KalmanState({0, -1, 0, 1}).validate(), DomainError);
    CHECK_THROWS_AS(KalmanState({0, 1, 0, 0}).validate(), DomainError);
    CHECK_THROWS_AS(filter_sequence(KalmanState{0, 1, 0, 0}, std::vector<double>{1.0}), DomainError);
}

TEST_CASE("steady-state variance reaches the Riccati fixed point") {
    std::mt19937_64 rng(2718);
    std::normal_distribution<double> noise(0.7, 0.1);
    std::vector<double> z(1000);
    for (double& v : z) v = noise(rng);

    const KalmanConfig cfg;
    const auto out = filter_sequence(initial_state(cfg, z.front()), z);
    REQUIRE(out.size() == z.size());
    const double fixed = riccati_fixed_point(cfg.p0, cfg.q, cfg.r);
    CHECK(std::abs(out.back().p_var - fixed) <= 1e-8);
    CHECK(out.back().x_hat == doctest::Approx(0.7).epsilon(0.1));
}

TEST_CASE("filter properties") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> z1(300), z2(300);
    for (double& v : z1) v = u(rng);
    for (double& v : z2) v = u(rng);

    const KalmanState init{0.5, 1.0, 1e-4, 1e-2};
    const auto a = filter_sequence(init, z1);
    const auto b = filter_sequence(init, z2);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].p_var == b[i].p_var);
        CHECK(a[i].p_var >= 0.0);
    }

    // Splitting a stream and resuming gives the same output as one pass.
    KalmanState s = init;
    auto first = filter_stream(s, std::span<const double>(z1).first(117));
    const auto second = filter_stream(s, std::span<const double>(z1).subspan(117));
    first.insert(first.end(), second.begin(), second.end());
    REQUIRE(first.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(first[i].x_hat == a[i].x_hat);
        CHECK(first[i].p_var == a[i].p_var);
    }

    const KalmanState still{0.0, 2.0, 0.0, 0.1};
    const auto c = filter_sequence(still, z1);
    for (std::size_t i = 1; i < c.size(); ++i) CHECK(c[i].p_var <= c[i - 1].p_var);

    const std::vector<double> constant(200, 0.8);
    const auto d = filter_sequence(still, constant);
    for (std::size_t i = 1; i < d.size(); ++i) {
        CHECK(d[i].x_hat >= d[i - 1].x_hat);
        CHECK(d[i].x_hat <= 0.8);
    }
    CHECK(d.back().x_hat == doctest::Approx(0.8).epsilon(1e-3));

    const auto e = filter_sequence(KalmanState{0.0, 1.0, 1e-4, 1e-12}, z1);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(e[i].x_hat == doctest::Approx(z1[i]).epsilon(1e-8));

    CHECK_THROWS(filter_sequence(init, std::span<const double>{}));
}

TEST_CASE("initial state") {
    const auto s = initial_state(KalmanConfig{2.0, 1e-3, 5e-2}, 0.4);
    CHECK(s.x_hat == 0.4);
    CHECK(s.p_var == 2.0);
    CHECK(s.q_var == 1e-3);
    CHECK(s.r_var == 5e-2);
}
